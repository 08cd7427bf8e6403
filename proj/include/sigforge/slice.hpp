#pragma once

#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "sigforge/ast.hpp"
#include "sigforge/interp.hpp"

namespace sigforge {

enum class SliceKind { Static, Dynamic };

struct Slice {
  SourceLoc criterion;
  SliceKind kind = SliceKind::Static;
  std::set<StmtId> nodes;   // statements inside functions (global declarations excluded)

  nlohmann::json to_json(const Program& program) const;
};

class UnknownCriterion : public Error {
 public:
  using Error::Error;
};

class CriterionNotInTrace : public Error {
 public:
  using Error::Error;
};

/// Backward closure over def-use (with direct pointer copies as aliases) and
/// post-dominator control dependence on the inlined graph of main.
Slice static_slice(const Program& program, const SourceLoc& criterion);

/// Same closure over the occurrences of one execution trace.
Slice dynamic_slice(const Program& program, const SourceLoc& criterion, const ExecOutcome& run);

/// The program with every statement outside `keep` removed; functions without
/// kept statements (other than main) and unused globals are dropped.
Program restrict_program(const Program& program, const std::set<StmtId>& keep);

struct MetricsRow {
  std::string name;
  int loc = 0;          // non-blank, non-comment lines
  int cyclomatic = 0;   // per function: decisions + 1, summed

  nlohmann::json to_json() const { return {{"name", name}, {"loc", loc}, {"cyclomatic", cyclomatic}}; }
};

MetricsRow metrics(const Program& program, const std::string& name = "");
int count_loc(const std::string& source);
/// Lines of the original restricted to the slice, as emitted source.
int slice_loc(const Program& program, const Slice& slice);

}  // namespace sigforge

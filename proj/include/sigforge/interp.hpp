#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "sigforge/ast.hpp"
#include "sigforge/cfg.hpp"
#include "sigforge/fault.hpp"

namespace sigforge {

enum class VerdictKind { NormalExit, Fault, Timeout };

struct Verdict {
  VerdictKind kind = VerdictKind::NormalExit;
  int exit_code = 0;
  FaultType fault = FaultType::AssertViolation;
  SourceLoc loc;

  bool is_fault() const { return kind == VerdictKind::Fault; }
  bool is_fault(FaultType t, StmtId at) const { return is_fault() && fault == t && loc.stmt_id == at; }
  bool operator==(const Verdict&) const = default;
  std::string describe() const;
};

/// One read_line call: which record it consumed (-1 at end of input).
struct InputEvent {
  std::size_t trace_pos = 0;   // index into ExecOutcome::trace of the read_line statement
  StmtId stmt = kNoStmt;
  int record = -1;
  std::string text;            // bytes actually stored (after truncation)
};

struct ExecOutcome {
  Verdict verdict;
  std::vector<StmtId> trace;      // one entry per executed CFG node
  std::vector<NodeRole> roles;    // parallel to trace
  std::uint64_t steps = 0;
  std::string output;
  std::vector<InputEvent> inputs;

  nlohmann::json to_json(bool with_trace = false) const;
};

struct ExecOptions {
  std::uint64_t step_limit = 1'000'000;
  /// Report allocations still live at exit as ResourceLeak.
  bool detect_leaks = false;
};

/// Splits input into newline-delimited records (a trailing newline does not
/// start an empty record).
std::vector<std::string> split_records(const std::string& input);
std::string join_records(const std::vector<std::string>& records);

ExecOutcome run(const Program& program, const std::string& input = "", const ExecOptions& options = {});

/// How to hand over from the original program to a signature.
struct SubstitutionPlan {
  StmtId entry_original = kNoStmt;              // switch when this statement is first about to run
  std::map<StmtId, std::string> transfers;      // signature decl stmt -> original variable name
                                                // (innermost active frame first, then globals)
};

struct SubstitutedOutcome {
  ExecOutcome outcome;          // signature part when entered, else the original's outcome
  bool entered_signature = false;
  ExecOutcome prefix;           // original part up to the switch
};

SubstitutedOutcome run_substituted(const Program& original, const Program& signature, const SubstitutionPlan& plan,
                                   const std::string& input, const ExecOptions& options = {});

/// True iff `sub` is a (not necessarily contiguous) subsequence of `full`.
bool is_subsequence(const std::vector<StmtId>& sub, const std::vector<StmtId>& full);

}  // namespace sigforge

#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "sigforge/ast.hpp"
#include "sigforge/fault.hpp"
#include "sigforge/interp.hpp"
#include "sigforge/path.hpp"

namespace sigforge {

/// One emitted signature line. `origin` is the original stmt id, or kNoStmt
/// for scaffolding; `node` is the segment position it realizes (-1 for scaffold).
struct LineOrigin {
  int sig_line = 0;
  StmtId origin = kNoStmt;
  int node = -1;

  bool scaffold() const { return origin == kNoStmt; }
  bool operator==(const LineOrigin&) const = default;
};

struct SignatureManifest {
  std::string original_file;
  FaultType fault_type = FaultType::AssertViolation;
  SourceLoc fault_loc_original;
  SourceLoc fault_loc_signature;
  StmtId entry_original = kNoStmt;
  bool approximate = false;
  std::vector<LineOrigin> line_map;
  std::map<int, std::string> transfers;   // scaffold declaration line -> original variable

  /// Original stmt ids of segment lines, one per realized segment node, in order.
  std::vector<StmtId> segment_origins() const;
  /// Original stmt id shown on a signature line (kNoStmt for scaffold or unknown lines).
  StmtId origin_of_line(int sig_line) const;

  nlohmann::json to_json() const;
  static SignatureManifest from_json(const nlohmann::json& j);
};

struct FaultSignature {
  Program program;
  std::string source;
  SignatureManifest manifest;
  FaultSpec fault;   // in signature coordinates

  /// Switch point and value transfers for substituted execution.
  SubstitutionPlan plan() const;
  /// Signature trace restricted to segment lines, mapped to original stmt ids.
  std::vector<StmtId> mapped_trace(const std::vector<StmtId>& trace) const;
};

class SynthesisFailure : public Error {
 public:
  using Error::Error;
};

FaultSignature synthesize(const FaultyPathSegment& segment, const Program& program);

/// Rebuilds a signature from its source text and manifest.
FaultSignature load_signature(const std::string& source, const SignatureManifest& manifest,
                              const std::string& file = "signature.mc");

/// Standalone C99 translation unit with a stdio preamble for the MiniC builtins.
std::string export_c(const FaultSignature& signature);

}  // namespace sigforge

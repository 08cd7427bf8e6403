#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sigforge/ast.hpp"
#include "sigforge/fault.hpp"
#include "sigforge/interp.hpp"
#include "sigforge/signature.hpp"

namespace sigforge {

enum class EditAction { Replace, InsertBefore, InsertAfter, Delete };

std::string to_string(EditAction a);
EditAction parse_edit_action(const std::string& s);

/// Replace on an if/while accepts a header such as `if (n < 10)`; the bodies
/// are kept and only the condition changes.
struct PatchEdit {
  StmtId target = kNoStmt;
  int line = 0;   // alternative key, resolved against a program by `resolved`
  EditAction action = EditAction::Replace;
  std::string text;
};

struct Patch {
  std::vector<PatchEdit> edits;

  bool empty() const { return edits.empty(); }
  /// Copy with every line-keyed edit turned into a stmt_id-keyed one.
  Patch resolved(const Program& program) const;

  nlohmann::json to_json() const;
  static Patch from_json(const nlohmann::json& j);
};

class CannotPatch : public Error {
 public:
  using Error::Error;
};

/// Applies a patch keyed by the program's own stmt ids. The result is re-emitted and re-parsed.
Program apply_patch(const Program& program, const Patch& patch);

/// Applies a patch keyed by original stmt ids to the signature statements the
/// manifest maps to them.
FaultSignature transfer_patch(const Patch& patch, const FaultSignature& signature);

/// Re-keys a patch written against signature stmt ids onto the original.
Patch lift_patch(const Patch& on_signature, const FaultSignature& signature);

enum class PatchEffect { Fix, FixWithSideEffect, NotAFix };
std::string to_string(PatchEffect e);

struct PatchClassification {
  PatchEffect effect = PatchEffect::NotAFix;
  std::vector<std::string> still_failing;    // failing inputs that still trigger the fault
  std::vector<std::string> changed;          // inputs whose observable behavior differs from the expectation

  nlohmann::json to_json() const;
};

/// Observable behavior: verdict kind, fault type, exit code and printed output.
bool same_behavior(const ExecOutcome& a, const ExecOutcome& b);

/// NotAFix if any failing input still hits the fault statement with the same fault type;
/// FixWithSideEffect if a passing input changes behavior, or, when a reference
/// (correctly fixed) program is given, any input behaves differently from it; otherwise Fix.
PatchClassification classify_patch_effect(const Program& original, const Program& patched, const FaultSpec& fault,
                                          const std::vector<std::string>& failing_inputs,
                                          const std::vector<std::string>& passing_inputs,
                                          const Program* reference = nullptr, const ExecOptions& options = {});

}  // namespace sigforge

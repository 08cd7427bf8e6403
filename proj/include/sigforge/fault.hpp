#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sigforge/ast.hpp"

namespace sigforge {

enum class FaultType { BufferOverflow, NullDeref, DoubleFree, ResourceLeak, InfiniteLoop, AssertViolation };

inline constexpr FaultType kAllFaultTypes[] = {FaultType::BufferOverflow, FaultType::NullDeref,
                                               FaultType::DoubleFree,     FaultType::ResourceLeak,
                                               FaultType::InfiniteLoop,   FaultType::AssertViolation};

std::string to_string(FaultType t);
/// Accepts the enum spelling, case-insensitively, plus short aliases
/// (overflow, null, double-free, leak, loop, assert).
FaultType parse_fault_type(const std::string& s);

/// Entities of the violated condition, as expressions of the fault statement.
///   BufferOverflow  len(str) > size(buf); `append` for strcat (len(buf)+len(str));
///                   `index` set for a[i] (i >= size(a))
///   NullDeref       value(ptr) == NULL
///   DoubleFree      count_free(ptr) > 1 && value(ptr) != NULL
///   ResourceLeak    N_alloc(r) > N_release(r)
///   InfiniteLoop    value(ind) == value'(ind)
///   AssertViolation !assert_expr
struct FaultCondition {
  FaultType type = FaultType::AssertViolation;
  ExprPtr str;
  ExprPtr buf;
  ExprPtr index;
  bool append = false;
  ExprPtr ptr;
  ExprPtr r;
  std::vector<std::string> ind;
  ExprPtr assert_expr;

  /// Variable names mentioned by the condition.
  std::vector<std::string> entities() const;
  nlohmann::json to_json() const;
};

struct FaultSpec {
  FaultType fault_type = FaultType::AssertViolation;
  SourceLoc fault_loc;
  FaultCondition condition;

  nlohmann::json to_json() const;
};

class NoTemplateMatch : public Error {
 public:
  using Error::Error;
};

class AmbiguousLocation : public Error {
 public:
  using Error::Error;
};

/// Fault types whose template matches the statement, in priority order.
std::vector<FaultType> matching_templates(const Program& program, const Stmt& stmt);

/// `loc` is resolved by stmt_id when set, otherwise by line.
FaultSpec analyze_fault(const Program& program, const SourceLoc& loc, std::optional<FaultType> hint = std::nullopt);

/// Instantiates the condition of `type` at `stmt`; throws NoTemplateMatch.
FaultCondition instantiate(const Program& program, const Stmt& stmt, FaultType type);

/// Variables holding malloc results anywhere in the program.
std::vector<VarKey> malloc_holders(const Program& program);

}  // namespace sigforge

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sigforge/ast.hpp"
#include "sigforge/cfg.hpp"
#include "sigforge/fault.hpp"

namespace sigforge {

/// Closed integer interval with saturating infinities.
struct Interval {
  static constexpr std::int64_t kInf = INT64_MAX / 4;
  std::int64_t lo = -kInf;
  std::int64_t hi = kInf;

  static Interval point(std::int64_t v) { return {v, v}; }
  static Interval top() { return {}; }
  bool empty() const { return lo > hi; }
  bool singleton() const { return lo == hi; }
  bool contains(std::int64_t v) const { return lo <= v && v <= hi; }
  bool bounded() const { return lo > -kInf && hi < kInf; }
  Interval join(const Interval& o) const { return {std::min(lo, o.lo), std::max(hi, o.hi)}; }
  Interval meet(const Interval& o) const { return {std::max(lo, o.lo), std::min(hi, o.hi)}; }
  bool operator==(const Interval&) const = default;
  std::string str() const;
};

Interval operator+(const Interval& a, const Interval& b);
Interval operator-(const Interval& a, const Interval& b);
Interval operator*(const Interval& a, const Interval& b);

/// Abstract value. Unknown carries no information (opaque or never defined);
/// Garbage is an uninitialized local pointer.
struct AbsValue {
  enum Kind : std::uint8_t { Unknown, Garbage, Int, Ptr };
  Kind kind = Unknown;
  Interval iv;                      // Int value, or Ptr offset
  int obj = -1;                     // Ptr target
  std::vector<std::int64_t> excl;   // Int: excluded points
  int len_of = -1;                  // Int known to equal strlen of this object

  static AbsValue unknown() { return {}; }
  static AbsValue garbage() { return {Garbage, {}, -1, {}, -1}; }
  static AbsValue integer(Interval iv) { return {Int, iv, -1, {}, -1}; }
  static AbsValue constant(std::int64_t v) { return integer(Interval::point(v)); }
  static AbsValue pointer(int obj, Interval off) { return {Ptr, off, obj, {}, -1}; }

  bool known() const { return kind == Int || kind == Ptr; }
  bool is_const(std::int64_t v) const { return kind == Int && iv == Interval::point(v); }
  bool may_be_zero() const;
  bool same(const AbsValue& o) const;
};

/// Storage object: every variable, heap block and string literal.
struct AbsObj {
  Interval size = Interval::point(1);   // cells
  bool size_known = true;
  bool array = false;
  bool heap = false;
  bool freed = false;
  int free_count = 0;
  StmtId alloc = kNoStmt;
  StmtId last_use = kNoStmt;

  // contents
  std::optional<std::string> exact;   // string up to the first NUL; cells after it are zero
  bool len_known = false;
  Interval len;                       // strlen bound when !exact
  std::map<std::int64_t, AbsValue> cells;
  AbsValue rest;                      // cells not in `cells`
};

enum class Truth { True, False, Maybe, Unknown };

Truth negate(Truth t);

struct LoopRecord {
  std::map<VarKey, int> versions;
  std::map<VarKey, AbsValue> values;
  bool entered = false;
};

struct AbsState {
  std::vector<AbsObj> objs;
  std::map<VarKey, int> vars;
  std::map<VarKey, int> versions;
  std::map<const Expr*, int> literals;
  bool feasible = true;
  bool approximate = false;   // opaque calls or writes through unknown pointers
  StmtId current = kNoStmt;
};

/// Whether some variable still points (possibly through heap cells) at `obj`.
bool reachable(const AbsState& s, int obj);

/// Transfer functions over one program. Statements are interpreted in the
/// scope of the function that contains them.
class Transfer {
 public:
  explicit Transfer(const Program& program);

  const Program& program() const { return program_; }

  /// Globals bound to their initializers (zero when absent).
  AbsState initial_state() const;

  /// Effect of a non-branch node. Call nodes use `role` (bind: parameters,
  /// return: result assignment).
  void exec(AbsState& s, const Stmt& stmt, NodeRole role) const;

  Truth condition(AbsState& s, const Stmt& branch) const;
  /// Assumes the branch condition has the given value. False if infeasible.
  bool assume(AbsState& s, const Stmt& branch, bool taken) const;

  /// May the fault condition hold when `stmt` (the fault location) is about to run?
  bool derivable(AbsState& s, const FaultSpec& fault, const Stmt& stmt) const;

  /// Heap object the leak template's resource refers to at `stmt`, or -1.
  int leak_candidate(AbsState& s, const FaultSpec& fault, const Stmt& stmt) const;

  /// Values of the induction variables at a loop header.
  LoopRecord loop_record(AbsState& s, const Stmt& header, const std::vector<std::string>& ind) const;
  static bool unchanged(const LoopRecord& before, const LoopRecord& after);

  // Expression-level helpers (exposed for tests).
  AbsValue eval(AbsState& s, const ExprPtr& e, const std::string& func) const;
  Truth truth(AbsState& s, const ExprPtr& e, const std::string& func) const;
  bool refine(AbsState& s, const ExprPtr& e, bool polarity, const std::string& func) const;
  /// strlen of the string at a pointer value; nullopt when not tracked.
  std::optional<Interval> strlen_of(const AbsState& s, const AbsValue& p) const;

 private:
  VarKey resolve(const std::string& name, const std::string& func) const;
  int lookup(AbsState& s, const std::string& name, const std::string& func) const;
  int materialize(AbsState& s, const VarKey& key) const;
  int new_object(AbsState& s, const Type& t) const;
  void init_from_decl(AbsState& s, int obj, const Stmt& decl, bool global) const;
  void bump(AbsState& s, const ExprPtr& base, const std::string& func) const;
  void touch(AbsState& s, const AbsValue& v) const;
  AbsValue read_cell(const AbsState& s, int obj, const Interval& off) const;
  void write_cell(AbsState& s, int obj, const Interval& off, const AbsValue& v) const;
  void write_string(AbsState& s, const AbsValue& dst, const AbsValue& src, bool append) const;
  AbsValue builtin(AbsState& s, const Expr& call, const std::string& func) const;
  void assign(AbsState& s, const ExprPtr& target, const AbsValue& v, const std::string& func) const;
  bool refine_compare(AbsState& s, const Expr& lhs, const std::string& op, const AbsValue& rhs, bool polarity,
                      const std::string& func) const;

  const Program& program_;
  std::map<std::string, std::vector<std::string>> locals_;   // function -> params and declared names
  std::map<VarKey, Type> types_;
  std::map<VarKey, const Stmt*> decls_;
};

}  // namespace sigforge

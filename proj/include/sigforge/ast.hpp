#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sigforge {

using StmtId = int;
inline constexpr StmtId kNoStmt = 0;

struct SourceLoc {
  std::string file;
  int line = 0;
  int col = 0;
  StmtId stmt_id = kNoStmt;

  bool operator==(const SourceLoc&) const = default;
};

enum class BaseType { Void, Int, Char };

struct Type {
  BaseType base = BaseType::Int;
  int pointer = 0;                     // levels of '*'
  std::optional<std::int64_t> array;   // element count for T[N]

  bool is_pointer() const { return pointer > 0; }
  bool is_array() const { return array.has_value(); }
  bool is_scalar() const { return !is_pointer() && !is_array(); }
  /// Number of storage cells a variable of this type occupies.
  std::int64_t cells() const { return array ? *array : 1; }
  /// Type of an element when indexing or dereferencing.
  Type element() const;
  std::string spelling() const;   // "char*", "int" (without array suffix)

  bool operator==(const Type&) const = default;
};

enum class ExprKind { IntLit, CharLit, StrLit, Ident, Index, Unary, Binary, Call };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  ExprKind kind = ExprKind::IntLit;
  std::int64_t value = 0;   // IntLit / CharLit
  std::string text;         // StrLit contents, Ident / Call name, Unary / Binary operator
  std::vector<ExprPtr> args;
  int line = 0;
  int col = 0;

  static ExprPtr int_lit(std::int64_t v);
  static ExprPtr ident(std::string name);
  static ExprPtr call(std::string name, std::vector<ExprPtr> args);
  static ExprPtr binary(std::string op, ExprPtr lhs, ExprPtr rhs);
  static ExprPtr unary(std::string op, ExprPtr operand);
};

enum class StmtKind { VarDecl, Assign, ExprStmt, If, While, Return, Break, Continue, Block, Assert };

const char* to_string(StmtKind kind);

struct Stmt {
  StmtKind kind = StmtKind::Block;
  SourceLoc loc;

  // VarDecl
  Type type;
  std::string name;
  ExprPtr init;   // VarDecl initializer, Return value (may be null)

  // Assign: target = value; ExprStmt / Assert / If / While: value is the expression or condition
  ExprPtr target;
  ExprPtr value;

  std::vector<Stmt> body;        // Block contents, If then-branch, While body
  std::vector<Stmt> else_body;   // If else-branch
  bool has_else = false;
  std::vector<Stmt> latch;       // While: statements run at the end of every iteration (desugared `for` step)
  bool from_for = false;         // Block produced by `for` desugaring
};

struct Param {
  Type type;
  std::string name;
  bool operator==(const Param&) const = default;
};

struct FuncDef {
  Type ret;
  std::string name;
  std::vector<Param> params;
  Stmt body;   // Block
  SourceLoc loc;
};

struct Program {
  std::string file;
  std::string source_text;
  std::vector<Stmt> globals;   // VarDecl statements
  std::vector<FuncDef> functions;

  const FuncDef* find_function(const std::string& name) const;
  FuncDef* find_function(const std::string& name);
  bool has_main() const { return find_function("main") != nullptr; }

  /// Every statement with its id (including blocks and globals), in parse order.
  std::vector<const Stmt*> all_statements() const;
  const Stmt* find_stmt(StmtId id) const;
  Stmt* find_stmt(StmtId id);
  /// Name of the function containing the statement, "" for globals.
  std::string function_of(StmtId id) const;
  /// Non-block statements that start on `line`.
  std::vector<const Stmt*> statements_on_line(int line) const;
  StmtId max_stmt_id() const;
};

/// Variable identity after name resolution: function-scoped locals and params,
/// or globals (empty function).
struct VarKey {
  std::string func;
  std::string name;

  bool is_global() const { return func.empty(); }
  std::string str() const { return func.empty() ? name : func + "::" + name; }
  auto operator<=>(const VarKey&) const = default;
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(int line, int col, std::string expected);
  int line;
  int col;
  std::string expected;
};

/// Static checks beyond syntax. Throws Error.
class CheckError : public Error {
 public:
  using Error::Error;
};

bool is_builtin(const std::string& name);

// Visitors over statement trees. Callbacks receive every nested statement (pre-order).
void for_each_stmt(const std::vector<Stmt>& stmts, const std::function<void(const Stmt&)>& fn);
void for_each_stmt(std::vector<Stmt>& stmts, const std::function<void(Stmt&)>& fn);
void for_each_expr(const ExprPtr& e, const std::function<void(const Expr&)>& fn);
/// Expressions directly owned by a statement (not its children).
std::vector<ExprPtr> stmt_exprs(const Stmt& s);

bool structurally_equal(const Expr& a, const Expr& b);
bool structurally_equal(const Stmt& a, const Stmt& b);
bool structurally_equal(const Program& a, const Program& b);

/// Name-resolution helpers.
struct Scope {
  const Program* program = nullptr;
  const FuncDef* func = nullptr;

  VarKey resolve(const std::string& name) const;
  std::optional<Type> type_of(const VarKey& key) const;
  /// The statement that declares `key` (global or local VarDecl), if any.
  const Stmt* declaration(const VarKey& key) const;
};

/// Top-level user-function call of a statement (`f(..);`, `x = f(..);`, `T x = f(..);`).
const Expr* user_call(const Program& program, const Stmt& s);

/// Variables read (resp. any identifier mentioned) by an expression.
void collect_idents(const ExprPtr& e, std::vector<std::string>& out);

}  // namespace sigforge

#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sigforge/ast.hpp"

namespace sigforge {

/// Parses MiniC text. Statement ids are assigned in parse order starting at 1,
/// so identical text always yields identical ids. `for` loops are desugared to
/// `while` (with the step kept as the loop latch).
Program parse(std::string_view source, std::string file = "<input>");

/// Parses a single statement (used by patches). Ids start at `first_id`.
Stmt parse_statement(std::string_view text, StmtId first_id = 1);
ExprPtr parse_expression(std::string_view text);

struct EmittedLine {
  int line;
  const Stmt* stmt;
};

/// Pretty-prints a program, one statement per line. When `lines` is given it
/// receives the output line of every non-block statement, in emission order.
std::string emit_source(const Program& program, std::vector<EmittedLine>* lines = nullptr);
std::string emit_expr(const Expr& e);
std::string emit_type_decl(const Type& t, const std::string& name);
/// Single-line rendering of one statement (compound statements render their header).
std::string stmt_text(const Stmt& s);

/// Semantic checks: duplicate functions, builtin arity, calls to user functions
/// only in `f(..);`, `x = f(..);` or `T x = f(..);` position. With `strict`,
/// unresolved identifiers and a missing `main` are errors too.
void check_program(const Program& program, bool strict = true);

/// Resolves `file:line` or a bare line number to the single statement on that line.
StmtId resolve_line(const Program& program, int line);
int parse_loc_arg(const std::string& loc);   // "file.mc:12" -> 12

}  // namespace sigforge

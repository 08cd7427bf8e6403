#include <map>
#include <set>
#include <sstream>

#include "sigforge/frontend.hpp"

namespace sigforge {
namespace {

int expr_prec(const Expr& e) {
  static const std::map<std::string, int> kPrec = {
      {"||", 1}, {"&&", 2}, {"==", 3}, {"!=", 3}, {"<", 4}, {"<=", 4}, {">", 4}, {">=", 4},
      {"+", 5},  {"-", 5},  {"*", 6},  {"/", 6},  {"%", 6}};
  switch (e.kind) {
    case ExprKind::Binary: return kPrec.at(e.text);
    case ExprKind::Unary: return 7;
    case ExprKind::Index: return 8;
    case ExprKind::IntLit: return e.value < 0 ? 7 : 9;
    default: return 9;
  }
}

std::string escape(const std::string& s, char quote) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\0': out += "\\0"; break;
      case '\\': out += "\\\\"; break;
      default:
        if (c == quote) out += '\\';
        out += c;
    }
  }
  return out;
}

std::string wrap(const Expr& e, bool paren) {
  std::string s = emit_expr(e);
  return paren ? "(" + s + ")" : s;
}

class Emitter {
 public:
  explicit Emitter(std::vector<EmittedLine>* lines) : lines_(lines) {}

  void program(const Program& p) {
    for (const auto& g : p.globals) stmt(g);
    for (const auto& f : p.functions) {
      if (line_ > 1) blank();
      std::string head = f.ret.spelling() + " " + f.name + "(";
      for (std::size_t i = 0; i < f.params.size(); ++i) {
        if (i) head += ", ";
        head += emit_type_decl(f.params[i].type, f.params[i].name);
      }
      head += ") {";
      put(head, nullptr);
      ++indent_;
      for (const auto& s : f.body.body) stmt(s);
      --indent_;
      put("}", nullptr);
    }
  }

  std::string text() const { return out_.str(); }

 private:
  void blank() {
    out_ << "\n";
    ++line_;
  }

  void put(const std::string& text, const Stmt* s) {
    if (s && lines_) lines_->push_back({line_, s});
    out_ << std::string(indent_ * 2, ' ') << text << "\n";
    ++line_;
  }

  void body(const std::vector<Stmt>& blockish) {
    ++indent_;
    for (const auto& b : blockish) {
      if (b.kind == StmtKind::Block) {
        for (const auto& s : b.body) stmt(s);
      } else {
        stmt(b);
      }
    }
    --indent_;
  }

  void stmt(const Stmt& s) {
    switch (s.kind) {
      case StmtKind::Block:
        put("{", nullptr);
        body({s});
        put("}", nullptr);
        return;
      case StmtKind::If:
        put(stmt_text(s) + " {", &s);
        body(s.body);
        if (s.has_else) {
          put("} else {", nullptr);
          body(s.else_body);
        }
        put("}", nullptr);
        return;
      case StmtKind::While:
        put(stmt_text(s) + " {", &s);
        body(s.body);
        put("}", nullptr);
        return;
      default:
        put(stmt_text(s), &s);
    }
  }

  std::vector<EmittedLine>* lines_;
  std::ostringstream out_;
  int indent_ = 0;
  int line_ = 1;
};

std::string simple_text(const Stmt& s) {
  std::string t = stmt_text(s);
  if (!t.empty() && t.back() == ';') t.pop_back();
  return t;
}

}  // namespace

std::string emit_expr(const Expr& e) {
  switch (e.kind) {
    case ExprKind::IntLit: return std::to_string(e.value);
    case ExprKind::CharLit: return "'" + escape(std::string(1, static_cast<char>(e.value)), '\'') + "'";
    case ExprKind::StrLit: return "\"" + escape(e.text, '"') + "\"";
    case ExprKind::Ident: return e.text;
    case ExprKind::Index: return wrap(*e.args[0], expr_prec(*e.args[0]) < 8) + "[" + emit_expr(*e.args[1]) + "]";
    case ExprKind::Unary: {
      // "- -x" would lex as "--"
      const Expr& a = *e.args[0];
      bool paren = expr_prec(a) < 7 || (a.kind == ExprKind::Unary && a.text == e.text);
      return e.text + wrap(a, paren);
    }
    case ExprKind::Binary: {
      int p = expr_prec(e);
      return wrap(*e.args[0], expr_prec(*e.args[0]) < p) + " " + e.text + " " +
             wrap(*e.args[1], expr_prec(*e.args[1]) <= p);
    }
    case ExprKind::Call: {
      std::string s = e.text + "(";
      for (std::size_t i = 0; i < e.args.size(); ++i) {
        if (i) s += ", ";
        s += emit_expr(*e.args[i]);
      }
      return s + ")";
    }
  }
  return "";
}

std::string emit_type_decl(const Type& t, const std::string& name) {
  std::string s = t.spelling() + " " + name;
  if (t.array) s += "[" + std::to_string(*t.array) + "]";
  return s;
}

std::string stmt_text(const Stmt& s) {
  switch (s.kind) {
    case StmtKind::VarDecl: {
      std::string t = emit_type_decl(s.type, s.name);
      if (s.init) t += " = " + emit_expr(*s.init);
      return t + ";";
    }
    case StmtKind::Assign: return emit_expr(*s.target) + " = " + emit_expr(*s.value) + ";";
    case StmtKind::ExprStmt: return emit_expr(*s.value) + ";";
    case StmtKind::If: return "if (" + emit_expr(*s.value) + ")";
    case StmtKind::While:
      if (!s.latch.empty()) return "for (; " + emit_expr(*s.value) + "; " + simple_text(s.latch.front()) + ")";
      return "while (" + emit_expr(*s.value) + ")";
    case StmtKind::Return: return s.init ? "return " + emit_expr(*s.init) + ";" : "return;";
    case StmtKind::Break: return "break;";
    case StmtKind::Continue: return "continue;";
    case StmtKind::Assert: return "assert(" + emit_expr(*s.value) + ");";
    case StmtKind::Block: return "{ }";
  }
  return "";
}

std::string emit_source(const Program& program, std::vector<EmittedLine>* lines) {
  Emitter em(lines);
  em.program(program);
  return em.text();
}

namespace {

const std::map<std::string, std::size_t> kArity = {{"malloc", 1}, {"free", 1},      {"strcpy", 2}, {"strcat", 2},
                                                   {"strlen", 1}, {"strcmp", 2},    {"read_line", 2},
                                                   {"print", 1},  {"assert", 1},    {"exit", 1}};

void check_expr(const Program& p, const Scope& scope, const ExprPtr& e, bool top_call, bool strict) {
  if (!e) return;
  if (e->kind == ExprKind::Call) {
    auto it = kArity.find(e->text);
    if (it != kArity.end()) {
      if (e->args.size() != it->second) {
        throw CheckError(std::to_string(e->line) + ": " + e->text + " expects " + std::to_string(it->second) +
                         " argument(s)");
      }
    } else if (const FuncDef* f = p.find_function(e->text)) {
      if (e->args.size() != f->params.size()) {
        throw CheckError(std::to_string(e->line) + ": wrong argument count for " + e->text);
      }
      if (!top_call) {
        throw CheckError(std::to_string(e->line) + ": call to " + e->text +
                         " must be a statement, assignment or initializer");
      }
    } else if (strict) {
      throw CheckError(std::to_string(e->line) + ": unknown function " + e->text);
    }
    for (const auto& a : e->args) check_expr(p, scope, a, false, strict);
    return;
  }
  if (e->kind == ExprKind::Ident && strict) {
    VarKey k = scope.resolve(e->text);
    if (!scope.type_of(k)) throw CheckError(std::to_string(e->line) + ": unresolved identifier " + e->text);
  }
  for (const auto& a : e->args) check_expr(p, scope, a, false, strict);
}

}  // namespace

void check_program(const Program& program, bool strict) {
  std::set<std::string> names;
  for (const auto& f : program.functions) {
    if (!names.insert(f.name).second) throw CheckError("duplicate function " + f.name);
    if (is_builtin(f.name)) throw CheckError("function shadows builtin " + f.name);
  }
  if (strict && !program.has_main()) throw CheckError("program has no main function");
  Scope global{&program, nullptr};
  for (const auto& g : program.globals) check_expr(program, global, g.init, false, strict);
  for (const auto& f : program.functions) {
    Scope scope{&program, &f};
    for_each_stmt(f.body.body, [&](const Stmt& s) {
      bool top = s.kind == StmtKind::ExprStmt || s.kind == StmtKind::Assign || s.kind == StmtKind::VarDecl;
      check_expr(program, scope, s.init, top && s.kind == StmtKind::VarDecl, strict);
      check_expr(program, scope, s.target, false, strict);
      check_expr(program, scope, s.value, top, strict);
    });
  }
}

StmtId resolve_line(const Program& program, int line) {
  auto stmts = program.statements_on_line(line);
  if (stmts.empty()) throw Error("no statement on line " + std::to_string(line));
  if (stmts.size() > 1) throw Error("line " + std::to_string(line) + " holds multiple statements");
  return stmts.front()->loc.stmt_id;
}

int parse_loc_arg(const std::string& loc) {
  auto colon = loc.rfind(':');
  std::string num = colon == std::string::npos ? loc : loc.substr(colon + 1);
  try {
    std::size_t used = 0;
    int line = std::stoi(num, &used);
    if (used != num.size() || line <= 0) throw Error("");
    return line;
  } catch (const std::exception&) {
    throw Error("bad location '" + loc + "', expected file:line");
  }
}

}  // namespace sigforge

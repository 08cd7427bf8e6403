#include "sigforge/ast.hpp"

#include <algorithm>
#include <set>

namespace sigforge {

Type Type::element() const {
  Type t = *this;
  if (t.array) {
    t.array.reset();
  } else if (t.pointer > 0) {
    --t.pointer;
  }
  return t;
}

std::string Type::spelling() const {
  std::string s = base == BaseType::Void ? "void" : base == BaseType::Int ? "int" : "char";
  s.append(pointer, '*');
  return s;
}

ExprPtr Expr::int_lit(std::int64_t v) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::IntLit;
  e->value = v;
  return e;
}

ExprPtr Expr::ident(std::string name) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Ident;
  e->text = std::move(name);
  return e;
}

ExprPtr Expr::call(std::string name, std::vector<ExprPtr> args) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Call;
  e->text = std::move(name);
  e->args = std::move(args);
  return e;
}

ExprPtr Expr::binary(std::string op, ExprPtr lhs, ExprPtr rhs) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Binary;
  e->text = std::move(op);
  e->args = {std::move(lhs), std::move(rhs)};
  return e;
}

ExprPtr Expr::unary(std::string op, ExprPtr operand) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Unary;
  e->text = std::move(op);
  e->args = {std::move(operand)};
  return e;
}

const char* to_string(StmtKind kind) {
  switch (kind) {
    case StmtKind::VarDecl: return "VarDecl";
    case StmtKind::Assign: return "Assign";
    case StmtKind::ExprStmt: return "ExprStmt";
    case StmtKind::If: return "If";
    case StmtKind::While: return "While";
    case StmtKind::Return: return "Return";
    case StmtKind::Break: return "Break";
    case StmtKind::Continue: return "Continue";
    case StmtKind::Block: return "Block";
    case StmtKind::Assert: return "Assert";
  }
  return "?";
}

ParseError::ParseError(int l, int c, std::string exp)
    : Error("parse error at " + std::to_string(l) + ":" + std::to_string(c) + ": expected " + exp),
      line(l),
      col(c),
      expected(std::move(exp)) {}

bool is_builtin(const std::string& name) {
  static const std::set<std::string> kBuiltins = {"malloc", "free",      "strcpy", "strcat", "strlen",
                                                  "strcmp", "read_line", "print",  "assert", "exit"};
  return kBuiltins.count(name) > 0;
}

namespace {

template <typename S, typename F>
void walk(S& stmts, const F& fn) {
  for (auto& s : stmts) {
    fn(s);
    walk(s.body, fn);
    walk(s.else_body, fn);
    walk(s.latch, fn);
  }
}

}  // namespace

void for_each_stmt(const std::vector<Stmt>& stmts, const std::function<void(const Stmt&)>& fn) {
  walk(stmts, fn);
}

void for_each_stmt(std::vector<Stmt>& stmts, const std::function<void(Stmt&)>& fn) { walk(stmts, fn); }

void for_each_expr(const ExprPtr& e, const std::function<void(const Expr&)>& fn) {
  if (!e) return;
  fn(*e);
  for (const auto& a : e->args) for_each_expr(a, fn);
}

std::vector<ExprPtr> stmt_exprs(const Stmt& s) {
  std::vector<ExprPtr> out;
  for (const auto* e : {&s.init, &s.target, &s.value}) {
    if (*e) out.push_back(*e);
  }
  return out;
}

bool structurally_equal(const Expr& a, const Expr& b) {
  if (a.kind != b.kind || a.value != b.value || a.text != b.text || a.args.size() != b.args.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.args.size(); ++i) {
    if (!structurally_equal(*a.args[i], *b.args[i])) return false;
  }
  return true;
}

namespace {

bool eq_ptr(const ExprPtr& a, const ExprPtr& b) {
  if (!a || !b) return !a && !b;
  return structurally_equal(*a, *b);
}

bool eq_list(const std::vector<Stmt>& a, const std::vector<Stmt>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!structurally_equal(a[i], b[i])) return false;
  }
  return true;
}

}  // namespace

bool structurally_equal(const Stmt& a, const Stmt& b) {
  return a.kind == b.kind && a.type == b.type && a.name == b.name && eq_ptr(a.init, b.init) &&
         eq_ptr(a.target, b.target) && eq_ptr(a.value, b.value) && a.has_else == b.has_else &&
         eq_list(a.body, b.body) && eq_list(a.else_body, b.else_body) && eq_list(a.latch, b.latch);
}

bool structurally_equal(const Program& a, const Program& b) {
  if (!eq_list(a.globals, b.globals) || a.functions.size() != b.functions.size()) return false;
  for (std::size_t i = 0; i < a.functions.size(); ++i) {
    const auto& fa = a.functions[i];
    const auto& fb = b.functions[i];
    if (fa.name != fb.name || !(fa.ret == fb.ret) || fa.params != fb.params ||
        !structurally_equal(fa.body, fb.body)) {
      return false;
    }
  }
  return true;
}

const FuncDef* Program::find_function(const std::string& name) const {
  for (const auto& f : functions) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

FuncDef* Program::find_function(const std::string& name) {
  for (auto& f : functions) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

std::vector<const Stmt*> Program::all_statements() const {
  std::vector<const Stmt*> out;
  for_each_stmt(globals, [&](const Stmt& s) { out.push_back(&s); });
  for (const auto& f : functions) {
    out.push_back(&f.body);
    for_each_stmt(f.body.body, [&](const Stmt& s) { out.push_back(&s); });
  }
  std::sort(out.begin(), out.end(),
            [](const Stmt* a, const Stmt* b) { return a->loc.stmt_id < b->loc.stmt_id; });
  return out;
}

const Stmt* Program::find_stmt(StmtId id) const {
  return const_cast<Program*>(this)->find_stmt(id);
}

Stmt* Program::find_stmt(StmtId id) {
  Stmt* found = nullptr;
  auto visit = [&](Stmt& s) {
    if (s.loc.stmt_id == id) found = &s;
  };
  for_each_stmt(globals, visit);
  for (auto& f : functions) {
    visit(f.body);
    for_each_stmt(f.body.body, visit);
  }
  return found;
}

std::string Program::function_of(StmtId id) const {
  for (const auto& f : functions) {
    bool hit = f.body.loc.stmt_id == id;
    for_each_stmt(f.body.body, [&](const Stmt& s) { hit = hit || s.loc.stmt_id == id; });
    if (hit) return f.name;
  }
  return "";
}

std::vector<const Stmt*> Program::statements_on_line(int line) const {
  std::vector<const Stmt*> out;
  for (const auto* s : all_statements()) {
    if (s->kind != StmtKind::Block && s->loc.line == line) out.push_back(s);
  }
  return out;
}

StmtId Program::max_stmt_id() const {
  StmtId m = 0;
  for (const auto* s : all_statements()) m = std::max(m, s->loc.stmt_id);
  return m;
}

VarKey Scope::resolve(const std::string& name) const {
  if (func) {
    for (const auto& p : func->params) {
      if (p.name == name) return {func->name, name};
    }
    bool local = false;
    for_each_stmt(func->body.body, [&](const Stmt& s) {
      if (s.kind == StmtKind::VarDecl && s.name == name) local = true;
    });
    if (local) return {func->name, name};
  }
  return {"", name};
}

std::optional<Type> Scope::type_of(const VarKey& key) const {
  if (!key.is_global()) {
    const FuncDef* f = program->find_function(key.func);
    if (!f) return std::nullopt;
    for (const auto& p : f->params) {
      if (p.name == key.name) return p.type;
    }
  }
  if (const Stmt* d = declaration(key)) return d->type;
  return std::nullopt;
}

const Stmt* Scope::declaration(const VarKey& key) const {
  const Stmt* found = nullptr;
  auto visit = [&](const Stmt& s) {
    if (!found && s.kind == StmtKind::VarDecl && s.name == key.name) found = &s;
  };
  if (key.is_global()) {
    for_each_stmt(program->globals, visit);
  } else if (const FuncDef* f = program->find_function(key.func)) {
    for_each_stmt(f->body.body, visit);
  }
  return found;
}

const Expr* user_call(const Program& program, const Stmt& s) {
  const ExprPtr* e = nullptr;
  if (s.kind == StmtKind::ExprStmt || s.kind == StmtKind::Assign) e = &s.value;
  if (s.kind == StmtKind::VarDecl) e = &s.init;
  if (!e || !*e || (*e)->kind != ExprKind::Call) return nullptr;
  if (is_builtin((*e)->text) || !program.find_function((*e)->text)) return nullptr;
  return e->get();
}

void collect_idents(const ExprPtr& e, std::vector<std::string>& out) {
  for_each_expr(e, [&](const Expr& x) {
    if (x.kind == ExprKind::Ident && std::find(out.begin(), out.end(), x.text) == out.end()) {
      out.push_back(x.text);
    }
  });
}

}  // namespace sigforge

#include "sigforge/fault.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "sigforge/frontend.hpp"

namespace sigforge {

std::string to_string(FaultType t) {
  switch (t) {
    case FaultType::BufferOverflow: return "BufferOverflow";
    case FaultType::NullDeref: return "NullDeref";
    case FaultType::DoubleFree: return "DoubleFree";
    case FaultType::ResourceLeak: return "ResourceLeak";
    case FaultType::InfiniteLoop: return "InfiniteLoop";
    case FaultType::AssertViolation: return "AssertViolation";
  }
  return "?";
}

FaultType parse_fault_type(const std::string& s) {
  std::string k;
  for (char c : s) {
    if (c != '-' && c != '_') k += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  static const std::map<std::string, FaultType> kNames = {
      {"bufferoverflow", FaultType::BufferOverflow}, {"overflow", FaultType::BufferOverflow},
      {"nullderef", FaultType::NullDeref},           {"null", FaultType::NullDeref},
      {"doublefree", FaultType::DoubleFree},         {"resourceleak", FaultType::ResourceLeak},
      {"leak", FaultType::ResourceLeak},             {"infiniteloop", FaultType::InfiniteLoop},
      {"loop", FaultType::InfiniteLoop},             {"assertviolation", FaultType::AssertViolation},
      {"assert", FaultType::AssertViolation}};
  auto it = kNames.find(k);
  if (it == kNames.end()) throw Error("unknown fault type '" + s + "'");
  return it->second;
}

std::vector<std::string> FaultCondition::entities() const {
  std::vector<std::string> out;
  for (const auto& e : {str, buf, index, ptr, r, assert_expr}) collect_idents(e, out);
  out.insert(out.end(), ind.begin(), ind.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

nlohmann::json FaultCondition::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  auto put = [&](const char* key, const ExprPtr& e) {
    if (e) j[key] = emit_expr(*e);
  };
  switch (type) {
    case FaultType::BufferOverflow:
      put("str", str);
      put("buf", buf);
      put("index", index);
      if (append) j["append"] = true;
      j["predicate"] = index ? "index >= size(buf)" : append ? "len(buf) + len(str) > size(buf)" : "len(str) > size(buf)";
      break;
    case FaultType::NullDeref:
      put("ptr", ptr);
      j["predicate"] = "value(ptr) == NULL";
      break;
    case FaultType::DoubleFree:
      put("ptr", ptr);
      j["predicate"] = "count_free(ptr) > 1 && value(ptr) != NULL";
      break;
    case FaultType::ResourceLeak:
      put("r", r);
      j["predicate"] = "N_alloc(r) > N_release(r)";
      break;
    case FaultType::InfiniteLoop:
      j["ind"] = ind;
      j["predicate"] = "value(ind) == value'(ind)";
      break;
    case FaultType::AssertViolation:
      put("assert_expr", assert_expr);
      j["predicate"] = "!assert_expr";
      break;
  }
  return j;
}

nlohmann::json FaultSpec::to_json() const {
  return {{"type", to_string(fault_type)},
          {"loc", {{"file", fault_loc.file}, {"line", fault_loc.line}, {"stmt_id", fault_loc.stmt_id}}},
          {"condition", condition.to_json()}};
}

namespace {

const std::vector<std::string> kStringBuiltins = {"strcpy", "strcat", "strlen", "strcmp", "read_line", "print"};

// Calls in the statement's own expressions, pre-order.
std::vector<const Expr*> calls_of(const Stmt& s, const std::string& name) {
  std::vector<const Expr*> out;
  for (const auto& e : stmt_exprs(s)) {
    for_each_expr(e, [&](const Expr& x) {
      if (x.kind == ExprKind::Call && x.text == name) out.push_back(&x);
    });
  }
  return out;
}

std::optional<Type> type_of_expr(const Scope& scope, const Expr& e) {
  if (e.kind == ExprKind::Ident) return scope.type_of(scope.resolve(e.text));
  if (e.kind == ExprKind::StrLit) return Type{BaseType::Char, 1, std::nullopt};
  return std::nullopt;
}

bool pointer_like(const Scope& scope, const Expr& e) {
  auto t = type_of_expr(scope, e);
  return t && t->is_pointer() && !t->is_array();
}

Scope scope_for(const Program& p, const Stmt& s) {
  std::string f = p.function_of(s.loc.stmt_id);
  return Scope{&p, f.empty() ? nullptr : p.find_function(f)};
}

std::optional<FaultCondition> try_template(const Program& p, const Stmt& s, FaultType type) {
  FaultCondition c;
  c.type = type;
  Scope scope = scope_for(p, s);
  switch (type) {
    case FaultType::AssertViolation:
      if (s.kind != StmtKind::Assert) return std::nullopt;
      c.assert_expr = s.value;
      return c;
    case FaultType::DoubleFree: {
      auto frees = calls_of(s, "free");
      if (frees.empty()) return std::nullopt;
      c.ptr = frees.front()->args.at(0);
      return c;
    }
    case FaultType::BufferOverflow: {
      if (s.kind == StmtKind::If || s.kind == StmtKind::While) return std::nullopt;
      for (const char* fn : {"strcpy", "strcat"}) {
        auto calls = calls_of(s, fn);
        if (!calls.empty()) {
          c.buf = calls.front()->args.at(0);
          c.str = calls.front()->args.at(1);
          c.append = std::string(fn) == "strcat";
          return c;
        }
      }
      auto reads = calls_of(s, "read_line");
      if (!reads.empty()) {
        c.buf = reads.front()->args.at(0);
        c.str = reads.front()->args.at(1);
        return c;
      }
      // indexed write first, then any indexed read
      const Expr* idx = nullptr;
      if (s.kind == StmtKind::Assign && s.target->kind == ExprKind::Index) idx = s.target.get();
      if (!idx) {
        for (const auto& e : stmt_exprs(s)) {
          for_each_expr(e, [&](const Expr& x) {
            if (!idx && x.kind == ExprKind::Index) idx = &x;
          });
        }
      }
      if (!idx) return std::nullopt;
      c.buf = idx->args.at(0);
      c.index = idx->args.at(1);
      return c;
    }
    case FaultType::NullDeref: {
      const Expr* found = nullptr;
      auto visit = [&](const Expr& x) {
        if (found) return;
        if (x.kind == ExprKind::Unary && x.text == "*") {
          found = x.args[0].get();
        } else if (x.kind == ExprKind::Index && pointer_like(scope, *x.args[0])) {
          found = x.args[0].get();
        } else if (x.kind == ExprKind::Call &&
                   std::find(kStringBuiltins.begin(), kStringBuiltins.end(), x.text) != kStringBuiltins.end()) {
          for (const auto& a : x.args) {
            if (!found && a->kind == ExprKind::Ident && pointer_like(scope, *a)) found = a.get();
          }
        }
      };
      for (const auto& e : stmt_exprs(s)) for_each_expr(e, visit);
      if (!found) return std::nullopt;
      // share the node with the AST so printing keeps the original text
      for (const auto& e : stmt_exprs(s)) {
        for_each_expr(e, [&](const Expr& x) {
          for (const auto& a : x.args) {
            if (a.get() == found) c.ptr = a;
          }
        });
      }
      if (!c.ptr) return std::nullopt;
      return c;
    }
    case FaultType::InfiniteLoop: {
      if (s.kind != StmtKind::While) return std::nullopt;
      std::vector<std::string> cond_vars;
      collect_idents(s.value, cond_vars);
      std::sort(cond_vars.begin(), cond_vars.end());
      cond_vars.erase(std::unique(cond_vars.begin(), cond_vars.end()), cond_vars.end());
      std::vector<std::string> assigned;
      auto note_target = [&](const ExprPtr& t) {
        if (!t) return;
        const Expr* base = t.get();
        while (base->kind == ExprKind::Index || (base->kind == ExprKind::Unary && base->text == "*")) {
          base = base->args[0].get();
        }
        if (base->kind == ExprKind::Ident) assigned.push_back(base->text);
      };
      auto scan = [&](const Stmt& b) {
        if (b.kind == StmtKind::Assign) note_target(b.target);
        if (b.kind == StmtKind::VarDecl) assigned.push_back(b.name);
        for (const auto& e : stmt_exprs(b)) {
          for_each_expr(e, [&](const Expr& x) {
            if (x.kind == ExprKind::Call && !x.args.empty() &&
                (x.text == "strcpy" || x.text == "strcat" || x.text == "read_line")) {
              note_target(x.args[0]);
            }
          });
        }
      };
      for_each_stmt(s.body, scan);
      for_each_stmt(s.latch, scan);
      for (const auto& v : cond_vars) {
        if (std::find(assigned.begin(), assigned.end(), v) != assigned.end()) c.ind.push_back(v);
      }
      if (c.ind.empty()) c.ind = cond_vars;
      return c;
    }
    case FaultType::ResourceLeak: {
      auto holders = malloc_holders(p);
      std::vector<std::string> ids;
      for (const auto& e : stmt_exprs(s)) collect_idents(e, ids);
      if (s.kind == StmtKind::VarDecl) ids.insert(ids.begin(), s.name);
      for (const auto& name : ids) {
        VarKey k = scope.resolve(name);
        if (std::find(holders.begin(), holders.end(), k) != holders.end()) {
          c.r = Expr::ident(name);
          return c;
        }
      }
      return std::nullopt;
    }
  }
  return std::nullopt;
}

constexpr FaultType kPriority[] = {FaultType::AssertViolation, FaultType::DoubleFree,   FaultType::BufferOverflow,
                                   FaultType::NullDeref,       FaultType::InfiniteLoop, FaultType::ResourceLeak};

}  // namespace

std::vector<VarKey> malloc_holders(const Program& program) {
  std::vector<VarKey> out;
  auto is_malloc = [](const ExprPtr& e) { return e && e->kind == ExprKind::Call && e->text == "malloc"; };
  auto scan = [&](const Scope& scope, const Stmt& s) {
    if (s.kind == StmtKind::VarDecl && is_malloc(s.init)) out.push_back(scope.resolve(s.name));
    if (s.kind == StmtKind::Assign && is_malloc(s.value) && s.target->kind == ExprKind::Ident) {
      out.push_back(scope.resolve(s.target->text));
    }
  };
  Scope global{&program, nullptr};
  for (const auto& g : program.globals) scan(global, g);
  for (const auto& f : program.functions) {
    Scope scope{&program, &f};
    for_each_stmt(f.body.body, [&](const Stmt& s) { scan(scope, s); });
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<FaultType> matching_templates(const Program& program, const Stmt& stmt) {
  std::vector<FaultType> out;
  if (stmt.kind == StmtKind::Block) return out;
  for (FaultType t : kPriority) {
    if (try_template(program, stmt, t)) out.push_back(t);
  }
  return out;
}

FaultCondition instantiate(const Program& program, const Stmt& stmt, FaultType type) {
  auto c = try_template(program, stmt, type);
  if (!c) {
    throw NoTemplateMatch("line " + std::to_string(stmt.loc.line) + ": statement '" + stmt_text(stmt) +
                          "' does not match the " + to_string(type) + " template");
  }
  return *c;
}

FaultSpec analyze_fault(const Program& program, const SourceLoc& loc, std::optional<FaultType> hint) {
  const Stmt* stmt = nullptr;
  if (loc.stmt_id != kNoStmt) {
    stmt = program.find_stmt(loc.stmt_id);
    if (!stmt) throw AmbiguousLocation("no statement with id " + std::to_string(loc.stmt_id));
  } else {
    auto stmts = program.statements_on_line(loc.line);
    if (stmts.size() != 1) {
      throw AmbiguousLocation("line " + std::to_string(loc.line) + " holds " + std::to_string(stmts.size()) +
                              " statements");
    }
    stmt = stmts.front();
  }
  if (program.function_of(stmt->loc.stmt_id).empty()) {
    throw NoTemplateMatch("line " + std::to_string(stmt->loc.line) + " is a global declaration");
  }
  FaultSpec spec;
  spec.fault_loc = stmt->loc;
  spec.fault_loc.file = loc.file.empty() ? program.file : loc.file;
  if (hint) {
    spec.fault_type = *hint;
    spec.condition = instantiate(program, *stmt, *hint);
    return spec;
  }
  auto types = matching_templates(program, *stmt);
  if (types.empty()) {
    throw NoTemplateMatch("line " + std::to_string(stmt->loc.line) + ": '" + stmt_text(*stmt) +
                          "' matches no fault template");
  }
  spec.fault_type = types.front();
  spec.condition = instantiate(program, *stmt, spec.fault_type);
  return spec;
}

}  // namespace sigforge

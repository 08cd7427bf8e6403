#include "sigforge/slice.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <numeric>

#include "sigforge/cfg.hpp"
#include "sigforge/frontend.hpp"
#include "sigforge/path.hpp"

namespace sigforge {

namespace {

struct Def {
  VarKey var;
  bool strong = false;
};

struct DefUse {
  std::vector<Def> defs;
  std::vector<VarKey> uses;
};

const Expr* root_var(const ExprPtr& e) {
  const Expr* x = e.get();
  while (x) {
    if (x->kind == ExprKind::Ident) return x;
    if (x->kind == ExprKind::Index || (x->kind == ExprKind::Unary && x->text == "*") ||
        (x->kind == ExprKind::Binary && (x->text == "+" || x->text == "-"))) {
      x = x->args[0].get();
    } else {
      return nullptr;
    }
  }
  return nullptr;
}

class Deps {
 public:
  explicit Deps(const Program& p) : prog_(p) { build_aliases(); }

  VarKey key(const std::string& name, const std::string& func) const {
    return Scope{&prog_, prog_.find_function(func)}.resolve(name);
  }

  DefUse of(StmtId id, NodeRole role) const {
    DefUse du;
    const Stmt* s = prog_.find_stmt(id);
    if (!s) return du;
    std::string func = prog_.function_of(id);
    auto use = [&](const ExprPtr& e) {
      std::vector<std::string> ids;
      collect_idents(e, ids);
      for (const auto& n : ids) du.uses.push_back(key(n, func));
    };
    auto weak = [&](const ExprPtr& e) {
      if (const Expr* r = root_var(e)) add_weak(du, key(r->text, func));
    };
    auto effects = [&](const ExprPtr& e) {
      if (!e) return;
      for_each_expr(e, [&](const Expr& x) {
        if (x.kind != ExprKind::Call || x.args.empty()) return;
        if (x.text == "strcpy" || x.text == "strcat" || x.text == "read_line" || x.text == "free") weak(x.args[0]);
      });
    };
    auto define = [&](const ExprPtr& target) {
      if (target->kind == ExprKind::Ident) {
        du.defs.push_back({key(target->text, func), true});
      } else {
        use(target);
        weak(target);
      }
    };
    const Expr* call = user_call(prog_, *s);
    if (role == NodeRole::CallBind && call) {
      for (const auto& a : call->args) use(a);
      for (const auto& p : prog_.find_function(call->text)->params) du.defs.push_back({{call->text, p.name}, true});
      return du;
    }
    if ((role == NodeRole::CallReturn || role == NodeRole::OpaqueCall) && call) {
      if (role == NodeRole::CallReturn) {
        du.uses.push_back({call->text, "$ret"});
      } else {
        for (const auto& a : call->args) use(a);
      }
      if (s->kind == StmtKind::VarDecl) du.defs.push_back({key(s->name, func), true});
      if (s->kind == StmtKind::Assign) define(s->target);
      return du;
    }
    switch (s->kind) {
      case StmtKind::VarDecl:
        use(s->init);
        effects(s->init);
        du.defs.push_back({key(s->name, func), true});
        break;
      case StmtKind::Assign:
        use(s->value);
        effects(s->value);
        define(s->target);
        break;
      case StmtKind::Return:
        if (s->init) {
          use(s->init);
          effects(s->init);
          du.defs.push_back({{func, "$ret"}, true});
        }
        break;
      case StmtKind::ExprStmt:
      case StmtKind::If:
      case StmtKind::While:
      case StmtKind::Assert:
        use(s->value);
        effects(s->value);
        break;
      default: break;
    }
    return du;
  }

 private:
  void add_weak(DefUse& du, const VarKey& k) const {
    du.defs.push_back({k, false});
    auto it = alias_.find(k);
    if (it == alias_.end()) return;
    for (const auto& [other, cls] : alias_) {
      if (cls == it->second && !(other == k)) du.defs.push_back({other, false});
    }
  }

  int find(int x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }

  int id_of(const VarKey& k) {
    auto it = ids_.find(k);
    if (it != ids_.end()) return it->second;
    int n = static_cast<int>(parent_.size());
    parent_.push_back(n);
    ids_[k] = n;
    return n;
  }

  void unite(const VarKey& a, const VarKey& b) {
    int x = find(id_of(a));
    int y = find(id_of(b));
    if (x != y) parent_[x] = y;
  }

  // Direct pointer copies (p = q, p = q + k, parameter binding) share storage.
  void build_aliases() {
    auto pointerish = [&](const VarKey& k) {
      auto t = Scope{&prog_, prog_.find_function(k.func)}.type_of(k);
      return t && (t->is_pointer() || t->is_array());
    };
    for (const Stmt* s : prog_.all_statements()) {
      std::string func = prog_.function_of(s->loc.stmt_id);
      ExprPtr src;
      std::optional<VarKey> dst;
      if (s->kind == StmtKind::VarDecl && s->init) {
        src = s->init;
        dst = key(s->name, func);
      } else if (s->kind == StmtKind::Assign && s->target->kind == ExprKind::Ident) {
        src = s->value;
        dst = key(s->target->text, func);
      }
      if (dst && pointerish(*dst)) {
        if (const Expr* r = root_var(src)) unite(*dst, key(r->text, func));
      }
      if (const Expr* call = user_call(prog_, *s)) {
        const FuncDef* callee = prog_.find_function(call->text);
        for (std::size_t i = 0; i < callee->params.size() && i < call->args.size(); ++i) {
          VarKey p{callee->name, callee->params[i].name};
          if (!pointerish(p)) continue;
          if (const Expr* r = root_var(call->args[i])) unite(p, key(r->text, func));
        }
      }
    }
    for (const auto& [k, id] : ids_) alias_[k] = find(id);
  }

  const Program& prog_;
  std::vector<int> parent_;
  std::map<VarKey, int> ids_;
  std::map<VarKey, int> alias_;
};

std::vector<std::vector<bool>> post_dominators(const Cfg& g) {
  std::size_t n = g.nodes.size();
  std::vector<std::vector<bool>> pdom(n, std::vector<bool>(n, true));
  pdom[Cfg::kExit].assign(n, false);
  pdom[Cfg::kExit][Cfg::kExit] = true;
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t v = n; v-- > 0;) {
      if (static_cast<int>(v) == Cfg::kExit) continue;
      std::vector<bool> acc(n, true);
      bool any = false;
      for (const auto& e : g.successors(static_cast<int>(v))) {
        if (e.label == EdgeLabel::Abort) continue;
        any = true;
        for (std::size_t k = 0; k < n; ++k) acc[k] = acc[k] && pdom[e.to][k];
      }
      if (!any) acc.assign(n, false);
      acc[v] = true;
      if (acc != pdom[v]) {
        pdom[v] = std::move(acc);
        changed = true;
      }
    }
  }
  return pdom;
}

StmtId resolve_criterion(const Program& program, const SourceLoc& c) {
  if (c.stmt_id != kNoStmt) {
    if (!program.find_stmt(c.stmt_id)) throw UnknownCriterion("no statement " + std::to_string(c.stmt_id));
    return c.stmt_id;
  }
  try {
    return resolve_line(program, c.line);
  } catch (const Error& e) {
    throw UnknownCriterion(e.what());
  }
}

SourceLoc loc_of(const Program& p, StmtId id) {
  SourceLoc l = p.find_stmt(id)->loc;
  l.file = p.file;
  return l;
}

}  // namespace

nlohmann::json Slice::to_json(const Program& program) const {
  nlohmann::json nodes_json = nlohmann::json::array();
  for (StmtId id : nodes) {
    const Stmt* s = program.find_stmt(id);
    nodes_json.push_back({{"stmt_id", id}, {"line", s->loc.line}, {"text", stmt_text(*s)}});
  }
  return {{"criterion", {{"file", criterion.file}, {"line", criterion.line}, {"stmt_id", criterion.stmt_id}}},
          {"kind", kind == SliceKind::Static ? "static" : "dynamic"},
          {"size", nodes.size()},
          {"nodes", nodes_json}};
}

Slice static_slice(const Program& program, const SourceLoc& criterion) {
  StmtId target = resolve_criterion(program, criterion);
  if (program.function_of(target).empty()) throw UnknownCriterion("criterion is a global declaration");
  Cfg g = inline_program(program, "main");
  std::size_t n = g.nodes.size();
  Deps deps(program);
  std::vector<DefUse> du(n);
  for (const auto& node : g.nodes) {
    if (node.stmt != kNoStmt) du[node.id] = deps.of(node.stmt, node.role);
  }

  // reaching definitions
  using Reach = std::map<VarKey, std::set<int>>;
  std::vector<Reach> in(n);
  std::vector<Reach> out(n);
  std::deque<int> work;
  for (std::size_t v = 0; v < n; ++v) work.push_back(static_cast<int>(v));
  while (!work.empty()) {
    int v = work.front();
    work.pop_front();
    Reach r;
    for (const auto& e : g.predecessors(v)) {
      for (const auto& [k, s] : out[e.from]) r[k].insert(s.begin(), s.end());
    }
    in[v] = r;
    for (const auto& d : du[v].defs) {
      if (d.strong) r[d.var].clear();
    }
    for (const auto& d : du[v].defs) r[d.var].insert(v);
    if (r != out[v]) {
      out[v] = std::move(r);
      for (const auto& e : g.successors(v)) work.push_back(e.to);
    }
  }

  auto pdom = post_dominators(g);
  std::vector<std::vector<int>> control(n);
  for (const auto& b : g.nodes) {
    if (b.kind != NodeKind::Branch) continue;
    for (const auto& e : g.successors(b.id)) {
      for (std::size_t v = 0; v < n; ++v) {
        if (static_cast<int>(v) == b.id) continue;
        if (pdom[e.to][v] && !pdom[b.id][v]) control[v].push_back(b.id);
      }
    }
  }

  std::vector<bool> seen(n, false);
  std::vector<int> stack;
  for (int v : g.nodes_for_stmt(target)) {
    seen[v] = true;
    stack.push_back(v);
  }
  if (stack.empty()) throw UnknownCriterion("criterion is unreachable from main");
  Slice sl;
  sl.criterion = loc_of(program, target);
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    sl.nodes.insert(g.node(v).stmt);
    auto push = [&](int w) {
      if (!seen[w] && g.node(w).stmt != kNoStmt) {
        seen[w] = true;
        stack.push_back(w);
      }
    };
    for (const auto& u : du[v].uses) {
      auto it = in[v].find(u);
      if (it == in[v].end()) continue;
      for (int d : it->second) push(d);
    }
    for (int b : control[v]) push(b);
  }
  return sl;
}

Slice dynamic_slice(const Program& program, const SourceLoc& criterion, const ExecOutcome& run) {
  StmtId target = resolve_criterion(program, criterion);
  const auto& trace = run.trace;
  std::size_t last = trace.size();
  for (std::size_t i = trace.size(); i-- > 0;) {
    if (trace[i] == target) {
      last = i;
      break;
    }
  }
  if (last == trace.size()) throw CriterionNotInTrace("criterion does not occur in the trace");
  Deps deps(program);
  auto cd = control_dependence(program);
  std::vector<std::vector<std::size_t>> edges(last + 1);
  std::map<VarKey, std::vector<std::size_t>> live;   // defs since the last strong one
  std::map<StmtId, std::size_t> latest;               // branch stmt -> last occurrence
  std::vector<std::size_t> calls;                     // bind occurrences of active calls
  std::vector<std::vector<std::size_t>> ctrl(last + 1);
  for (std::size_t i = 0; i <= last; ++i) {
    NodeRole role = i < run.roles.size() ? run.roles[i] : NodeRole::Plain;
    DefUse du = deps.of(trace[i], role);
    for (const auto& u : du.uses) {
      auto it = live.find(u);
      if (it != live.end()) edges[i].insert(edges[i].end(), it->second.begin(), it->second.end());
    }
    bool intra = false;
    auto c = cd.find(trace[i]);
    if (c != cd.end()) {
      for (StmtId b : c->second) {
        auto l = latest.find(b);
        if (l != latest.end()) {
          ctrl[i].push_back(l->second);
          intra = true;
        }
      }
    }
    if (role == NodeRole::CallReturn && !calls.empty()) {
      ctrl[i] = ctrl[calls.back()];
      calls.pop_back();
    } else if (!intra && !calls.empty()) {
      ctrl[i] = ctrl[calls.back()];
    }
    edges[i].insert(edges[i].end(), ctrl[i].begin(), ctrl[i].end());
    for (const auto& d : du.defs) {
      if (d.strong) live[d.var].clear();
      live[d.var].push_back(i);
    }
    const Stmt* s = program.find_stmt(trace[i]);
    if (s && (s->kind == StmtKind::If || s->kind == StmtKind::While)) latest[trace[i]] = i;
    if (role == NodeRole::CallBind) calls.push_back(i);
  }
  std::vector<bool> seen(last + 1, false);
  std::vector<std::size_t> stack{last};
  seen[last] = true;
  Slice sl;
  sl.kind = SliceKind::Dynamic;
  sl.criterion = loc_of(program, target);
  while (!stack.empty()) {
    std::size_t i = stack.back();
    stack.pop_back();
    sl.nodes.insert(trace[i]);
    for (auto j : edges[i]) {
      if (!seen[j]) {
        seen[j] = true;
        stack.push_back(j);
      }
    }
  }
  return sl;
}

namespace {

void filter(std::vector<Stmt>& stmts, const std::set<StmtId>& keep) {
  std::vector<Stmt> out;
  for (auto& s : stmts) {
    if (s.kind == StmtKind::Block) {
      filter(s.body, keep);
      if (!s.body.empty()) out.push_back(std::move(s));
      continue;
    }
    if (!keep.count(s.loc.stmt_id)) continue;
    filter(s.body, keep);
    filter(s.else_body, keep);
    filter(s.latch, keep);
    if (s.else_body.empty()) s.has_else = false;
    out.push_back(std::move(s));
  }
  stmts = std::move(out);
}

}  // namespace

Program restrict_program(const Program& program, const std::set<StmtId>& keep) {
  Program r = program;
  r.source_text.clear();
  std::vector<FuncDef> funcs;
  std::vector<std::string> used;
  for (auto& f : r.functions) {
    filter(f.body.body, keep);
    if (f.name != "main" && f.body.body.empty()) continue;
    for_each_stmt(f.body.body, [&](const Stmt& s) {
      for (const auto& e : stmt_exprs(s)) collect_idents(e, used);
    });
    funcs.push_back(std::move(f));
  }
  r.functions = std::move(funcs);
  std::vector<Stmt> globals;
  for (auto& g : r.globals) {
    if (std::find(used.begin(), used.end(), g.name) != used.end()) globals.push_back(std::move(g));
  }
  r.globals = std::move(globals);
  return r;
}

int count_loc(const std::string& source) {
  int count = 0;
  bool in_block = false;
  std::size_t start = 0;
  while (start <= source.size()) {
    std::size_t end = source.find('\n', start);
    if (end == std::string::npos) end = source.size();
    std::string line = source.substr(start, end - start);
    bool code = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (in_block) {
        if (line.compare(i, 2, "*/") == 0) {
          in_block = false;
          ++i;
        }
        continue;
      }
      if (line.compare(i, 2, "//") == 0) break;
      if (line.compare(i, 2, "/*") == 0) {
        in_block = true;
        ++i;
        continue;
      }
      if (!std::isspace(static_cast<unsigned char>(line[i]))) code = true;
    }
    if (code) ++count;
    if (end == source.size()) break;
    start = end + 1;
  }
  return count;
}

MetricsRow metrics(const Program& program, const std::string& name) {
  MetricsRow row;
  row.name = name.empty() ? program.file : name;
  row.loc = count_loc(program.source_text.empty() ? emit_source(program) : program.source_text);
  for (const auto& f : program.functions) {
    int decisions = 0;
    for_each_stmt(f.body.body, [&](const Stmt& s) {
      if (s.kind == StmtKind::If || s.kind == StmtKind::While) ++decisions;
    });
    row.cyclomatic += decisions + 1;
  }
  return row;
}

int slice_loc(const Program& program, const Slice& slice) {
  return count_loc(emit_source(restrict_program(program, slice.nodes)));
}

}  // namespace sigforge

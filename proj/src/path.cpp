#include "sigforge/path.hpp"

#include <algorithm>

#include "sigforge/absdomain.hpp"
#include "sigforge/frontend.hpp"

namespace sigforge {

namespace {

bool mentions_any(const ExprPtr& e, const std::vector<std::string>& names) {
  std::vector<std::string> ids;
  collect_idents(e, ids);
  return std::any_of(ids.begin(), ids.end(),
                     [&](const std::string& n) { return std::find(names.begin(), names.end(), n) != names.end(); });
}

std::string root_of(const ExprPtr& e) {
  const Expr* x = e.get();
  while (x && x->kind != ExprKind::Ident && !x->args.empty()) x = x->args.front().get();
  return x && x->kind == ExprKind::Ident ? x->text : std::string();
}

bool writes_any(const Stmt* s, const std::vector<std::string>& names) {
  if (!s) return false;
  auto in = [&](const std::string& n) { return std::find(names.begin(), names.end(), n) != names.end(); };
  switch (s->kind) {
    case StmtKind::VarDecl: return in(s->name);
    case StmtKind::Assign: return in(root_of(s->target));
    case StmtKind::ExprStmt:
      if (s->value && s->value->kind == ExprKind::Call && !s->value->args.empty()) {
        const auto& f = s->value->text;
        if (f == "read_line" || f == "strcpy" || f == "strcat") return in(root_of(s->value->args.front()));
      }
      return false;
    default: return false;
  }
}

// Conditions that write memory (read_line in a loop header) act like plain nodes.
bool has_effect(const Stmt* s) {
  bool hit = false;
  if (s && s->value) {
    for_each_expr(s->value, [&](const Expr& e) {
      if (e.kind == ExprKind::Call && (e.text == "read_line" || e.text == "strcpy" || e.text == "strcat" ||
                                       e.text == "free" || e.text == "malloc")) {
        hit = true;
      }
    });
  }
  return hit;
}

// Post-dominator sets over one intraprocedural graph; abort edges are ignored.
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

bool is_fault_node(const CfgNode& n, const FaultSpec& f) {
  return n.stmt == f.fault_loc.stmt_id && n.role != NodeRole::CallReturn;
}

// Whether the last node of `nodes` derives the fault after replaying the rest.
bool replay(const Transfer& tf, const std::vector<SegmentNode>& nodes, const FaultSpec& fault) {
  if (nodes.empty() || nodes.back().stmt != fault.fault_loc.stmt_id) return false;
  const Program& p = tf.program();
  std::vector<std::size_t> present;
  for (const auto& n : nodes) present.push_back(n.pos);
  for (const auto& n : nodes) {
    for (auto r : n.needs) {
      if (std::find(present.begin(), present.end(), r) == present.end()) return false;
    }
  }
  AbsState s = tf.initial_state();
  std::map<std::pair<StmtId, int>, LoopRecord> loops;
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    const SegmentNode& n = nodes[i];
    const Stmt& st = *p.find_stmt(n.stmt);
    if (n.branch) {
      if (fault.fault_type == FaultType::InfiniteLoop && n.stmt == fault.fault_loc.stmt_id) {
        LoopRecord rec = tf.loop_record(s, st, fault.condition.ind);
        rec.entered = n.taken;
        loops[{n.stmt, n.context}] = rec;
      }
      Truth t = tf.condition(s, st);
      if (t == Truth::Unknown) return false;
      if (!tf.assume(s, st, n.taken)) return false;
    } else {
      tf.exec(s, st, n.role);
    }
    if (!s.feasible) return false;
  }
  const SegmentNode& last = nodes.back();
  const Stmt& st = *p.find_stmt(last.stmt);
  if (fault.fault_type == FaultType::InfiniteLoop) {
    auto it = loops.find({last.stmt, last.context});
    if (it == loops.end() || !it->second.entered) return false;
    LoopRecord now = tf.loop_record(s, st, fault.condition.ind);
    if (!Transfer::unchanged(it->second, now)) return false;
    Truth t = tf.condition(s, st);
    return t == Truth::True || t == Truth::Maybe;
  }
  return tf.derivable(s, fault, st);
}

class Search {
 public:
  Search(const Program& program, const Cfg& cfg, const FaultSpec& fault, const ExplorationBudget& budget)
      : program_(program), cfg_(cfg), fault_(fault), budget_(budget), tf_(program), cd_(control_dependence(program)) {
    entities_ = fault.condition.entities();
    if (fault.fault_type == FaultType::InfiniteLoop) {
      for (const auto& v : fault.condition.ind) {
        if (std::find(entities_.begin(), entities_.end(), v) == entities_.end()) entities_.push_back(v);
      }
    }
  }

  std::optional<FaultyPathSegment> run() {
    Walk w;
    w.state = tf_.initial_state();
    explore(Cfg::kEntry, -1, std::move(w));
    return best_;
  }

  std::size_t paths() const { return paths_; }
  bool truncated() const { return truncated_; }

 private:
  struct Walk {
    AbsState state;
    std::vector<SegmentNode> path;
    std::map<int, int> iterations;          // loop header -> completed iterations
    std::map<int, LoopRecord> records;      // loop header -> record at last arrival
    struct Leak {
      int obj = -1;
      std::size_t pos = 0;                       // fault node position
      std::size_t lost = static_cast<std::size_t>(-1);   // node dropping the last reference
      bool dropped = false;
    };
    std::vector<Leak> leaks;
  };

  bool out_of_budget() {
    if (paths_ >= budget_.max_paths) {
      truncated_ = true;
      return true;
    }
    return false;
  }

  void finish() { ++paths_; }

  bool bounded_out(const Walk& w) const { return best_ && w.path.size() + 1 >= best_len_; }

  SegmentNode visit(const Walk& w, int id) const {
    const CfgNode& n = cfg_.node(id);
    SegmentNode sn;
    sn.stmt = n.stmt;
    sn.role = n.role;
    sn.branch = n.kind == NodeKind::Branch;
    sn.cfg_node = id;
    sn.context = n.context;
    sn.pos = w.path.size();
    return sn;
  }

  // Branches the fault's derivation needs, closed over kept nodes.
  std::vector<SegmentNode> initial_segment(std::vector<SegmentNode> witness) const {
    auto governing = [&](std::size_t pos, StmtId branch) -> std::optional<std::size_t> {
      for (std::size_t k = pos; k-- > 0;) {
        if (witness[k].stmt == branch && witness[k].branch && witness[k].context == witness[pos].context) return k;
      }
      return std::nullopt;
    };
    for (std::size_t i = 0; i < witness.size(); ++i) {
      auto it = cd_.find(witness[i].stmt);
      if (it == cd_.end()) continue;
      for (StmtId b : it->second) {
        const Stmt* bs = program_.find_stmt(b);
        if (!bs || !mentions_any(bs->value, entities_)) continue;
        if (auto g = governing(i, b)) witness[i].needs.push_back(*g);
      }
    }
    // a returned value depends on every branch that selected its return statement
    std::vector<bool> selector(witness.size(), false);
    for (std::size_t i = 0; i < witness.size(); ++i) {
      const Stmt* here = program_.find_stmt(witness[i].stmt);
      selector[i] = here && here->kind == StmtKind::Return && here->init;
    }
    for (std::size_t i = witness.size(); i-- > 0;) {
      if (!selector[i]) continue;
      auto it = cd_.find(witness[i].stmt);
      if (it == cd_.end()) continue;
      for (StmtId b : it->second) {
        auto g = governing(i, b);
        if (!g) continue;
        if (std::find(witness[i].needs.begin(), witness[i].needs.end(), *g) == witness[i].needs.end()) {
          witness[i].needs.push_back(*g);
        }
        selector[*g] = true;
      }
    }
    std::vector<bool> keep(witness.size(), false);
    std::vector<std::size_t> work;
    for (std::size_t i = 0; i < witness.size(); ++i) {
      if (!witness[i].branch || i + 1 == witness.size() || has_effect(program_.find_stmt(witness[i].stmt))) {
        keep[i] = true;
        work.push_back(i);
      }
    }
    // the loop header arrival before an infinite-loop fault arrival is the iteration entry
    if (fault_.fault_type == FaultType::InfiniteLoop) {
      for (std::size_t k = witness.size() - 1; k-- > 0;) {
        if (witness[k].stmt == witness.back().stmt && witness[k].context == witness.back().context) {
          if (!keep[k]) {
            keep[k] = true;
            work.push_back(k);
          }
          // the last iteration's writes to ind are why it makes no progress
          auto& last = witness.back();
          for (std::size_t j = k + 1; j + 1 < witness.size(); ++j) {
            if (!witness[j].branch && writes_any(program_.find_stmt(witness[j].stmt), fault_.condition.ind)) {
              last.needs.push_back(j);
            }
          }
          break;
        }
      }
    }
    while (!work.empty()) {
      std::size_t i = work.back();
      work.pop_back();
      for (auto r : witness[i].needs) {
        if (!keep[r]) {
          keep[r] = true;
          work.push_back(r);
        }
      }
    }
    std::vector<SegmentNode> out;
    for (std::size_t i = 0; i < witness.size(); ++i) {
      if (keep[i]) out.push_back(witness[i]);
    }
    return out;
  }

  void found(const Walk& w, std::size_t cut, std::size_t length, std::size_t tail = static_cast<std::size_t>(-1)) {
    std::vector<SegmentNode> witness(w.path.begin(), w.path.begin() + static_cast<std::ptrdiff_t>(cut));
    auto segment = initial_segment(witness);
    // keep requirement lists on the witness too
    for (const auto& n : segment) witness[n.pos].needs = n.needs;
    if (!replay(tf_, segment, fault_)) return;
    FaultyPathSegment r;
    r.fault = fault_;
    r.nodes = std::move(segment);
    r.witness = std::move(witness);
    if (tail < w.path.size()) {
      SegmentNode t = w.path[tail];
      t.needs.clear();
      r.tail.push_back(t);
    }
    r.approximate = w.state.approximate;
    best_ = std::move(r);
    best_len_ = length;
  }

  void explore(int id, int prev, Walk w) {
    while (true) {
      if (out_of_budget()) return;
      const CfgNode& n = cfg_.node(id);
      if (n.kind != NodeKind::Exit && bounded_out(w)) {
        finish();
        return;
      }
      if (n.kind == NodeKind::Exit) {
        for (const auto& l : w.leaks) {
          const AbsObj& o = w.state.objs[l.obj];
          if (!o.freed && o.last_use == fault_.fault_loc.stmt_id && (!best_ || w.path.size() < best_len_)) {
            found(w, l.pos + 1, w.path.size(), l.lost);
            break;
          }
        }
        finish();
        return;
      }
      if (n.kind == NodeKind::Entry) {
        prev = id;
        id = cfg_.successors(id).front().to;
        continue;
      }
      const Stmt& st = *n.ast;
      if (n.kind == NodeKind::Branch) {
        branch(id, prev, std::move(w));
        return;
      }
      SegmentNode sn = visit(w, id);
      w.path.push_back(sn);
      if (is_fault_node(n, fault_)) {
        if (fault_.fault_type == FaultType::ResourceLeak) {
          int obj = tf_.leak_candidate(w.state, fault_, st);
          if (obj >= 0) w.leaks.push_back({obj, sn.pos});
        } else if (fault_.fault_type != FaultType::InfiniteLoop) {
          AbsState probe = w.state;
          if (tf_.derivable(probe, fault_, st)) {
            found(w, w.path.size(), w.path.size());
            if (best_ && best_len_ == w.path.size()) {
              finish();
              return;
            }
          }
        }
      }
      tf_.exec(w.state, st, n.role);
      for (auto& l : w.leaks) {
        if (l.dropped || reachable(w.state, l.obj)) continue;
        l.dropped = true;
        if (st.kind == StmtKind::Assign && n.role == NodeRole::Plain) l.lost = sn.pos;
      }
      if (!w.state.feasible) {
        finish();
        return;
      }
      int next = -1;
      for (const auto& e : cfg_.successors(id)) {
        if (e.label != EdgeLabel::Abort) {
          next = e.to;
          break;
        }
      }
      if (next < 0) {
        finish();
        return;
      }
      prev = id;
      id = next;
    }
  }

  void branch(int id, int prev, Walk w) {
    const CfgNode& n = cfg_.node(id);
    const Stmt& st = *n.ast;
    bool is_loop = cfg_.loop_body.count(id) > 0;
    bool back = is_loop && prev >= 0 && cfg_.in_loop_body(id, prev);
    if (is_loop) {
      if (back) {
        ++w.iterations[id];
      } else {
        w.iterations[id] = 0;
        w.records.erase(id);
      }
    }
    SegmentNode sn = visit(w, id);
    if (fault_.fault_type == FaultType::ResourceLeak && is_fault_node(n, fault_)) {
      AbsState probe = w.state;
      tf_.condition(probe, st);
      int obj = tf_.leak_candidate(probe, fault_, st);
      if (obj >= 0) w.leaks.push_back({obj, sn.pos});
    }
    if (is_loop && fault_.fault_type == FaultType::InfiniteLoop && n.stmt == fault_.fault_loc.stmt_id) {
      LoopRecord now = tf_.loop_record(w.state, st, fault_.condition.ind);
      auto before = w.records.find(id);
      if (back && before != w.records.end() && Transfer::unchanged(before->second, now)) {
        AbsState probe = w.state;
        Truth t = tf_.condition(probe, st);
        if (t == Truth::True || t == Truth::Maybe) {
          Walk hit = w;
          sn.taken = true;
          hit.path.push_back(sn);
          found(hit, hit.path.size(), hit.path.size());
          if (best_ && best_len_ == hit.path.size()) {
            finish();
            return;
          }
        }
      }
      w.records[id] = now;
    }
    Truth t = tf_.condition(w.state, st);
    bool may_exit_only = is_loop && w.iterations[id] >= budget_.unroll;
    for (const auto& e : cfg_.successors(id)) {
      bool pol = e.label == EdgeLabel::True;
      if (t == Truth::True && !pol) continue;
      if (t == Truth::False && pol) continue;
      if (pol && may_exit_only) {
        finish();
        continue;
      }
      if (out_of_budget()) return;
      Walk next = w;
      SegmentNode taken = sn;
      taken.taken = pol;
      next.path.push_back(taken);
      if (t != Truth::Unknown && !tf_.assume(next.state, st, pol)) {
        finish();
        continue;
      }
      explore(e.to, id, std::move(next));
    }
  }

  const Program& program_;
  const Cfg& cfg_;
  const FaultSpec& fault_;
  ExplorationBudget budget_;
  Transfer tf_;
  std::map<StmtId, std::set<StmtId>> cd_;
  std::vector<std::string> entities_;
  std::optional<FaultyPathSegment> best_;
  std::size_t best_len_ = 0;
  std::size_t paths_ = 0;
  bool truncated_ = false;
};

}  // namespace

std::vector<StmtId> FaultyPathSegment::stmt_ids() const {
  std::vector<StmtId> out;
  for (const auto& n : nodes) out.push_back(n.stmt);
  return out;
}

std::vector<StmtId> FaultyPathSegment::witness_ids() const {
  std::vector<StmtId> out;
  for (const auto& n : witness) out.push_back(n.stmt);
  return out;
}

nlohmann::json FaultyPathSegment::to_json(const Program& program) const {
  nlohmann::json nodes_json = nlohmann::json::array();
  for (const auto& n : nodes) {
    const Stmt* s = program.find_stmt(n.stmt);
    nlohmann::json j{{"stmt_id", n.stmt}, {"file", program.file}, {"line", s ? s->loc.line : 0},
                     {"text", s ? stmt_text(*s) : ""}};
    if (n.branch) j["taken"] = n.taken;
    if (n.role == NodeRole::CallBind) j["role"] = "call";
    if (n.role == NodeRole::CallReturn) j["role"] = "return";
    nodes_json.push_back(std::move(j));
  }
  return {{"fault", fault.to_json()},
          {"nodes", nodes_json},
          {"witness_path", witness_ids()},
          {"entry_node", entry_node()},
          {"approximate", approximate},
          {"paths_explored", paths_explored}};
}

std::map<StmtId, std::set<StmtId>> control_dependence(const Program& program) {
  std::map<StmtId, std::set<StmtId>> out;
  for (const auto& f : program.functions) {
    Cfg g = build_cfg(program, f);
    auto pdom = post_dominators(g);
    for (const auto& b : g.nodes) {
      if (b.kind != NodeKind::Branch) continue;
      for (const auto& e : g.successors(b.id)) {
        for (const auto& v : g.nodes) {
          if (v.id == b.id || v.stmt == kNoStmt) continue;
          bool strict_pdom_b = pdom[b.id][v.id];
          if (pdom[e.to][v.id] && !strict_pdom_b) out[v.stmt].insert(b.stmt);
        }
      }
    }
  }
  return out;
}

bool verify_sufficiency(const Program& program, const std::vector<SegmentNode>& nodes, const FaultSpec& fault) {
  Transfer tf(program);
  return replay(tf, nodes, fault);
}

std::optional<std::size_t> brute_force_minimum(const Program& program, const FaultyPathSegment& segment,
                                               std::size_t max_checks) {
  const auto& w = segment.witness;
  if (w.empty()) return std::nullopt;
  Transfer tf(program);
  std::size_t n = w.size() - 1;
  std::size_t checks = 0;
  for (std::size_t k = 0; k <= n; ++k) {
    // the search result is sufficient, so nothing larger needs enumerating
    if (k + 1 >= segment.nodes.size() && verify_sufficiency(program, segment.nodes, segment.fault)) return k + 1;
    double combos = 1;
    for (std::size_t i = 0; i < k; ++i) combos = combos * static_cast<double>(n - i) / static_cast<double>(i + 1);
    if (static_cast<double>(checks) + combos > static_cast<double>(max_checks)) return std::nullopt;
    std::vector<std::size_t> idx(k);
    for (std::size_t i = 0; i < k; ++i) idx[i] = i;
    while (true) {
      ++checks;
      std::vector<SegmentNode> nodes;
      for (auto i : idx) nodes.push_back(w[i]);
      nodes.push_back(w.back());
      if (replay(tf, nodes, segment.fault)) return k + 1;
      std::size_t i = k;
      while (i > 0 && idx[i - 1] == n - k + i - 1) --i;
      if (i == 0) break;
      ++idx[i - 1];
      for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
    }
  }
  return std::nullopt;
}

FaultyPathSegment minimize_segment(const Program& program, FaultyPathSegment segment) {
  Transfer tf(program);
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i + 1 < segment.nodes.size();) {
      std::vector<SegmentNode> trial = segment.nodes;
      trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(i));
      if (replay(tf, trial, segment.fault)) {
        segment.nodes = std::move(trial);
        changed = true;
      } else {
        ++i;
      }
    }
  }
  return segment;
}

FaultyPathSegment find_faulty_path(const Program& program, const Cfg& cfg, const FaultSpec& fault,
                                   const ExplorationBudget& budget) {
  if (cfg.nodes_for_stmt(fault.fault_loc.stmt_id).empty()) {
    throw NoFaultyPath("fault location is not reachable in the graph");
  }
  Search search(program, cfg, fault, budget);
  auto best = search.run();
  if (!best) {
    if (search.truncated()) {
      throw BudgetExhausted("no faulty path within " + std::to_string(budget.max_paths) + " paths");
    }
    throw NoFaultyPath("fault condition is not derivable on any path");
  }
  best->paths_explored = search.paths();
  return minimize_segment(program, std::move(*best));
}

FaultyPathSegment find_faulty_path(const Program& program, const FaultSpec& fault, const ExplorationBudget& budget) {
  return find_faulty_path(program, inline_program(program, "main"), fault, budget);
}

}  // namespace sigforge

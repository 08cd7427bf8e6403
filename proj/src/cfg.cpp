#include "sigforge/cfg.hpp"

#include <algorithm>
#include <sstream>

namespace sigforge {

std::vector<CfgEdge> Cfg::successors(int id) const {
  std::vector<CfgEdge> out;
  for (int e : succ_edges.at(id)) out.push_back(edges[e]);
  return out;
}

std::vector<CfgEdge> Cfg::predecessors(int id) const {
  std::vector<CfgEdge> out;
  for (int e : pred_edges.at(id)) out.push_back(edges[e]);
  return out;
}

int Cfg::successor(int id, EdgeLabel label) const {
  for (int e : succ_edges.at(id)) {
    if (edges[e].label == label) return edges[e].to;
  }
  return -1;
}

std::vector<int> Cfg::nodes_for_stmt(StmtId stmt) const {
  std::vector<int> out;
  for (const auto& n : nodes) {
    if (n.stmt == stmt && (n.kind == NodeKind::Statement || n.kind == NodeKind::Branch)) out.push_back(n.id);
  }
  return out;
}

bool Cfg::in_loop_body(int header, int node) const {
  auto it = loop_body.find(header);
  return it != loop_body.end() && node >= it->second.first && node <= it->second.second;
}

std::size_t Cfg::statement_count() const {
  return std::count_if(nodes.begin(), nodes.end(), [](const CfgNode& n) { return n.kind == NodeKind::Statement; });
}

std::size_t Cfg::branch_count() const {
  return std::count_if(nodes.begin(), nodes.end(), [](const CfgNode& n) { return n.kind == NodeKind::Branch; });
}

void Cfg::finalize() {
  succ_edges.assign(nodes.size(), {});
  pred_edges.assign(nodes.size(), {});
  for (std::size_t i = 0; i < edges.size(); ++i) {
    succ_edges[edges[i].from].push_back(static_cast<int>(i));
    pred_edges[edges[i].to].push_back(static_cast<int>(i));
  }
  auto by_target = [this](int a, int b) {
    if (edges[a].to != edges[b].to) return edges[a].to < edges[b].to;
    return edges[a].label < edges[b].label;
  };
  for (auto& v : succ_edges) std::sort(v.begin(), v.end(), by_target);
}

std::string Cfg::to_dot() const {
  static const char* kLabels[] = {"", "T", "F", "abort"};
  std::ostringstream out;
  out << "digraph cfg {\n";
  for (const auto& n : nodes) {
    out << "  n" << n.id << " [label=\"";
    if (n.kind == NodeKind::Entry) {
      out << "entry";
    } else if (n.kind == NodeKind::Exit) {
      out << "exit";
    } else {
      out << n.stmt << ":" << (n.ast ? n.ast->loc.line : 0);
    }
    out << "\"" << (n.kind == NodeKind::Branch ? ", shape=diamond" : "") << "];\n";
  }
  for (const auto& e : edges) {
    out << "  n" << e.from << " -> n" << e.to;
    if (e.label != EdgeLabel::Seq) out << " [label=\"" << kLabels[static_cast<int>(e.label)] << "\"]";
    out << ";\n";
  }
  out << "}\n";
  return out.str();
}

namespace {

struct Pending {
  int from;
  EdgeLabel label;
};
using Frontier = std::vector<Pending>;

struct LoopCtx {
  Frontier breaks;
  Frontier continues;
};

struct FnCtx {
  const FuncDef* func;
  int context;
  int depth;
  Frontier* returns;   // null: returns go to Exit
  std::vector<LoopCtx> loops;
};

class Builder {
 public:
  Builder(const Program& p, int depth_cap) : program_(p), depth_cap_(depth_cap) {
    add_node(kNoStmt, NodeKind::Entry, NodeRole::Plain, nullptr, "", 0, 0);
    add_node(kNoStmt, NodeKind::Exit, NodeRole::Plain, nullptr, "", 0, 0);
  }

  Cfg run(const FuncDef& f) {
    FnCtx ctx{&f, 0, 0, nullptr, {}};
    Frontier out = block(f.body.body, {{Cfg::kEntry, EdgeLabel::Seq}}, ctx);
    connect(out, Cfg::kExit);
    cfg_.finalize();
    return std::move(cfg_);
  }

 private:
  int add_node(StmtId stmt, NodeKind kind, NodeRole role, const Stmt* ast, const std::string& func, int context,
               int depth) {
    CfgNode n;
    n.id = static_cast<int>(cfg_.nodes.size());
    n.stmt = stmt;
    n.kind = kind;
    n.role = role;
    n.ast = ast;
    n.func = func;
    n.context = context;
    n.depth = depth;
    cfg_.nodes.push_back(n);
    return n.id;
  }

  int node_for(const Stmt& s, NodeKind kind, NodeRole role, const FnCtx& ctx) {
    return add_node(s.loc.stmt_id, kind, role, &s, ctx.func->name, ctx.context, ctx.depth);
  }

  void connect(const Frontier& in, int to) {
    for (const auto& p : in) cfg_.edges.push_back({p.from, to, p.label});
  }

  Frontier block(const std::vector<Stmt>& stmts, Frontier in, FnCtx& ctx) {
    for (const auto& s : stmts) {
      if (in.empty()) break;   // unreachable tail
      in = stmt(s, std::move(in), ctx);
    }
    return in;
  }

  Frontier stmt(const Stmt& s, Frontier in, FnCtx& ctx) {
    switch (s.kind) {
      case StmtKind::Block:
        return block(s.body, std::move(in), ctx);
      case StmtKind::If: {
        int b = node_for(s, NodeKind::Branch, NodeRole::Plain, ctx);
        connect(in, b);
        Frontier out = block(s.body, {{b, EdgeLabel::True}}, ctx);
        Frontier els = s.has_else ? block(s.else_body, {{b, EdgeLabel::False}}, ctx) : Frontier{{b, EdgeLabel::False}};
        out.insert(out.end(), els.begin(), els.end());
        return out;
      }
      case StmtKind::While: {
        int h = node_for(s, NodeKind::Branch, NodeRole::Plain, ctx);
        connect(in, h);
        ctx.loops.push_back({});
        Frontier body_out = block(s.body, {{h, EdgeLabel::True}}, ctx);
        LoopCtx loop = std::move(ctx.loops.back());
        ctx.loops.pop_back();
        body_out.insert(body_out.end(), loop.continues.begin(), loop.continues.end());
        if (!body_out.empty()) body_out = block(s.latch, std::move(body_out), ctx);
        connect(body_out, h);
        cfg_.loop_body[h] = {h + 1, static_cast<int>(cfg_.nodes.size()) - 1};
        Frontier out{{h, EdgeLabel::False}};
        out.insert(out.end(), loop.breaks.begin(), loop.breaks.end());
        return out;
      }
      case StmtKind::Break:
      case StmtKind::Continue: {
        int n = node_for(s, NodeKind::Statement, NodeRole::Plain, ctx);
        connect(in, n);
        if (ctx.loops.empty()) throw CheckError(std::to_string(s.loc.line) + ": break/continue outside loop");
        auto& target = s.kind == StmtKind::Break ? ctx.loops.back().breaks : ctx.loops.back().continues;
        target.push_back({n, EdgeLabel::Seq});
        return {};
      }
      case StmtKind::Return: {
        int n = node_for(s, NodeKind::Statement, NodeRole::Plain, ctx);
        connect(in, n);
        if (ctx.returns) {
          ctx.returns->push_back({n, EdgeLabel::Seq});
        } else {
          cfg_.edges.push_back({n, Cfg::kExit, EdgeLabel::Seq});
        }
        return {};
      }
      case StmtKind::Assert: {
        int n = node_for(s, NodeKind::Statement, NodeRole::Plain, ctx);
        connect(in, n);
        cfg_.edges.push_back({n, Cfg::kExit, EdgeLabel::Abort});
        return {{n, EdgeLabel::Seq}};
      }
      default:
        break;
    }
    // VarDecl, Assign, ExprStmt
    if (const Expr* call = user_call(program_, s)) {
      if (ctx.depth < depth_cap_) return inline_call(s, *call, std::move(in), ctx);
      int n = node_for(s, NodeKind::Statement, NodeRole::OpaqueCall, ctx);
      connect(in, n);
      cfg_.call_map[n] = call->text;
      return {{n, EdgeLabel::Seq}};
    }
    int n = node_for(s, NodeKind::Statement, NodeRole::Plain, ctx);
    connect(in, n);
    if (s.kind == StmtKind::ExprStmt && s.value->kind == ExprKind::Call && s.value->text == "exit") {
      cfg_.edges.push_back({n, Cfg::kExit, EdgeLabel::Seq});
      return {};
    }
    return {{n, EdgeLabel::Seq}};
  }

  Frontier inline_call(const Stmt& s, const Expr& call, Frontier in, FnCtx& ctx) {
    const FuncDef* callee = program_.find_function(call.text);
    int bind = node_for(s, NodeKind::Statement, NodeRole::CallBind, ctx);
    connect(in, bind);
    cfg_.call_map[bind] = call.text;
    int copy = ++next_context_;
    cfg_.callee_context[bind] = copy;
    Frontier returns;
    FnCtx inner{callee, copy, ctx.depth + 1, &returns, {}};
    Frontier out = block(callee->body.body, {{bind, EdgeLabel::Seq}}, inner);
    out.insert(out.end(), returns.begin(), returns.end());
    int join = node_for(s, NodeKind::Statement, NodeRole::CallReturn, ctx);
    connect(out, join);
    return {{join, EdgeLabel::Seq}};
  }

  const Program& program_;
  int depth_cap_;
  int next_context_ = 0;
  Cfg cfg_;
};

}  // namespace

Cfg build_cfg(const Program& program, const FuncDef& func) { return Builder(program, 0).run(func); }

Cfg inline_program(const Program& program, const std::string& entry, int depth_cap) {
  const FuncDef* f = program.find_function(entry);
  if (!f) throw UnknownEntry("unknown entry function '" + entry + "'");
  if (depth_cap < 1) throw Error("depth cap must be at least 1");
  return Builder(program, depth_cap).run(*f);
}

}  // namespace sigforge

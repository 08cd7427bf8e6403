#pragma once

#include <map>
#include <string>
#include <vector>

#include "sigforge/ast.hpp"

namespace sigforge {

enum class NodeKind { Statement, Branch, Entry, Exit };

/// What a statement node does in the whole-program graph. A user call that is
/// inlined becomes a CallBind node (argument passing), the callee copy, and a
/// CallReturn node (result assignment); both carry the call's stmt id.
enum class NodeRole { Plain, CallBind, CallReturn, OpaqueCall };

enum class EdgeLabel { Seq, True, False, Abort };

struct CfgNode {
  int id = 0;
  StmtId stmt = kNoStmt;
  NodeKind kind = NodeKind::Statement;
  NodeRole role = NodeRole::Plain;
  std::string func;   // function whose body holds the statement
  int context = 0;    // inline copy; 0 is the entry function
  int depth = 0;
  const Stmt* ast = nullptr;
};

struct CfgEdge {
  int from = 0;
  int to = 0;
  EdgeLabel label = EdgeLabel::Seq;
};

struct Cfg {
  static constexpr int kEntry = 0;
  static constexpr int kExit = 1;

  std::vector<CfgNode> nodes;   // indexed by node id
  std::vector<CfgEdge> edges;
  int entry = kEntry;
  int exit = kExit;
  std::map<int, std::string> call_map;                // call node -> callee
  std::map<int, std::pair<int, int>> loop_body;       // while header -> [first, last] node id of body
  std::map<int, int> callee_context;                  // CallBind node -> context of the inlined copy

  const CfgNode& node(int id) const { return nodes.at(id); }
  std::vector<CfgEdge> successors(int id) const;      // ordered by target id, then label
  std::vector<CfgEdge> predecessors(int id) const;
  int successor(int id, EdgeLabel label) const;       // -1 if absent
  std::vector<int> nodes_for_stmt(StmtId stmt) const;
  bool in_loop_body(int header, int node) const;

  std::size_t statement_count() const;   // Statement-kind nodes
  std::size_t branch_count() const;

  /// Graphviz text, node label = "stmt_id:line".
  std::string to_dot() const;

  // Adjacency caches, filled by finalize().
  std::vector<std::vector<int>> succ_edges;
  std::vector<std::vector<int>> pred_edges;
  void finalize();
};

class UnknownEntry : public Error {
 public:
  using Error::Error;
};

/// Intraprocedural graph; calls to user functions stay opaque.
Cfg build_cfg(const Program& program, const FuncDef& func);

/// Whole-program graph rooted at `entry` with calls inlined up to `depth_cap`
/// nested copies; deeper calls are opaque nodes. Copies keep original stmt ids.
Cfg inline_program(const Program& program, const std::string& entry, int depth_cap = 3);

}  // namespace sigforge

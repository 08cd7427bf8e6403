#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "json.hpp"
#include "sigforge/ast.hpp"
#include "sigforge/cfg.hpp"
#include "sigforge/fault.hpp"

namespace sigforge {

struct ExplorationBudget {
  int unroll = 3;                  // loop iterations per activation
  std::size_t max_paths = 50'000;  // completed or abandoned paths
};

/// One node of a witness path (a visit of a CFG node).
struct SegmentNode {
  StmtId stmt = kNoStmt;
  NodeRole role = NodeRole::Plain;
  bool branch = false;
  bool taken = false;                 // branches: outcome on the witness
  int cfg_node = -1;
  int context = 0;
  std::size_t pos = 0;                // index in the witness path
  std::vector<std::size_t> needs;  // witness positions of governing branches

  bool operator==(const SegmentNode&) const = default;
};

struct FaultyPathSegment {
  FaultSpec fault;
  std::vector<SegmentNode> nodes;
  std::vector<SegmentNode> witness;
  /// Leaks: the later assignment that drops the last reference, when there is one.
  std::vector<SegmentNode> tail;
  bool approximate = false;
  std::size_t paths_explored = 0;

  std::vector<StmtId> stmt_ids() const;
  std::vector<StmtId> witness_ids() const;
  StmtId entry_node() const { return nodes.empty() ? kNoStmt : nodes.front().stmt; }
  nlohmann::json to_json(const Program& program) const;
};

class NoFaultyPath : public Error {
 public:
  using Error::Error;
};

class BudgetExhausted : public Error {
 public:
  using Error::Error;
};

/// Branch statements each statement is control dependent on, per function
/// (post-dominator based, a loop header is not its own controller).
std::map<StmtId, std::set<StmtId>> control_dependence(const Program& program);

/// Searches `cfg` (normally the inlined graph of main) for a path on which the
/// fault condition is derivable at the fault location. Returns the minimized segment.
FaultyPathSegment find_faulty_path(const Program& program, const Cfg& cfg, const FaultSpec& fault,
                                   const ExplorationBudget& budget = {});
FaultyPathSegment find_faulty_path(const Program& program, const FaultSpec& fault,
                                   const ExplorationBudget& budget = {});

/// Replays `nodes` from a fresh state and checks the fault condition at the last one.
bool verify_sufficiency(const Program& program, const std::vector<SegmentNode>& nodes, const FaultSpec& fault);

/// Size of the smallest sufficient subsequence of the witness ending at the
/// fault, by exhaustive enumeration in increasing size. nullopt when more than
/// `max_checks` candidates would be needed.
std::optional<std::size_t> brute_force_minimum(const Program& program, const FaultyPathSegment& segment,
                                               std::size_t max_checks = 2'000'000);

/// Greedy single-node removal until no node can be dropped.
FaultyPathSegment minimize_segment(const Program& program, FaultyPathSegment segment);

}  // namespace sigforge

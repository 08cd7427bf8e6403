#include <set>

#include "doctest.h"
#include "sigforge/cfg.hpp"
#include "sigforge/frontend.hpp"

using namespace sigforge;

namespace {

bool reaches(const Cfg& g, int from, int to, bool forward) {
  std::set<int> seen{from};
  std::vector<int> work{from};
  while (!work.empty()) {
    int n = work.back();
    work.pop_back();
    if (n == to) return true;
    for (const auto& e : forward ? g.successors(n) : g.predecessors(n)) {
      int m = forward ? e.to : e.from;
      if (seen.insert(m).second) work.push_back(m);
    }
  }
  return false;
}

void check_well_formed(const Cfg& g) {
  for (const auto& n : g.nodes) {
    CHECK_MESSAGE(reaches(g, g.entry, n.id, true), "unreachable node ", n.id);
    CHECK_MESSAGE(reaches(g, n.id, g.exit, true), "exit not reachable from ", n.id);
    int seq = 0, t = 0, f = 0;
    for (const auto& e : g.successors(n.id)) {
      seq += e.label == EdgeLabel::Seq;
      t += e.label == EdgeLabel::True;
      f += e.label == EdgeLabel::False;
    }
    if (n.kind == NodeKind::Branch) {
      CHECK(t == 1);
      CHECK(f == 1);
      CHECK(seq == 0);
    } else if (n.kind != NodeKind::Exit) {
      CHECK(seq == 1);
      CHECK(t + f == 0);
    } else {
      CHECK(g.successors(n.id).empty());
    }
  }
}

const char* kMergedBranch = R"(int k;
int mode = 1;
int main() {
  char* s = malloc(10);
  char t[100] = "123456789";
  if (mode > 0) {
    k = 1;
    strcat(t, "0");
    s[0] = 'x';
  } else {
    k = 0;
    strcpy(t, "abc");
  }
  if (k >= 0) {
    strcpy(s, t);
  }
  return 0;
}
)";

}  // namespace

TEST_CASE("straight line: statements plus entry and exit") {
  Program p = parse("int main() { int a = 1; a = a + 1; print(\"x\"); }");
  Cfg g = build_cfg(p, *p.find_function("main"));
  CHECK(g.nodes.size() == 5);
  CHECK(g.edges.size() == 4);
  check_well_formed(g);
}

TEST_CASE("if/else diamond") {
  Program p = parse("int main() { int a = 1; if (a > 0) { a = 2; } else { a = 3; } print(\"x\"); }");
  Cfg g = build_cfg(p, *p.find_function("main"));
  CHECK(g.nodes.size() == 7);
  CHECK(g.branch_count() == 1);
  check_well_formed(g);
  int br = g.nodes_for_stmt(p.functions[0].body.body[1].loc.stmt_id).at(0);
  int t = g.successor(br, EdgeLabel::True);
  int f = g.successor(br, EdgeLabel::False);
  CHECK(t != f);
  CHECK(g.successors(t).at(0).to == g.successors(f).at(0).to);
}

TEST_CASE("node count matches statements and branches") {
  Program p = parse(kMergedBranch);
  Cfg g = build_cfg(p, *p.find_function("main"));
  std::size_t stmts = 0, branches = 0;
  for (const auto* s : p.all_statements()) {
    if (p.function_of(s->loc.stmt_id).empty()) continue;   // globals
    if (s->kind == StmtKind::Block) continue;
    if (s->kind == StmtKind::If || s->kind == StmtKind::While) {
      ++branches;
    } else {
      ++stmts;
    }
  }
  CHECK(stmts == 9);
  CHECK(branches == 2);
  CHECK(g.nodes.size() == stmts + branches + 2);
  check_well_formed(g);
}

TEST_CASE("loops, break, continue and asserts") {
  Program p = parse(
      "int main() { int i = 0; while (i < 10) { i = i + 1; if (i == 3) continue; if (i == 7) break; "
      "assert(i != 5); } for (int j = 0; j < 2; j++) { print(\"y\"); } return 0; }");
  Cfg g = build_cfg(p, *p.find_function("main"));
  check_well_formed(g);
  CHECK(g.loop_body.size() == 2);
  bool abort_edge = false;
  for (const auto& e : g.edges) abort_edge |= e.label == EdgeLabel::Abort && e.to == g.exit;
  CHECK(abort_edge);
  for (const auto& [h, range] : g.loop_body) {
    CHECK(range.first == h + 1);
    // every back edge into the header comes from inside the body
    for (const auto& e : g.predecessors(h)) {
      if (e.from > h) CHECK(g.in_loop_body(h, e.from));
    }
  }
}

TEST_CASE("inlining with depth cap") {
  Program p = parse(
      "int f(int n) { if (n <= 1) return 1; int r = f(n - 1); return n * r; }\n"
      "int main() { int x = f(3); return 0; }");
  Cfg intra = build_cfg(p, *p.find_function("main"));
  CHECK(intra.nodes.size() == 4);
  CHECK(intra.call_map.size() == 1);

  // entry/exit 2, main: bind, join, return 3; copy 1: if, return, bind, join, return 5;
  // copy 2 hits the cap: if, return, opaque call, return 4
  Cfg g = inline_program(p, "main", 2);
  CHECK(g.nodes.size() == 14);
  CHECK(g.branch_count() == 2);
  check_well_formed(g);
  int opaque = 0, binds = 0, joins = 0;
  for (const auto& n : g.nodes) {
    opaque += n.role == NodeRole::OpaqueCall;
    binds += n.role == NodeRole::CallBind;
    joins += n.role == NodeRole::CallReturn;
  }
  CHECK(opaque == 1);
  CHECK(binds == 2);
  CHECK(joins == 2);

  Cfg deep = inline_program(p, "main", 3);
  CHECK(deep.nodes.size() == 14 + 5);   // opaque becomes bind+join, plus a 4-node copy
  CHECK_THROWS_AS(inline_program(p, "nosuch"), UnknownEntry);
}

TEST_CASE("dead code after return has no node") {
  Program p = parse("int main() { return 0; print(\"x\"); }");
  Cfg g = build_cfg(p, *p.find_function("main"));
  CHECK(g.nodes.size() == 3);
  check_well_formed(g);
}

TEST_CASE("dot output") {
  Program p = parse("int main() { int a = 1; if (a) { a = 0; } }");
  std::string dot = build_cfg(p, *p.find_function("main")).to_dot();
  CHECK(dot.rfind("digraph cfg {", 0) == 0);
  CHECK(dot.find("label=\"T\"") != std::string::npos);
  CHECK(dot.find("label=\"F\"") != std::string::npos);
  CHECK(dot.find("\"2:1\"") != std::string::npos);   // id 1 is the body block
}

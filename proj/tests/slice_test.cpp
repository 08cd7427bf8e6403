#include <algorithm>

#include "doctest.h"
#include "sigforge/frontend.hpp"
#include "sigforge/interp.hpp"
#include "sigforge/path.hpp"
#include "sigforge/slice.hpp"

using namespace sigforge;

namespace {

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

const char* kConstantCopy = R"(char x[40];

void bar() {
  print("bar");
}

int main() {
  char* s = malloc(10);
  char t[100] = "hello world";
  x[20] = 'a';
  bar();
  if (strlen(t) >= 10) {
    strcpy(s, t);
  } else {
    strcat(x, t);
  }
  return 0;
}
)";

std::set<int> lines(const Program& p, const std::set<StmtId>& ids) {
  std::set<int> out;
  for (StmtId id : ids) out.insert(p.find_stmt(id)->loc.line);
  return out;
}

SourceLoc at(const Program& p, int line) { return SourceLoc{p.file, line, 0, kNoStmt}; }

}  // namespace

TEST_CASE("merged branch static and dynamic slices") {
  Program p = parse(kMergedBranch, "merged_branch.mc");
  Slice st = static_slice(p, at(p, 15));
  CHECK(st.nodes.size() == 10);
  CHECK(lines(p, st.nodes) == std::set<int>{4, 5, 6, 7, 8, 9, 11, 12, 14, 15});
  ExecOutcome r = run(p, "");
  REQUIRE(r.verdict.is_fault());
  Slice dy = dynamic_slice(p, at(p, 15), r);
  CHECK(lines(p, dy.nodes) == std::set<int>{4, 5, 6, 7, 8, 9, 14, 15});
  CHECK(std::includes(st.nodes.begin(), st.nodes.end(), dy.nodes.begin(), dy.nodes.end()));
}

TEST_CASE("straight line slice keeps only the used definition") {
  Program p = parse("int main() {\n  int x = 1;\n  int y = 2;\n  print(x);\n}\n", "s.mc");
  CHECK(lines(p, static_slice(p, at(p, 4)).nodes) == std::set<int>{2, 4});
  Program one = parse("int main() {\n  print(1);\n}\n", "o.mc");
  CHECK(lines(one, static_slice(one, at(one, 2)).nodes) == std::set<int>{2});
}

TEST_CASE("slicing the restricted program is a fixpoint") {
  Program p = parse(kMergedBranch, "merged_branch.mc");
  Slice st = static_slice(p, at(p, 15));
  Program r = parse(emit_source(restrict_program(p, st.nodes)), "r.mc");
  StmtId crit = kNoStmt;
  for (const Stmt* s : r.all_statements()) {
    if (stmt_text(*s) == "strcpy(s, t);") crit = s->loc.stmt_id;
  }
  REQUIRE(crit != kNoStmt);
  Slice again = static_slice(r, SourceLoc{"r.mc", 0, 0, crit});
  CHECK(again.nodes.size() == st.nodes.size());
  CHECK(count_loc(emit_source(r)) == slice_loc(p, st));
}

TEST_CASE("segment within dynamic within static") {
  Program p = parse(kConstantCopy, "constant_copy.mc");
  FaultSpec f = analyze_fault(p, at(p, 13));
  FaultyPathSegment seg = find_faulty_path(p, f);
  ExecOutcome r = run(p, "");
  REQUIRE(r.verdict.is_fault());
  Slice dy = dynamic_slice(p, at(p, 13), r);
  Slice st = static_slice(p, at(p, 13));
  for (StmtId id : seg.stmt_ids()) CHECK(dy.nodes.count(id) == 1);
  CHECK(std::includes(st.nodes.begin(), st.nodes.end(), dy.nodes.begin(), dy.nodes.end()));
  CHECK(lines(p, dy.nodes) == std::set<int>{8, 9, 12, 13});
}

TEST_CASE("interprocedural slice follows parameters and returns") {
  Program p = parse(R"(int twice(int v) {
  int w = v * 2;
  return w;
}
int main() {
  int a = 3;
  int b = 4;
  int c = twice(a);
  print(c);
}
)", "ip.mc");
  CHECK(lines(p, static_slice(p, at(p, 9)).nodes) == std::set<int>{2, 3, 6, 8, 9});
  ExecOutcome r = run(p, "");
  CHECK(lines(p, dynamic_slice(p, at(p, 9), r).nodes) == std::set<int>{2, 3, 6, 8, 9});
}

TEST_CASE("criterion errors") {
  Program p = parse(kMergedBranch, "merged_branch.mc");
  CHECK_THROWS_AS(static_slice(p, at(p, 99)), UnknownCriterion);
  Program q = parse("int main() {\n  if (0) {\n    print(1);\n  }\n}\n", "q.mc");
  CHECK_THROWS_AS(dynamic_slice(q, at(q, 3), run(q, "")), CriterionNotInTrace);
}

TEST_CASE("metrics") {
  Program a = parse("int main() {\n  // note\n  int x = 1;\n\n  print(x);\n}\n", "a.mc");
  CHECK(metrics(a).loc == 4);
  CHECK(metrics(a).cyclomatic == 1);
  Program b = parse("int main() {\n  int x = 1;\n  if (x > 0) {\n    print(x);\n  }\n}\n", "b.mc");
  CHECK(metrics(b).cyclomatic == 2);
  CHECK(count_loc("/* a\n b */ int x;\n\n// c\n") == 1);
}

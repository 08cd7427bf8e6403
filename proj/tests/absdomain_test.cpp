#include "doctest.h"
#include "sigforge/absdomain.hpp"
#include "sigforge/frontend.hpp"

using namespace sigforge;

namespace {

// Runs the non-block statements of main in order; branches are skipped.
AbsState replay(const Transfer& tf, const Program& p, const std::vector<int>& lines) {
  AbsState s = tf.initial_state();
  for (int line : lines) {
    const Stmt* st = p.find_stmt(resolve_line(p, line));
    tf.exec(s, *st, NodeRole::Plain);
  }
  return s;
}

}  // namespace

TEST_CASE("interval arithmetic saturates") {
  Interval a{1, 3};
  Interval b{-2, Interval::kInf};
  CHECK((a + b) == Interval{-1, Interval::kInf});
  CHECK((a - Interval::point(1)) == Interval{0, 2});
  CHECK((a * Interval{-1, 2}) == Interval{-3, 6});
  CHECK(Interval::top().join(a) == Interval::top());
  CHECK(a.meet(Interval{5, 6}).empty());
}

TEST_CASE("overflow derivable from allocation and read") {
  Program p = parse("int main() {\n char* s = malloc(10);\n char t[100];\n read_line(t, 100);\n strcpy(s, t);\n}\n");
  Transfer tf(p);
  FaultSpec f = analyze_fault(p, SourceLoc{"", 5, 0, kNoStmt});
  const Stmt& at = *p.find_stmt(f.fault_loc.stmt_id);
  AbsState full = replay(tf, p, {2, 3, 4});
  CHECK(tf.derivable(full, f, at));

  // without the read the buffer content is the empty string
  AbsState no_read = replay(tf, p, {2, 3});
  CHECK_FALSE(tf.derivable(no_read, f, at));

  // nothing known about either operand
  AbsState bare = tf.initial_state();
  CHECK_FALSE(tf.derivable(bare, f, at));
}

TEST_CASE("refinement narrows string length") {
  Program p = parse(
      "int main() {\n char t[100];\n read_line(t, 100);\n int n = strlen(t);\n if (n < 10) {\n print(n);\n }\n}\n");
  Transfer tf(p);
  AbsState s = replay(tf, p, {2, 3, 4});
  const Stmt& br = *p.find_stmt(resolve_line(p, 5));
  CHECK(tf.condition(s, br) == Truth::Maybe);
  AbsState yes = s;
  REQUIRE(tf.assume(yes, br, true));
  auto len = tf.strlen_of(yes, tf.eval(yes, Expr::ident("t"), "main"));
  REQUIRE(len);
  CHECK(len->hi == 9);
  AbsState no = s;
  REQUIRE(tf.assume(no, br, false));
  CHECK(tf.strlen_of(no, tf.eval(no, Expr::ident("t"), "main"))->lo == 10);
}

TEST_CASE("strcmp against a literal fixes the content") {
  Program p = parse(
      "int main() {\n char a[20];\n read_line(a, 20);\n if (strcmp(a, \"go\") == 0) {\n print(a);\n }\n}\n");
  Transfer tf(p);
  AbsState s = replay(tf, p, {2, 3});
  const Stmt& br = *p.find_stmt(resolve_line(p, 4));
  CHECK(tf.condition(s, br) == Truth::Maybe);
  REQUIRE(tf.assume(s, br, true));
  CHECK(tf.condition(s, br) == Truth::True);
  CHECK(tf.strlen_of(s, tf.eval(s, Expr::ident("a"), "main")) == Interval::point(2));
}

TEST_CASE("double free and null") {
  Program p = parse("int main() {\n char* q = malloc(4);\n free(q);\n free(q);\n char* z;\n print(z);\n}\n");
  Transfer tf(p);
  FaultSpec df = analyze_fault(p, SourceLoc{"", 4, 0, kNoStmt});
  const Stmt& at = *p.find_stmt(df.fault_loc.stmt_id);
  AbsState once = replay(tf, p, {2});
  CHECK_FALSE(tf.derivable(once, df, at));
  AbsState s = replay(tf, p, {2, 3});
  CHECK(tf.derivable(s, df, at));
  FaultSpec nd = analyze_fault(p, SourceLoc{"", 6, 0, kNoStmt}, FaultType::NullDeref);
  AbsState g = replay(tf, p, {2, 3, 4, 5});
  CHECK(tf.derivable(g, nd, *p.find_stmt(nd.fault_loc.stmt_id)));
}

TEST_CASE("impossible branch is infeasible") {
  Program p = parse("int main() {\n int x = 3;\n if (x > 5) {\n print(x);\n }\n}\n");
  Transfer tf(p);
  AbsState s = replay(tf, p, {2});
  const Stmt& br = *p.find_stmt(resolve_line(p, 3));
  CHECK(tf.condition(s, br) == Truth::False);
  CHECK_FALSE(tf.assume(s, br, true));
  CHECK_FALSE(s.feasible);
}

#include <set>
#include "doctest.h"
#include "sigforge/frontend.hpp"

using namespace sigforge;

namespace {

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

const char* kSignature = R"(int main() {
  char* s = malloc(10);
  char t[100];
  read_line(t, 100);
  strcpy(s, t); // fault location
}
)";

int count_kind(const Program& p, StmtKind k) {
  int n = 0;
  for (const auto* s : p.all_statements()) n += s->kind == k;
  return n;
}

}  // namespace

TEST_CASE("parse minimal program") {
  Program p = parse("int main(){return 0;}");
  REQUIRE(p.functions.size() == 1);
  CHECK(p.functions[0].name == "main");
  CHECK(count_kind(p, StmtKind::Return) == 1);
  CHECK(p.functions[0].body.body.size() == 1);
}

TEST_CASE("parse bounds-checked strcpy") {
  Program p = parse(kConstantCopy, "constant_copy.mc");
  const FuncDef* main = p.find_function("main");
  REQUIRE(main);
  const Stmt* iff = nullptr;
  for (const auto& s : main->body.body) {
    if (s.kind == StmtKind::If) iff = &s;
  }
  REQUIRE(iff);
  CHECK(emit_expr(*iff->value) == "strlen(t) >= 10");
  REQUIRE(iff->body.size() == 1);
  const Stmt& then_stmt = iff->body[0].body.at(0);
  CHECK(then_stmt.kind == StmtKind::ExprStmt);
  CHECK(emit_expr(*then_stmt.value) == "strcpy(s, t)");
  CHECK(then_stmt.loc.line == 13);
  CHECK(then_stmt.loc.col == 5);
}

TEST_CASE("unbalanced block is a parse error on line 1") {
  try {
    parse("int main(){");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line == 1);
    CHECK(e.expected.find("unbalanced") != std::string::npos);
  }
}

TEST_CASE("malformed inputs report positions") {
  CHECK_THROWS_AS(parse("int main() { x = ; }"), ParseError);
  CHECK_THROWS_AS(parse("int main() { char t[3] = \"long\"; }"), ParseError);
  CHECK_THROWS_AS(parse("int main() { 1 = 2; }"), ParseError);
  CHECK_THROWS_AS(parse("int main() { int a[n]; }"), ParseError);
}

TEST_CASE("stmt ids are unique and stable") {
  Program a = parse(kConstantCopy);
  Program b = parse(kConstantCopy);
  auto sa = a.all_statements();
  auto sb = b.all_statements();
  REQUIRE(sa.size() == sb.size());
  std::set<StmtId> ids;
  for (std::size_t i = 0; i < sa.size(); ++i) {
    CHECK(sa[i]->loc.stmt_id == sb[i]->loc.stmt_id);
    CHECK(ids.insert(sa[i]->loc.stmt_id).second);
    if (sa[i]->kind != StmtKind::Block) CHECK(sa[i]->loc.line > 0);
  }
}

TEST_CASE("for is desugared to while") {
  Program p = parse("int main() { int s = 0; for (int i = 0; i < 3; i++) { s = s + i; } }");
  CHECK(count_kind(p, StmtKind::While) == 1);
  const Stmt* loop = nullptr;
  for (const auto* s : p.all_statements()) {
    if (s->kind == StmtKind::While) loop = s;
  }
  REQUIRE(loop);
  REQUIRE(loop->latch.size() == 1);
  CHECK(stmt_text(loop->latch[0]) == "i = i + 1;");
}

TEST_CASE("emit_source edge cases") {
  CHECK(emit_source(Program{}).empty());
  Program p = parse("int x;");
  CHECK(emit_source(p) == "int x;\n");
}

TEST_CASE("round trip preserves structure") {
  const char* sources[] = {
      kConstantCopy,
      kSignature,
      "int f(int n) { if (n <= 1) return 1; return n * f(n - 1); }\n"
      "int main() { int r = f(4); for (int i = 0; i < 3; i += 2) { if (i == 1) continue; r = r - -i; } "
      "while (!(r > 0 && r < 100 || r == 7)) { r = (r + 1) * 2 % 5; } assert(r != 3); return 0; }",
      "char g[8] = \"a\\n\\\"b\";\nint* p; int main() { char* q = g; *q = 'x'; p = NULL; exit(0); }",
  };
  for (const char* src : sources) {
    Program p1 = parse(src);
    std::string text = emit_source(p1);
    Program p2 = parse(text);
    CHECK_MESSAGE(structurally_equal(p1, p2), text);
    CHECK(emit_source(p2) == text);
  }
}

TEST_CASE("line resolution") {
  Program p = parse(kConstantCopy);
  StmtId id = resolve_line(p, 13);
  CHECK(p.find_stmt(id)->kind == StmtKind::ExprStmt);
  CHECK_THROWS_AS(resolve_line(p, 2), Error);
  Program two = parse("int main() { int a = 1; int b = 2; }");
  CHECK_THROWS_AS(resolve_line(two, 1), Error);
  CHECK(parse_loc_arg("ex.mc:13") == 13);
  CHECK_THROWS_AS(parse_loc_arg("ex.mc:x"), Error);
}

TEST_CASE("semantic checks") {
  CHECK_NOTHROW(check_program(parse(kConstantCopy)));
  CHECK_THROWS_AS(check_program(parse("int f() { return 1; } int main() { int x = f() + 1; }")), CheckError);
  CHECK_THROWS_AS(check_program(parse("int main() { strcpy(a); }")), CheckError);
  CHECK_THROWS_AS(check_program(parse("int main() { y = 1; }")), CheckError);
  CHECK_NOTHROW(check_program(parse("int main() { y = 1; }"), false));
}

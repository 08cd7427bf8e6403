#include "doctest.h"
#include "sigforge/fault.hpp"
#include "sigforge/frontend.hpp"

using namespace sigforge;

namespace {

SourceLoc at_line(int line) {
  SourceLoc l;
  l.line = line;
  return l;
}

const char* kSample = R"(char* dir_name;
int main() {
  char* s = malloc(10);
  char t[100];
  read_line(t, 100);
  strcpy(s, t);
  free(dir_name);
  int x = 1;
  x = x + 1;
  assert(x > 0);
  char* p = 0;
  *p = 'a';
  while (x < 10) {
    print("spin");
  }
  print(s);
  return 0;
}
)";

}  // namespace

TEST_CASE("fault type names round trip") {
  for (FaultType t : kAllFaultTypes) CHECK(parse_fault_type(to_string(t)) == t);
  CHECK(parse_fault_type("double-free") == FaultType::DoubleFree);
  CHECK_THROWS_AS(parse_fault_type("segv"), Error);
}

TEST_CASE("templates from the fault table") {
  Program p = parse(kSample, "s.mc");
  FaultSpec bo = analyze_fault(p, at_line(6));
  CHECK(bo.fault_type == FaultType::BufferOverflow);
  CHECK(emit_expr(*bo.condition.str) == "t");
  CHECK(emit_expr(*bo.condition.buf) == "s");
  CHECK(bo.fault_loc.file == "s.mc");

  FaultSpec df = analyze_fault(p, at_line(7));
  CHECK(df.fault_type == FaultType::DoubleFree);
  CHECK(emit_expr(*df.condition.ptr) == "dir_name");

  CHECK_THROWS_AS(analyze_fault(p, at_line(9)), NoTemplateMatch);

  FaultSpec av = analyze_fault(p, at_line(10));
  CHECK(av.fault_type == FaultType::AssertViolation);

  FaultSpec nd = analyze_fault(p, at_line(12));
  CHECK(nd.fault_type == FaultType::NullDeref);
  CHECK(emit_expr(*nd.condition.ptr) == "p");

  FaultSpec il = analyze_fault(p, at_line(13));
  CHECK(il.fault_type == FaultType::InfiniteLoop);
  CHECK(il.condition.ind == std::vector<std::string>{"x"});   // nothing assigned in the body

  FaultSpec rl = analyze_fault(p, at_line(16), FaultType::ResourceLeak);
  CHECK(emit_expr(*rl.condition.r) == "s");
}

TEST_CASE("priority and hint") {
  Program p = parse("int main() { char* q = malloc(4); char t[8]; strcpy(q, t); }");
  Program multi = parse("int main() {\n char* q = malloc(4);\n char t[8];\n strcpy(q, t);\n}\n");
  auto types = matching_templates(multi, *multi.statements_on_line(4).front());
  REQUIRE(types.size() == 3);
  CHECK(types[0] == FaultType::BufferOverflow);
  CHECK(types[1] == FaultType::NullDeref);
  CHECK(types[2] == FaultType::ResourceLeak);
  CHECK(analyze_fault(multi, at_line(4)).fault_type == FaultType::BufferOverflow);
  CHECK(analyze_fault(multi, at_line(4), FaultType::NullDeref).fault_type == FaultType::NullDeref);
  CHECK_THROWS_AS(analyze_fault(multi, at_line(4), FaultType::DoubleFree), NoTemplateMatch);
  CHECK_THROWS_AS(analyze_fault(p, at_line(1)), AmbiguousLocation);
}

TEST_CASE("induction set uses assigned condition variables") {
  Program p = parse("int main() {\n int i = 0; int n = 5;\n while (i < n) {\n i = i + 1;\n }\n}\n");
  FaultSpec s = analyze_fault(p, at_line(3));
  CHECK(s.condition.ind == std::vector<std::string>{"i"});
}

TEST_CASE("determinism and json") {
  Program p = parse(kSample, "s.mc");
  auto a = analyze_fault(p, at_line(6)).to_json();
  auto b = analyze_fault(p, at_line(6)).to_json();
  CHECK(a == b);
  CHECK(a["type"] == "BufferOverflow");
  CHECK(a["loc"]["line"] == 6);
  CHECK(a["condition"]["buf"] == "s");
}

#include <algorithm>

#include "doctest.h"
#include "sigforge/frontend.hpp"
#include "sigforge/interp.hpp"
#include "sigforge/path.hpp"

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

const char* kInputCopy = R"(char x[40];

void bar() {
  print("bar");
}

int main() {
  char* s = malloc(10);
  char t[100];
  read_line(t, 100);
  x[20] = 'a';
  bar();
  if (strlen(x) < 10) {
    strcpy(s, t);
  } else {
    strcat(x, t);
  }
  return 0;
}
)";

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

std::vector<int> lines_of(const Program& p, const std::vector<StmtId>& ids) {
  std::vector<int> out;
  for (StmtId id : ids) out.push_back(p.find_stmt(id)->loc.line);
  return out;
}

FaultyPathSegment segment_at(const Program& p, int line, std::optional<FaultType> hint = std::nullopt) {
  FaultSpec f = analyze_fault(p, SourceLoc{p.file, line, 0, kNoStmt}, hint);
  return find_faulty_path(p, f);
}

// Smallest sufficient subsequence of the witness that ends at the fault.
std::size_t exhaustive_minimum(const Program& p, const FaultyPathSegment& seg) {
  const auto& w = seg.witness;
  std::size_t n = w.size() - 1;
  REQUIRE(n <= 16);
  std::size_t best = w.size();
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    auto count = static_cast<std::size_t>(__builtin_popcount(mask)) + 1;
    if (count >= best) continue;
    std::vector<SegmentNode> nodes;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1u << i)) nodes.push_back(w[i]);
    }
    nodes.push_back(w.back());
    if (verify_sufficiency(p, nodes, seg.fault)) best = count;
  }
  return best;
}

}  // namespace

TEST_CASE("constant overflow keeps allocation, string, check and copy") {
  Program p = parse(kConstantCopy, "constant_copy.mc");
  FaultyPathSegment seg = segment_at(p, 13);
  CHECK(lines_of(p, seg.stmt_ids()) == std::vector<int>{8, 9, 12, 13});
  CHECK(is_subsequence(seg.stmt_ids(), seg.witness_ids()));
  CHECK(seg.entry_node() == resolve_line(p, 8));
  CHECK(seg.nodes.back().stmt == seg.fault.fault_loc.stmt_id);
  CHECK(exhaustive_minimum(p, seg) == seg.nodes.size());
  CHECK(brute_force_minimum(p, seg) == std::optional<std::size_t>(seg.nodes.size()));
}

TEST_CASE("input-driven overflow drops the unrelated bounds check") {
  Program p = parse(kInputCopy, "input_copy.mc");
  FaultyPathSegment seg = segment_at(p, 14);
  CHECK(lines_of(p, seg.stmt_ids()) == std::vector<int>{8, 10, 14});
  CHECK(exhaustive_minimum(p, seg) == seg.nodes.size());
  CHECK(brute_force_minimum(p, seg) == std::optional<std::size_t>(seg.nodes.size()));
}

TEST_CASE("data-dependent but irrelevant nodes are filtered") {
  Program p = parse(kMergedBranch, "merged_branch.mc");
  FaultyPathSegment seg = segment_at(p, 15);
  CHECK(lines_of(p, seg.stmt_ids()) == std::vector<int>{4, 5, 8, 15});
  CHECK(lines_of(p, seg.witness_ids()) == std::vector<int>{4, 5, 6, 7, 8, 9, 14, 15});
  CHECK(exhaustive_minimum(p, seg) == seg.nodes.size());
  CHECK(brute_force_minimum(p, seg) == std::optional<std::size_t>(seg.nodes.size()));
}

TEST_CASE("corrected bounds check has no faulty path") {
  std::string fixed = kConstantCopy;
  fixed.replace(fixed.find("strlen(t) >= 10"), 15, "strlen(t) < 10");
  Program p = parse(fixed, "fixed.mc");
  CHECK_THROWS_AS(segment_at(p, 13), NoFaultyPath);
}

TEST_CASE("sufficiency of hand-built sequences") {
  Program p = parse(kConstantCopy, "constant_copy.mc");
  FaultyPathSegment seg = segment_at(p, 13);
  CHECK(verify_sufficiency(p, seg.nodes, seg.fault));
  std::vector<SegmentNode> alone{seg.nodes.back()};
  CHECK_FALSE(verify_sufficiency(p, alone, seg.fault));
  // already minimal: unchanged
  CHECK(minimize_segment(p, seg).nodes == seg.nodes);
}

TEST_CASE("double free needs loop iterations") {
  Program p = parse(R"(char* d;
int main() {
  char b[20];
  while (read_line(b, 20) >= 0) {
    if (d != 0) {
      free(d);
    }
    if (strcmp(b, "new") == 0) {
      d = malloc(4);
    }
  }
  return 0;
}
)", "df.mc");
  FaultyPathSegment seg = segment_at(p, 6);
  CHECK(seg.fault.fault_type == FaultType::DoubleFree);
  // allocate, then two frees guarded by the null check
  CHECK(lines_of(p, seg.stmt_ids()) == std::vector<int>{9, 5, 6, 5, 6});
  ExecOutcome o = run(p, "new\nx\ny\n");
  CHECK(o.verdict.is_fault(FaultType::DoubleFree, seg.fault.fault_loc.stmt_id));
}

TEST_CASE("infinite loop segment ends at the repeated header") {
  Program p = parse(R"(int main() {
  char buf[50];
  int len = read_line(buf, 50);
  int pos = 0;
  while (pos < len) {
    if (buf[pos] == ' ') {
      pos = pos + 1;
    }
  }
  return 0;
}
)", "loop.mc");
  FaultyPathSegment seg = segment_at(p, 5);
  CHECK(seg.fault.fault_type == FaultType::InfiniteLoop);
  CHECK(lines_of(p, seg.stmt_ids()) == std::vector<int>{3, 4, 5, 5});
}

TEST_CASE("assertion and null dereference") {
  Program a = parse("int main() {\n char b[8];\n int n = read_line(b, 8);\n int k = n * 2;\n assert(k < 10);\n}\n");
  FaultyPathSegment sa = segment_at(a, 5);
  CHECK(lines_of(a, sa.stmt_ids()) == std::vector<int>{3, 4, 5});

  Program nd = parse("int main() {\n char* p = 0;\n int c = 1;\n if (c > 0) {\n p = malloc(3);\n }\n print(*p);\n}\n");
  CHECK_THROWS_AS(segment_at(nd, 7, FaultType::NullDeref), NoFaultyPath);
}

TEST_CASE("leak reported at the last use") {
  Program p = parse("int main() {\n char* c = malloc(4);\n strcpy(c, \"ab\");\n print(c);\n return 0;\n}\n");
  FaultyPathSegment seg = segment_at(p, 4, FaultType::ResourceLeak);
  CHECK(lines_of(p, seg.stmt_ids()) == std::vector<int>{2, 4});
}

TEST_CASE("budget") {
  Program p = parse(kInputCopy, "input_copy.mc");
  FaultSpec f = analyze_fault(p, SourceLoc{p.file, 14, 0, kNoStmt});
  ExplorationBudget tiny;
  tiny.max_paths = 0;
  CHECK_THROWS_AS(find_faulty_path(p, f, tiny), BudgetExhausted);
  ExplorationBudget big;
  big.max_paths = 1'000'000;
  CHECK(find_faulty_path(p, f, big).stmt_ids() == find_faulty_path(p, f).stmt_ids());
}

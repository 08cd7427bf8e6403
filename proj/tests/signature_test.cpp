#include <cstdlib>
#include <fstream>

#include "doctest.h"
#include "sigforge/frontend.hpp"
#include "sigforge/signature.hpp"

using namespace sigforge;

namespace {

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

const char* kDirs = R"(char* dir_name;

void dirswitch(char* dir) {
  if (dir_name != 0) {
    free(dir_name);
  }
  int n = strlen(dir);
  if (n > 0 && dir[n - 1] == '/') {
    return;
  }
  dir_name = malloc(n + 1);
  strcpy(dir_name, dir);
}

int main() {
  char cmd[100];
  while (read_line(cmd, 100) >= 0) {
    if (cmd[0] == 'D' && cmd[1] == ' ') {
      dirswitch(cmd + 2);
    }
  }
  return 0;
}
)";

FaultSignature extract(const Program& p, int line, std::optional<FaultType> hint = std::nullopt) {
  FaultSpec f = analyze_fault(p, SourceLoc{p.file, line, 0, kNoStmt}, hint);
  return synthesize(find_faulty_path(p, f), p);
}

std::vector<std::string> body_lines(const FaultSignature& sig) {
  std::vector<std::string> out;
  for (const auto& s : sig.program.find_function("main")->body.body) out.push_back(stmt_text(s));
  return out;
}

}  // namespace

TEST_CASE("input-driven overflow signature") {
  Program p = parse(kInputCopy, "input_copy.mc");
  FaultSignature sig = extract(p, 14);
  CHECK(body_lines(sig) ==
        std::vector<std::string>{"char* s = malloc(10);", "char t[100];", "read_line(t, 100);", "strcpy(s, t);"});
  CHECK(sig.program.globals.empty());
  CHECK(sig.fault.fault_type == FaultType::BufferOverflow);
  CHECK(sig.manifest.fault_loc_signature.line == 5);
  CHECK(sig.manifest.origin_of_line(3) == kNoStmt);   // scaffold declaration
  CHECK(sig.manifest.segment_origins() == std::vector<StmtId>{resolve_line(p, 8), resolve_line(p, 10),
                                                              resolve_line(p, 14)});
  CHECK(run(sig.program, "hello world\n").verdict.is_fault(FaultType::BufferOverflow, sig.fault.fault_loc.stmt_id));
  CHECK(run(sig.program, "hi\n").verdict.kind == VerdictKind::NormalExit);

  // substitution enters at the malloc and transfers t
  SubstitutedOutcome r = run_substituted(p, sig.program, sig.plan(), "hello world\n");
  CHECK(r.entered_signature);
  CHECK(r.outcome.verdict.is_fault(FaultType::BufferOverflow, sig.fault.fault_loc.stmt_id));
}

TEST_CASE("manifest round trip and line map") {
  Program p = parse(kInputCopy, "input_copy.mc");
  FaultSignature sig = extract(p, 14);
  nlohmann::json j = sig.manifest.to_json();
  CHECK(j["line_map"][1]["origin"] == "scaffold");
  CHECK(j["fault"]["type"] == "BufferOverflow");
  SignatureManifest back = SignatureManifest::from_json(j);
  CHECK(back.line_map == sig.manifest.line_map);
  FaultSignature again = load_signature(sig.source, back);
  CHECK(again.fault.fault_loc.stmt_id == sig.fault.fault_loc.stmt_id);
  CHECK(again.plan().entry_original == sig.plan().entry_original);
}

TEST_CASE("flattened double free across calls") {
  Program p = parse(kDirs, "dirs.mc");
  check_program(p);
  FaultSignature sig = extract(p, 5);
  INFO(sig.source);
  CHECK(sig.fault.fault_type == FaultType::DoubleFree);
  CHECK(sig.program.functions.size() == 1);
  ExecOutcome o = run(sig.program, "");
  CHECK(o.verdict.is_fault(FaultType::DoubleFree, sig.fault.fault_loc.stmt_id));
  // segment lines follow the segment order
  FaultSpec f = analyze_fault(p, SourceLoc{p.file, 5, 0, kNoStmt});
  FaultyPathSegment seg = find_faulty_path(p, f);
  CHECK(sig.manifest.segment_origins() == seg.stmt_ids());
  // original failing run contains the signature's mapped trace
  ExecOutcome orig = run(p, "D a\nD b/\nD c\n");
  REQUIRE(orig.verdict.is_fault(FaultType::DoubleFree, f.fault_loc.stmt_id));
  CHECK(is_subsequence(sig.mapped_trace(o.trace), orig.trace));
}

TEST_CASE("infinite loop signature keeps the bare loop") {
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
  FaultSignature sig = extract(p, 5);
  INFO(sig.source);
  auto lines = body_lines(sig);
  CHECK(std::find(lines.begin(), lines.end(), "while (pos < len)") != lines.end());
  CHECK(run(sig.program, "ab\n").verdict.fault == FaultType::InfiniteLoop);
  CHECK(sig.manifest.segment_origins().size() == 4);
}

TEST_CASE("self-sufficient assertion") {
  Program p = parse("int main() {\n int a = 1;\n assert(0);\n}\n");
  FaultSignature sig = extract(p, 3);
  CHECK(sig.source == "int main() {\n  assert(0);\n}\n");
}

TEST_CASE("C export is deterministic and compiles") {
  Program p = parse(kInputCopy, "input_copy.mc");
  FaultSignature sig = extract(p, 14);
  std::string c = export_c(sig);
  CHECK(c == export_c(extract(p, 14)));
  CHECK(c.find("int read_line(char* buf, int n)") != std::string::npos);
  if (std::system("cc --version > /dev/null 2>&1") == 0) {
    std::ofstream("sig_export_test.c") << c;
    CHECK(std::system("cc -std=c99 -Wall -Werror -fsyntax-only sig_export_test.c") == 0);
  }
}

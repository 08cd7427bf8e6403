#include "doctest.h"
#include "sigforge/frontend.hpp"
#include "sigforge/patch.hpp"
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

// Input copy with the buffer printed at the end, so the else branch is observable.
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
  print(x);
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

FaultSignature signature_at(const Program& p, int line) {
  FaultSpec f = analyze_fault(p, SourceLoc{p.file, line, 0, kNoStmt});
  return synthesize(find_faulty_path(p, f), p);
}

StmtId sig_stmt(const FaultSignature& sig, const std::string& text) {
  for (const Stmt* s : sig.program.all_statements()) {
    if (s->kind != StmtKind::Block && stmt_text(*s) == text) return s->loc.stmt_id;
  }
  return kNoStmt;
}

Patch one(StmtId target, int line, EditAction a, std::string text) {
  Patch p;
  p.edits.push_back({target, line, a, std::move(text)});
  return p;
}

}  // namespace

TEST_CASE("bounds check patch transfers onto the signature and fixes both") {
  Program p = parse(kConstantCopy, "constant_copy.mc");
  FaultSpec f = analyze_fault(p, SourceLoc{p.file, 13, 0, kNoStmt});
  FaultSignature sig = synthesize(find_faulty_path(p, f), p);
  Patch dev = one(kNoStmt, 12, EditAction::Replace, "if (strlen(t) < 10)").resolved(p);
  FaultSignature fixed = transfer_patch(dev, sig);
  CHECK(fixed.source.find("if (strlen(t) < 10) {") != std::string::npos);
  CHECK(fixed.manifest.segment_origins() == sig.manifest.segment_origins());
  CHECK(fixed.manifest.fault_loc_signature.line == sig.manifest.fault_loc_signature.line);
  CHECK(run(sig.program, "").verdict.is_fault());
  CHECK(run(fixed.program, "").verdict.kind == VerdictKind::NormalExit);
  Program patched = apply_patch(p, dev);
  auto c = classify_patch_effect(p, patched, f, {""}, {});
  CHECK(c.effect == PatchEffect::Fix);
}

TEST_CASE("patch on the safe path cannot be transferred") {
  Program p = parse(kMergedBranch, "merged_branch.mc");
  FaultSignature sig = signature_at(p, 15);
  CHECK_THROWS_AS(transfer_patch(one(kNoStmt, 11, EditAction::Replace, "k = 2;").resolved(p), sig), CannotPatch);
  CHECK_THROWS_AS(transfer_patch(one(kNoStmt, 12, EditAction::Delete, "").resolved(p), sig), CannotPatch);
}

TEST_CASE("empty patch is the identity") {
  Program p = parse(kMergedBranch, "merged_branch.mc");
  FaultSignature sig = signature_at(p, 15);
  FaultSignature same = transfer_patch(Patch{}, sig);
  CHECK(same.source == sig.source);
  CHECK(same.manifest.to_json() == sig.manifest.to_json());
  CHECK(emit_source(apply_patch(p, Patch{})) == emit_source(p));
}

TEST_CASE("signature guard lifted to the original leaves a side effect") {
  Program p = parse(kInputCopy, "input_copy.mc");
  FaultSpec f = analyze_fault(p, SourceLoc{p.file, 14, 0, kNoStmt});
  FaultSignature sig = synthesize(find_faulty_path(p, f), p);
  StmtId target = sig_stmt(sig, "strcpy(s, t);");
  REQUIRE(target != kNoStmt);
  Patch guard = one(target, 0, EditAction::Replace, "if (strlen(t) < 10) { strcpy(s, t); }");
  Patch lifted = lift_patch(guard, sig);
  REQUIRE(lifted.edits.size() == 1);
  CHECK(lifted.edits[0].target == f.fault_loc.stmt_id);
  Program patched = apply_patch(p, lifted);
  Program reference = apply_patch(p, one(kNoStmt, 13, EditAction::Replace, "if (strlen(t) < 10)"));
  std::vector<std::string> failing{"hello world\n"};
  std::vector<std::string> passing{"hi\n"};
  REQUIRE(run(p, failing[0]).verdict.is_fault(FaultType::BufferOverflow, f.fault_loc.stmt_id));
  auto with_ref = classify_patch_effect(p, patched, f, failing, passing, &reference);
  CHECK(with_ref.effect == PatchEffect::FixWithSideEffect);
  CHECK(with_ref.changed == failing);
  auto correct = classify_patch_effect(p, reference, f, failing, passing, &reference);
  CHECK(correct.effect == PatchEffect::Fix);
}

TEST_CASE("unrelated edit is not a fix") {
  Program p = parse(kConstantCopy, "constant_copy.mc");
  FaultSpec f = analyze_fault(p, SourceLoc{p.file, 13, 0, kNoStmt});
  Program patched = apply_patch(p, one(kNoStmt, 4, EditAction::Replace, "print(\"baz\");"));
  auto c = classify_patch_effect(p, patched, f, {""}, {});
  CHECK(c.effect == PatchEffect::NotAFix);
  CHECK(c.still_failing.size() == 1);
}

TEST_CASE("insert and delete edits and patch json") {
  Program p = parse("int main() {\n  int a = 1;\n  print(a);\n}\n", "e.mc");
  Patch q;
  q.edits.push_back({kNoStmt, 2, EditAction::InsertAfter, "a = a + 1;"});
  q.edits.push_back({kNoStmt, 3, EditAction::InsertBefore, "print(0);"});
  Program r = apply_patch(p, q);
  CHECK(run(r, "").output == "0\n2\n");
  Patch back = Patch::from_json(q.to_json());
  CHECK(back.to_json() == q.to_json());
  Program d = apply_patch(p, one(kNoStmt, 3, EditAction::Delete, ""));
  CHECK(run(d, "").output.empty());
  CHECK_THROWS_AS(apply_patch(p, one(kNoStmt, 3, EditAction::Replace, "print(b);")), CannotPatch);
}

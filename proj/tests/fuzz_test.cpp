#include <set>

#include "doctest.h"
#include "sigforge/frontend.hpp"
#include "sigforge/fuzz.hpp"
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

// argv arrives as the first record; the second word must be "proceed".
const char* kGatedInput = R"(char x[40];

void bar() {
  print("bar");
}

int main() {
  char args[100];
  read_line(args, 100);
  int i = 0;
  while (args[i] != ' ' && args[i] != 0) {
    i = i + 1;
  }
  if (args[i] == 0) {
    exit(0);
  }
  if (strcmp(args + i + 1, "proceed") != 0) {
    exit(0);
  }
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

FaultSignature signature_of(const Program& p, int line, FaultSpec* fault = nullptr) {
  FaultSpec f = analyze_fault(p, SourceLoc{p.file, line, 0, kNoStmt});
  if (fault) *fault = f;
  return synthesize(find_faulty_path(p, f), p);
}

FuzzCampaign campaign(const FaultSignature& sig, std::uint64_t seed = 42) {
  FuzzCampaign c;
  c.target = sig.program;
  c.oracle = sig.fault;
  c.rng_seed = seed;
  c.budget.max_iterations = 10'000;
  return c;
}

std::size_t first_record_length(const std::string& in) { return split_records(in).empty() ? 0 : split_records(in)[0].size(); }

}  // namespace

TEST_CASE("mutators are total and deterministic") {
  std::vector<std::string> dict{"Directory", "./"};
  for (Mutator m : kAllMutators) {
    for (const std::string in : {"", "a", "ab\ncd", "x 12 y\n7"}) {
      Rng a(7);
      Rng b(7);
      std::string x = mutate(m, in, a, dict);
      CHECK(x == mutate(m, in, b, dict));
      CHECK(x.find('\0') == std::string::npos);
    }
  }
  Rng r(1);
  CHECK(mutate(Mutator::ArithmeticPerturb, "abc", r, dict) == "abc");
  CHECK(mutate(Mutator::RecordDelete, "", r, dict).empty());
}

TEST_CASE("overflow threshold of the read_line signature") {
  Program p = parse(kInputCopy, "input_copy.mc");
  FaultSignature sig = signature_of(p, 14);
  int threshold = -1;
  for (int len = 0; len <= 100; ++len) {
    if (matches_oracle(run(sig.program, std::string(static_cast<std::size_t>(len), 'a') + "\n"), sig.fault)) {
      threshold = len;
      break;
    }
  }
  CHECK(threshold == 10);
  FuzzCampaign done = fuzz(campaign(sig));
  REQUIRE(done.findings.size() == 1);
  CHECK(first_record_length(done.findings[0].input) >= 10);
  CHECK(matches_oracle(run(sig.program, done.findings[0].input), sig.fault));

  FuzzCampaign again = fuzz(campaign(sig));
  CHECK(again.findings[0].input == done.findings[0].input);
  CHECK(again.findings[0].iteration == done.findings[0].iteration);
  FuzzCampaign parallel = campaign(sig);
  parallel.workers = 4;
  parallel = fuzz(parallel);
  CHECK(parallel.findings[0].input == done.findings[0].input);
  CHECK(parallel.findings[0].iteration == done.findings[0].iteration);
}

TEST_CASE("patched signature yields no findings") {
  Program p = parse(kConstantCopy, "constant_copy.mc");
  FaultSignature sig = signature_of(p, 13);
  Patch dev;
  dev.edits.push_back({kNoStmt, 12, EditAction::Replace, "if (strlen(t) < 10)"});
  FaultSignature fixed = transfer_patch(dev.resolved(p), sig);
  CHECK(!fuzz(campaign(sig)).findings.empty());
  FuzzCampaign c = fuzz(campaign(fixed));
  CHECK(c.findings.empty());
  CHECK(c.exhausted);
  CHECK(c.iterations == 10'000);
}

TEST_CASE("seed synthesis") {
  Program p = parse(kInputCopy, "input_copy.mc");
  auto seeds = synthesize_seeds(p, 42, 20);
  CHECK(seeds.size() == 20);
  for (const auto& s : seeds) CHECK(s.size() <= 99);
  CHECK(synthesize_seeds(p, 42, 3) == synthesize_seeds(p, 42, 3));
  Program cvs = parse(R"(int main() {
  char line[64];
  while (read_line(line, 64) >= 0) {
    if (strncmp_dir(line) == 1) {
      print("dir");
    }
  }
}
int strncmp_dir(char* l) {
  if (strcmp(l, "Directory") == 0) {
    return 1;
  }
  return 0;
}
)", "cvs.mc");
  auto dict = harvest_dictionary(cvs);
  CHECK(std::find(dict.begin(), dict.end(), "Directory") != dict.end());
}

TEST_CASE("input relations") {
  Program p32 = parse(kInputCopy, "input_copy.mc");
  FaultSpec f32;
  FaultSignature s32 = signature_of(p32, 14, &f32);
  CHECK(classify_input_relation(p32, f32, s32, "hello world\n", {}).relation == InputRelation::Same);

  Program p6 = parse(kGatedInput, "gated_input.mc");
  FaultSpec f6;
  FaultSignature s6 = signature_of(p6, 26, &f6);
  REQUIRE(matches_oracle(run(s6.program, "hello world\n"), s6.fault));
  CHECK(classify_input_relation(p6, f6, s6, "hello world\n", {}).relation == InputRelation::Unknown);
  CHECK(classify_input_relation(p6, f6, s6, "hello world\n", {"a.exe stop\n"}).relation == InputRelation::Unknown);
  RelationResult r = classify_input_relation(p6, f6, s6, "hello world\n", {"a.exe stop\n", "a.exe proceed\n"});
  CHECK(r.relation == InputRelation::Partial);
  CHECK(r.combined == "a.exe proceed\nhello world\n");
  CHECK(matches_oracle(run(p6, r.combined), f6));
}

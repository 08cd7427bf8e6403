#include <filesystem>
#include <fstream>
#include <map>

#include "doctest.h"
#include "sigforge/corpus.hpp"

using namespace sigforge;
namespace fs = std::filesystem;

TEST_CASE("config parsing") {
  Config c = Config::parse("# comment\nunroll = 2\n\nfuzz_budget=500\nseed = 7\n");
  CHECK(c.unroll == 2);
  CHECK(c.fuzz_budget == 500);
  CHECK(c.seed == 7);
  CHECK(c.path_budget == 50'000);
  CHECK_THROWS_AS(Config::parse("colour = blue\n"), Error);
  CHECK_THROWS_AS(Config::parse("unroll = many\n"), Error);
  CHECK_THROWS_AS(Config::parse("unroll\n"), Error);
}

TEST_CASE("checked-in config matches the documented defaults") {
  Config c = Config::load(fs::path(SIGFORGE_SOURCE_DIR) / "sigforge.toml");
  CHECK(c.unroll == 3);
  CHECK(c.fuzz_budget == 10'000);
  CHECK(c.seed == 42);
}

TEST_CASE("corpus covers every fault type and validates") {
  auto corpus = load_corpus(default_corpus_dir());
  REQUIRE(corpus.size() >= 12);
  std::map<FaultType, int> per_type;
  for (const auto& c : corpus) {
    CAPTURE(c.name);
    ++per_type[c.fault.fault_type];
    CHECK_NOTHROW(validate_case(c));
  }
  for (FaultType t : {FaultType::BufferOverflow, FaultType::NullDeref, FaultType::DoubleFree,
                      FaultType::ResourceLeak, FaultType::InfiniteLoop, FaultType::AssertViolation}) {
    CAPTURE(to_string(t));
    CHECK(per_type[t] >= 2);
  }
}

TEST_CASE("fixture input shapes") {
  std::map<std::string, CorpusCase> by_name;
  for (auto& c : load_corpus(default_corpus_dir())) by_name.emplace(c.name, c);
  REQUIRE(by_name.count("cvs_dirswitch"));
  const auto& cvs = by_name.at("cvs_dirswitch");
  auto recs = split_records(cvs.failing_input);
  REQUIRE(recs.size() == 3);
  CHECK(recs[1].ends_with(" ./"));
  CHECK(recs[2].ends_with(" ./"));
  CHECK(by_name.at("gated_input_overflow").expected_relation == InputRelation::Partial);
  CHECK(by_name.at("constant_copy_overflow").failing_input.empty());
}

TEST_CASE("broken fixture is rejected") {
  fs::path dir = fs::temp_directory_path() / "sigforge_corpus_test" / "bad";
  fs::create_directories(dir);
  std::ofstream(dir / "program.mc") << "int main() {\n  char b[4];\n  strcpy(b, \"ab\");\n  return 0;\n}\n";
  std::ofstream(dir / "case.json") << R"({"name": "bad", "fault": {"line": 3, "type": "BufferOverflow"},
    "failing_input": "", "expected_relation": "Same"})";
  CorpusCase c = load_case(dir);
  CHECK_THROWS_AS(validate_case(c), Error);
  fs::remove_all(dir.parent_path());
}

TEST_CASE("generate copies and indexes the fixtures") {
  fs::path out = fs::temp_directory_path() / "sigforge_corpus_gen";
  fs::remove_all(out);
  auto cases = generate_corpus(out, 42);
  CHECK(cases.size() == load_corpus(default_corpus_dir()).size());
  CHECK(fs::exists(out / "corpus.json"));
  CHECK(load_corpus(out).size() == cases.size());
  fs::remove_all(out);
}

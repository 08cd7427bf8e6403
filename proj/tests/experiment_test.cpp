#include <algorithm>

#include "doctest.h"
#include "sigforge/experiment.hpp"

using namespace sigforge;

namespace {

std::vector<CorpusCase> only(const std::vector<std::string>& names) {
  auto all = load_corpus(default_corpus_dir());
  std::erase_if(all, [&](const CorpusCase& c) { return std::find(names.begin(), names.end(), c.name) == names.end(); });
  return all;
}

Config small() {
  Config c;
  c.fuzz_budget = 2000;
  c.workers = 2;
  return c;
}

}  // namespace

TEST_CASE("empty corpus gives an empty report") {
  ExperimentReport r = run_experiments({}, small());
  CHECK(r.rows.empty());
  CHECK(r.aggregates()["cases"] == 0);
  CHECK(r.aggregates()["signature_found"] == 0);
}

TEST_CASE("merged branch fixture row") {
  ExperimentReport r = run_experiments(only({"merged_branch_overflow"}), small());
  REQUIRE(r.rows.size() == 1);
  const CaseRow& row = r.rows[0];
  CHECK(row.error.empty());
  CHECK(row.segment_lines == std::vector<int>{4, 5, 8, 15});
  CHECK(row.static_slice_nodes == 10);
  CHECK(row.dynamic_slice_nodes == 8);
  CHECK(row.reproduced_by_test);
  CHECK(row.reproduced_by_substitution);
  CHECK(row.subsequence);
  CHECK(row.minimal);
  CHECK(row.brute_force_size == std::optional<std::size_t>(4));
  CHECK(row.patch_validated);
}

TEST_CASE("aggregates are column sums and the report is deterministic") {
  auto corpus = only({"input_copy_overflow", "gated_input_overflow", "leak_overwrite", "findutils_mtime"});
  ExperimentReport a = run_experiments(corpus, small());
  Config one = small();
  one.workers = 1;
  ExperimentReport b = run_experiments(corpus, one);
  CHECK(a.to_json().dump() != "");
  CHECK(a.to_json()["rows"] == b.to_json()["rows"]);
  auto agg = a.aggregates();
  std::size_t transferred = 0;
  std::size_t sig_found = 0;
  for (const auto& row : a.rows) {
    transferred += row.patch_transferred;
    sig_found += row.fuzz_sig_found;
  }
  CHECK(agg["patch_transferred"] == transferred);
  CHECK(agg["fuzz_sig_found"] == sig_found);
  CHECK(std::is_sorted(a.rows.begin(), a.rows.end(), [](const CaseRow& x, const CaseRow& y) { return x.name < y.name; }));
}

TEST_CASE("side effect and untransferable patches are reported") {
  ExperimentReport r = run_experiments(only({"input_copy_overflow"}), small());
  REQUIRE(r.rows.size() == 1);
  CHECK_FALSE(r.rows[0].patch_transferred);
  CHECK_FALSE(r.rows[0].patch_error.empty());
  CHECK(r.rows[0].signature_patch_effect == "FixWithSideEffect");
}

TEST_CASE("csv has a header and one record per row") {
  ExperimentReport r = run_experiments(only({"constant_copy_overflow", "session_state"}), small());
  std::string csv = r.to_csv();
  CHECK(csv.starts_with("approximate,"));
  CHECK(csv.find(",constant_copy_overflow,") != std::string::npos);
  CHECK(csv.find(",session_state,") != std::string::npos);
  // inputs with newlines are quoted
  CHECK(csv.find("\"close\n\"") != std::string::npos);
}

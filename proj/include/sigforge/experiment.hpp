#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sigforge/corpus.hpp"

namespace sigforge {

struct CaseRow {
  std::string name;
  std::string fault_type;
  std::string error;                 // first stage that threw, with its message

  bool signature_found = false;
  bool approximate = false;
  std::vector<int> segment_lines;    // original lines of the segment nodes
  std::vector<int> signature_lines;  // signature lines realizing them
  std::string satisfying_input;
  bool reproduced_by_test = false;
  bool reproduced_by_substitution = false;
  bool subsequence = false;
  bool minimal = false;              // no single node can be dropped
  std::optional<std::size_t> brute_force_size;   // segments of at most 8 nodes

  int original_loc = 0;
  int signature_loc = 0;
  int slice_loc = 0;
  int original_cyclomatic = 0;
  int signature_cyclomatic = 0;
  std::size_t static_slice_nodes = 0;
  std::size_t dynamic_slice_nodes = 0;

  bool patch_present = false;
  bool patch_transferred = false;
  std::string patch_error;
  bool patch_validated = false;      // transferred, and fuzzing the patched signature finds nothing
  std::size_t patched_fuzz_findings = 0;
  std::string patch_effect;          // developer patch on the original
  std::string signature_patch_effect;

  bool fuzz_sig_found = false;
  bool fuzz_orig_found = false;
  std::size_t fuzz_sig_iterations = 0;
  std::size_t fuzz_orig_iterations = 0;

  std::string relation;
  std::string expected_relation;

  nlohmann::json to_json() const;
};

struct ExperimentReport {
  std::uint64_t seed = 0;
  Config config;
  std::vector<CaseRow> rows;   // sorted by name

  nlohmann::json aggregates() const;
  nlohmann::json to_json() const;
  std::string to_csv() const;
  std::string to_table() const;
};

CaseRow run_case(const CorpusCase& c, const Config& config);

/// Every case runs the full pipeline; failures are recorded per row.
ExperimentReport run_experiments(const std::vector<CorpusCase>& corpus, const Config& config);

}  // namespace sigforge

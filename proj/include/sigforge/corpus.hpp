#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sigforge/ast.hpp"
#include "sigforge/fault.hpp"
#include "sigforge/fuzz.hpp"
#include "sigforge/patch.hpp"

namespace sigforge {

/// Flat `key = value` settings (sigforge.toml). Unknown keys are rejected.
struct Config {
  int unroll = 3;
  std::size_t path_budget = 50'000;
  std::uint64_t step_limit = 1'000'000;
  std::size_t fuzz_budget = 10'000;
  std::uint64_t fuzz_step_limit = 100'000;
  std::uint64_t seed = 42;
  unsigned workers = 1;

  static Config parse(const std::string& text);
  static Config load(const std::filesystem::path& file);
  void set(const std::string& key, const std::string& value);
  nlohmann::json to_json() const;
};

/// A patch written against the signature, located by the text of the
/// signature statement it edits.
struct SignaturePatchSpec {
  std::string match;
  EditAction action = EditAction::Replace;
  std::string text;
  std::optional<PatchEffect> expected_effect;
};

struct CorpusCase {
  std::string name;
  std::string description;
  std::filesystem::path dir;
  std::string source;
  Program program;
  FaultSpec fault;
  std::string failing_input;
  std::optional<std::string> passing_input;   // absent when every run fails
  InputRelation expected_relation = InputRelation::Unknown;
  std::optional<Patch> developer_patch;       // stmt-id keyed after loading
  std::optional<SignaturePatchSpec> signature_patch;

  nlohmann::json to_json() const;
};

CorpusCase load_case(const std::filesystem::path& dir);
/// Every subdirectory holding a case.json, sorted by name.
std::vector<CorpusCase> load_corpus(const std::filesystem::path& dir);

/// Throws Error unless the failing input triggers the fault and the passing input exits normally.
void validate_case(const CorpusCase& c, std::uint64_t step_limit = 1'000'000);

/// Directory of the checked-in fixtures.
std::filesystem::path default_corpus_dir();

/// Copies the fixtures into `out_dir` (validating each) and writes corpus.json.
std::vector<CorpusCase> generate_corpus(const std::filesystem::path& out_dir, std::uint64_t rng_seed,
                                        const std::filesystem::path& fixtures = default_corpus_dir());

}  // namespace sigforge

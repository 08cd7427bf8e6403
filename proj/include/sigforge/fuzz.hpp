#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "sigforge/ast.hpp"
#include "sigforge/fault.hpp"
#include "sigforge/interp.hpp"
#include "sigforge/signature.hpp"

namespace sigforge {

/// splitmix64; every random choice of the fuzzer is drawn from one of these.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  /// Uniform in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n);
  bool chance(unsigned percent) { return below(100) < percent; }

 private:
  std::uint64_t state_;
};

enum class Mutator { BitFlip, ByteReplace, RecordDuplicate, RecordDelete, LengthExtend, TokenSplice, ArithmeticPerturb };
inline constexpr Mutator kAllMutators[] = {Mutator::BitFlip,      Mutator::ByteReplace, Mutator::RecordDuplicate,
                                           Mutator::RecordDelete, Mutator::LengthExtend, Mutator::TokenSplice,
                                           Mutator::ArithmeticPerturb};
std::string to_string(Mutator m);

std::string mutate(Mutator m, const std::string& input, Rng& rng, const std::vector<std::string>& dictionary);

/// String literals of the program (and their records when they contain spaces).
std::vector<std::string> harvest_dictionary(const Program& program);

/// Capacity (second argument) of every read_line call with a literal size.
std::vector<std::int64_t> read_capacities(const Program& program);

std::vector<std::string> synthesize_seeds(const Program& target, std::uint64_t rng_seed, std::size_t n);

struct FuzzBudget {
  std::size_t max_iterations = 10'000;
  double wall_clock_cap = 0;   // seconds; 0 disables (and keeps runs reproducible)
};

struct Finding {
  std::string input;
  ExecOutcome outcome;
  std::size_t iteration = 0;

  nlohmann::json to_json() const;
};

struct FuzzCampaign {
  Program target;
  FaultSpec oracle;                 // in the target's coordinates
  std::vector<std::string> seed_inputs;
  std::uint64_t rng_seed = 42;
  FuzzBudget budget;
  bool keep_going = false;
  bool greybox = true;
  unsigned workers = 1;
  std::set<StmtId> focus;           // statements whose coverage raises an input's energy
  std::uint64_t step_limit = 100'000;

  std::vector<Finding> findings;
  std::size_t iterations = 0;       // executions performed
  bool exhausted = false;           // budget used up with no finding

  nlohmann::json report() const;
};

/// True iff the outcome is the oracle fault (same type at the same statement;
/// any statement when the oracle has no location).
bool matches_oracle(const ExecOutcome& outcome, const FaultSpec& oracle);

FuzzCampaign fuzz(FuzzCampaign campaign);

/// Number of input records `program` consumes before it first runs `entry`;
/// nullopt when the run never gets there.
std::optional<std::size_t> records_before(const Program& program, const std::string& input, StmtId entry,
                                          const ExecOptions& options = {});

enum class InputRelation { Same, Partial, Unknown };
std::string to_string(InputRelation r);
InputRelation parse_input_relation(const std::string& s);

struct RelationResult {
  InputRelation relation = InputRelation::Unknown;
  std::string combined;   // Partial: the spliced input
  std::string reaching;   // Partial: the reaching test it came from

  nlohmann::json to_json() const;
};

/// Same if the finding triggers the original's fault directly; Partial if the
/// records a reaching test consumes before the segment entry, followed by the
/// finding, trigger it; Unknown otherwise.
RelationResult classify_input_relation(const Program& original, const FaultSpec& original_fault,
                                       const FaultSignature& signature, const std::string& finding,
                                       const std::vector<std::string>& reaching_tests, const ExecOptions& options = {});

}  // namespace sigforge

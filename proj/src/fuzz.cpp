#include "sigforge/fuzz.hpp"

#include <algorithm>
#include <chrono>
#include <thread>

#include "sigforge/frontend.hpp"

namespace sigforge {

std::uint64_t Rng::next() {
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t Rng::below(std::uint64_t n) { return n <= 1 ? 0 : next() % n; }

std::string to_string(Mutator m) {
  switch (m) {
    case Mutator::BitFlip: return "bit-flip";
    case Mutator::ByteReplace: return "byte-replace";
    case Mutator::RecordDuplicate: return "record-duplicate";
    case Mutator::RecordDelete: return "record-delete";
    case Mutator::LengthExtend: return "length-extend";
    case Mutator::TokenSplice: return "token-splice";
    case Mutator::ArithmeticPerturb: return "arithmetic-perturb";
  }
  return "?";
}

namespace {

constexpr std::size_t kMaxInput = 4096;
constexpr std::size_t kBatch = 64;

char random_char(Rng& rng) {
  static const char kAlphabet[] = "abcdefghijklmnopqrstuvwxyz0123456789 ./-_ABCXYZ";
  return kAlphabet[rng.below(sizeof(kAlphabet) - 1)];
}

std::vector<std::string> records_of(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t nl = s.find('\n', start);
    if (nl == std::string::npos) {
      out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, nl - start));
    start = nl + 1;
  }
  return out;
}

std::string join(const std::vector<std::string>& r) {
  std::string out;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (i) out += '\n';
    out += r[i];
  }
  return out;
}

}  // namespace

std::string mutate(Mutator m, const std::string& input, Rng& rng, const std::vector<std::string>& dictionary) {
  std::string s = input;
  switch (m) {
    case Mutator::BitFlip: {
      if (s.empty()) return s;
      auto i = rng.below(s.size());
      char c = static_cast<char>(s[i] ^ (1 << rng.below(7)));
      s[i] = c == '\0' ? ' ' : c;
      return s;
    }
    case Mutator::ByteReplace: {
      if (s.empty()) return s;
      s[rng.below(s.size())] = rng.chance(10) ? '\n' : random_char(rng);
      return s;
    }
    case Mutator::RecordDuplicate: {
      if (s.empty()) return s;
      auto r = records_of(s);
      auto i = rng.below(r.size());
      r.insert(r.begin() + static_cast<std::ptrdiff_t>(rng.below(r.size() + 1)), r[i]);
      return join(r);
    }
    case Mutator::RecordDelete: {
      if (s.empty()) return s;
      auto r = records_of(s);
      r.erase(r.begin() + static_cast<std::ptrdiff_t>(rng.below(r.size())));
      return join(r);
    }
    case Mutator::LengthExtend: {
      auto r = records_of(s);
      auto i = rng.below(r.size());
      std::size_t k = 1 + rng.below(rng.chance(50) ? 8 : 64);
      r[i].append(k, random_char(rng));
      return join(r);
    }
    case Mutator::TokenSplice: {
      if (dictionary.empty()) return s;
      const std::string& tok = dictionary[rng.below(dictionary.size())];
      auto r = records_of(s);
      switch (rng.below(3)) {
        case 0: {   // new record
          r.insert(r.begin() + static_cast<std::ptrdiff_t>(rng.below(r.size() + 1)), tok);
          break;
        }
        case 1: {   // overwrite a record
          r[rng.below(r.size())] = tok;
          break;
        }
        default: {   // splice into a record
          auto& rec = r[rng.below(r.size())];
          rec.insert(rng.below(rec.size() + 1), tok);
          break;
        }
      }
      return join(r);
    }
    case Mutator::ArithmeticPerturb: {
      std::vector<std::pair<std::size_t, std::size_t>> runs;
      for (std::size_t i = 0; i < s.size();) {
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) {
          ++i;
          continue;
        }
        std::size_t j = i;
        while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
        runs.emplace_back(i, j - i);
        i = j;
      }
      if (runs.empty()) return s;
      auto [at, len] = runs[rng.below(runs.size())];
      std::int64_t v = len > 12 ? 0 : std::stoll(s.substr(at, len));
      v += static_cast<std::int64_t>(rng.below(71)) - 35;
      if (v < 0) v = -v;
      s.replace(at, len, std::to_string(v));
      return s;
    }
  }
  return s;
}

std::vector<std::string> harvest_dictionary(const Program& program) {
  std::set<std::string> toks;
  auto visit = [&](const ExprPtr& e) {
    for_each_expr(e, [&](const Expr& x) {
      if (x.kind != ExprKind::StrLit || x.text.empty()) return;
      toks.insert(x.text);
      std::size_t start = 0;
      while (start < x.text.size()) {
        std::size_t sp = x.text.find(' ', start);
        if (sp == std::string::npos) sp = x.text.size();
        if (sp > start && sp - start < x.text.size()) toks.insert(x.text.substr(start, sp - start));
        start = sp + 1;
      }
    });
  };
  for (const Stmt* s : program.all_statements()) {
    for (const auto& e : stmt_exprs(*s)) visit(e);
  }
  return {toks.begin(), toks.end()};
}

std::vector<std::int64_t> read_capacities(const Program& program) {
  std::vector<std::int64_t> caps;
  for (const Stmt* s : program.all_statements()) {
    for (const auto& e : stmt_exprs(*s)) {
      for_each_expr(e, [&](const Expr& x) {
        if (x.kind == ExprKind::Call && x.text == "read_line" && x.args.size() == 2 &&
            x.args[1]->kind == ExprKind::IntLit && x.args[1]->value > 0) {
          caps.push_back(x.args[1]->value);
        }
      });
    }
  }
  return caps;
}

std::vector<std::string> synthesize_seeds(const Program& target, std::uint64_t rng_seed, std::size_t n) {
  Rng rng(rng_seed ^ 0x5EED5EEDULL);
  auto caps = read_capacities(target);
  if (caps.empty()) caps.push_back(16);
  auto dict = harvest_dictionary(target);
  std::size_t records = std::clamp<std::size_t>(caps.size(), 1, 4);
  std::vector<std::string> seeds;
  for (std::size_t k = 0; k < std::max<std::size_t>(n, 1); ++k) {
    std::vector<std::string> r;
    for (std::size_t i = 0; i < records; ++i) {
      std::int64_t cap = caps[i % caps.size()];
      std::string rec;
      if (!dict.empty() && rng.chance(25)) {
        rec = dict[rng.below(dict.size())];
      } else {
        auto len = rng.below(static_cast<std::uint64_t>(cap));
        for (std::uint64_t j = 0; j < len; ++j) rec += random_char(rng);
      }
      if (static_cast<std::int64_t>(rec.size()) > cap - 1) rec.resize(static_cast<std::size_t>(std::max<std::int64_t>(cap - 1, 0)));
      r.push_back(rec);
    }
    seeds.push_back(join(r));
  }
  return seeds;
}

nlohmann::json Finding::to_json() const {
  return {{"iteration", iteration}, {"input", input}, {"outcome", outcome.to_json()}};
}

nlohmann::json FuzzCampaign::report() const {
  nlohmann::json f = nlohmann::json::array();
  for (const auto& x : findings) f.push_back(x.to_json());
  return {{"target", target.file},       {"oracle", oracle.to_json()}, {"rng_seed", rng_seed},
          {"iterations", iterations},    {"exhausted", exhausted},     {"findings", f},
          {"greybox", greybox}};
}

bool matches_oracle(const ExecOutcome& outcome, const FaultSpec& oracle) {
  if (oracle.fault_loc.stmt_id == kNoStmt) return outcome.verdict.is_fault() && outcome.verdict.fault == oracle.fault_type;
  return outcome.verdict.is_fault(oracle.fault_type, oracle.fault_loc.stmt_id);
}

namespace {

struct Entry {
  std::string input;
  std::uint64_t energy = 1;
};

std::vector<ExecOutcome> evaluate(const Program& p, const std::vector<std::string>& inputs, unsigned workers,
                                  const ExecOptions& opts) {
  std::vector<ExecOutcome> out(inputs.size());
  unsigned w = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(inputs.size())));
  if (w == 1) {
    for (std::size_t i = 0; i < inputs.size(); ++i) out[i] = run(p, inputs[i], opts);
    return out;
  }
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < w; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < inputs.size(); i += w) out[i] = run(p, inputs[i], opts);
    });
  }
  for (auto& th : pool) th.join();
  return out;
}

}  // namespace

FuzzCampaign fuzz(FuzzCampaign c) {
  if (c.budget.max_iterations == 0) throw Error("fuzz budget must be positive");
  Rng rng(c.rng_seed);
  std::vector<std::string> dict = harvest_dictionary(c.target);
  if (c.seed_inputs.empty()) c.seed_inputs = synthesize_seeds(c.target, c.rng_seed, 8);
  ExecOptions opts;
  opts.step_limit = c.step_limit;
  opts.detect_leaks = c.oracle.fault_type == FaultType::ResourceLeak;

  std::vector<Entry> queue;
  std::set<StmtId> covered;
  std::set<std::string> found_inputs;
  auto start = std::chrono::steady_clock::now();
  std::size_t seed_cursor = 0;
  bool stop = false;
  c.findings.clear();
  c.iterations = 0;

  while (!stop && c.iterations < c.budget.max_iterations) {
    if (c.budget.wall_clock_cap > 0) {
      std::chrono::duration<double> el = std::chrono::steady_clock::now() - start;
      if (el.count() > c.budget.wall_clock_cap) break;
    }
    std::size_t n = std::min(kBatch, c.budget.max_iterations - c.iterations);
    std::vector<std::string> batch;
    while (batch.size() < n && seed_cursor < c.seed_inputs.size()) batch.push_back(c.seed_inputs[seed_cursor++]);
    std::uint64_t total = 0;
    for (const auto& e : queue) total += e.energy;
    while (batch.size() < n) {
      std::string parent;
      if (!queue.empty()) {
        std::uint64_t pick = rng.below(total);
        for (const auto& e : queue) {
          if (pick < e.energy) {
            parent = e.input;
            break;
          }
          pick -= e.energy;
        }
      } else {
        parent = c.seed_inputs[rng.below(c.seed_inputs.size())];
      }
      std::string child = parent;
      auto stack = 1 + rng.below(4);
      for (std::uint64_t k = 0; k < stack; ++k) {
        child = mutate(kAllMutators[rng.below(std::size(kAllMutators))], child, rng, dict);
      }
      if (child.size() > kMaxInput) child.resize(kMaxInput);
      batch.push_back(std::move(child));
    }
    auto outcomes = evaluate(c.target, batch, c.workers, opts);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      std::size_t iter = c.iterations++;
      const ExecOutcome& o = outcomes[i];
      if (matches_oracle(o, c.oracle)) {
        if (found_inputs.insert(batch[i]).second) c.findings.push_back({batch[i], o, iter});
        if (!c.keep_going) {
          stop = true;
          break;
        }
        continue;
      }
      bool novel = false;
      std::uint64_t hits = 0;
      for (StmtId s : o.trace) {
        if (covered.insert(s).second) novel = true;
      }
      for (StmtId s : std::set<StmtId>(o.trace.begin(), o.trace.end())) hits += c.focus.count(s);
      bool is_seed = iter < c.seed_inputs.size();
      if (is_seed || (c.greybox && novel)) queue.push_back({batch[i], 1 + 4 * hits + (novel ? 2 : 0)});
    }
  }
  c.exhausted = c.findings.empty();
  return c;
}

std::optional<std::size_t> records_before(const Program& program, const std::string& input, StmtId entry,
                                          const ExecOptions& options) {
  ExecOutcome r = run(program, input, options);
  auto at = std::find(r.trace.begin(), r.trace.end(), entry);
  if (at == r.trace.end()) return std::nullopt;
  auto pos = static_cast<std::size_t>(at - r.trace.begin());
  std::size_t consumed = 0;
  for (const auto& ev : r.inputs) {
    if (ev.trace_pos < pos && ev.record >= 0) consumed = std::max(consumed, static_cast<std::size_t>(ev.record) + 1);
  }
  return consumed;
}

std::string to_string(InputRelation r) {
  switch (r) {
    case InputRelation::Same: return "Same";
    case InputRelation::Partial: return "Partial";
    case InputRelation::Unknown: return "Unknown";
  }
  return "?";
}

InputRelation parse_input_relation(const std::string& s) {
  std::string k = s;
  std::transform(k.begin(), k.end(), k.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (k == "same") return InputRelation::Same;
  if (k == "partial") return InputRelation::Partial;
  if (k == "unknown") return InputRelation::Unknown;
  throw Error("unknown input relation '" + s + "'");
}

nlohmann::json RelationResult::to_json() const {
  nlohmann::json j{{"relation", to_string(relation)}};
  if (relation == InputRelation::Partial) {
    j["combined"] = combined;
    j["reaching"] = reaching;
  }
  return j;
}

RelationResult classify_input_relation(const Program& original, const FaultSpec& original_fault,
                                       const FaultSignature& signature, const std::string& finding,
                                       const std::vector<std::string>& reaching_tests, const ExecOptions& options) {
  ExecOptions opts = options;
  opts.detect_leaks = original_fault.fault_type == FaultType::ResourceLeak;
  RelationResult res;
  if (matches_oracle(run(original, finding, opts), original_fault)) {
    res.relation = InputRelation::Same;
    return res;
  }
  StmtId entry = signature.manifest.entry_original;
  for (const auto& test : reaching_tests) {
    auto consumed = records_before(original, test, entry, opts);
    if (!consumed) continue;
    auto recs = split_records(test);
    recs.resize(std::min(recs.size(), *consumed));
    for (const auto& f : split_records(finding)) recs.push_back(f);
    std::string combined = join_records(recs);
    if (matches_oracle(run(original, combined, opts), original_fault)) {
      res.relation = InputRelation::Partial;
      res.combined = combined;
      res.reaching = test;
      return res;
    }
  }
  return res;
}

}  // namespace sigforge

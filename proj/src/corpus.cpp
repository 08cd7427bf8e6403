#include "sigforge/corpus.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "sigforge/frontend.hpp"

namespace sigforge {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename T>
T number(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    long long x = std::stoll(v, &used);
    if (used != v.size() || x < 0) throw Error("");
    return static_cast<T>(x);
  } catch (...) {
    throw Error("config: " + key + " expects a non-negative integer, got '" + v + "'");
  }
}

}  // namespace

void Config::set(const std::string& key, const std::string& value) {
  std::string v = value;
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
  if (key == "unroll") {
    unroll = number<int>(key, v);
  } else if (key == "path_budget") {
    path_budget = number<std::size_t>(key, v);
  } else if (key == "step_limit") {
    step_limit = number<std::uint64_t>(key, v);
  } else if (key == "fuzz_budget") {
    fuzz_budget = number<std::size_t>(key, v);
  } else if (key == "fuzz_step_limit") {
    fuzz_step_limit = number<std::uint64_t>(key, v);
  } else if (key == "seed") {
    seed = number<std::uint64_t>(key, v);
  } else if (key == "workers") {
    workers = std::max(1u, number<unsigned>(key, v));
  } else {
    throw Error("config: unknown key '" + key + "'");
  }
}

Config Config::parse(const std::string& text) {
  Config c;
  std::istringstream in(text);
  std::string line;
  int no = 0;
  while (std::getline(in, line)) {
    ++no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw Error("config line " + std::to_string(no) + ": expected key = value");
    c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return c;
}

Config Config::load(const fs::path& file) { return parse(slurp(file)); }

nlohmann::json Config::to_json() const {
  return {{"unroll", unroll},         {"path_budget", path_budget},         {"step_limit", step_limit},
          {"fuzz_budget", fuzz_budget}, {"fuzz_step_limit", fuzz_step_limit}, {"seed", seed},
          {"workers", workers}};
}

nlohmann::json CorpusCase::to_json() const {
  nlohmann::json j{{"name", name},
                   {"description", description},
                   {"source_file", (dir / "program.mc").string()},
                   {"fault", {{"line", fault.fault_loc.line}, {"type", to_string(fault.fault_type)}}},
                   {"failing_input", failing_input},
                   {"passing_input", passing_input ? nlohmann::json(*passing_input) : nlohmann::json()},
                   {"expected_relation", to_string(expected_relation)}};
  j["patch"] = developer_patch ? developer_patch->to_json() : nlohmann::json();
  return j;
}

CorpusCase load_case(const fs::path& dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(slurp(dir / "case.json"));
  } catch (const nlohmann::json::exception& e) {
    throw Error("case " + dir.string() + ": " + e.what());
  }
  CorpusCase c;
  c.dir = dir;
  c.name = j.value("name", dir.filename().string());
  c.description = j.value("description", std::string());
  c.source = slurp(dir / "program.mc");
  c.program = parse(c.source, c.name + ".mc");
  check_program(c.program);
  const auto& f = j.at("fault");
  c.fault = analyze_fault(c.program, SourceLoc{c.program.file, f.at("line").get<int>(), 0, kNoStmt},
                          parse_fault_type(f.at("type").get<std::string>()));
  c.failing_input = j.at("failing_input").get<std::string>();
  if (j.contains("passing_input") && !j["passing_input"].is_null()) c.passing_input = j["passing_input"].get<std::string>();
  c.expected_relation = parse_input_relation(j.value("expected_relation", std::string("Unknown")));
  if (j.contains("patch") && !j["patch"].is_null()) c.developer_patch = Patch::from_json(j["patch"]).resolved(c.program);
  if (j.contains("signature_patch")) {
    const auto& s = j["signature_patch"];
    SignaturePatchSpec sp;
    sp.match = s.at("match").get<std::string>();
    sp.action = parse_edit_action(s.at("action").get<std::string>());
    sp.text = s.value("text", std::string());
    if (s.contains("expected_effect")) {
      std::string e = s["expected_effect"].get<std::string>();
      for (PatchEffect x : {PatchEffect::Fix, PatchEffect::FixWithSideEffect, PatchEffect::NotAFix}) {
        if (to_string(x) == e) sp.expected_effect = x;
      }
    }
    c.signature_patch = sp;
  }
  return c;
}

std::vector<CorpusCase> load_corpus(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error("corpus directory " + dir.string() + " does not exist");
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory() && fs::exists(e.path() / "case.json")) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  std::vector<CorpusCase> out;
  for (const auto& d : dirs) out.push_back(load_case(d));
  return out;
}

void validate_case(const CorpusCase& c, std::uint64_t step_limit) {
  ExecOptions o;
  o.step_limit = step_limit;
  o.detect_leaks = c.fault.fault_type == FaultType::ResourceLeak;
  ExecOutcome bad = run(c.program, c.failing_input, o);
  if (!matches_oracle(bad, c.fault)) {
    throw Error("case " + c.name + ": failing input gives " + bad.verdict.describe() + ", expected " +
                to_string(c.fault.fault_type) + " at line " + std::to_string(c.fault.fault_loc.line));
  }
  if (c.passing_input) {
    ExecOutcome good = run(c.program, *c.passing_input, o);
    if (good.verdict.kind != VerdictKind::NormalExit) {
      throw Error("case " + c.name + ": passing input gives " + good.verdict.describe());
    }
  }
}

fs::path default_corpus_dir() {
  if (const char* env = std::getenv("SIGFORGE_CORPUS")) return env;
  return SIGFORGE_CORPUS_DIR;
}

std::vector<CorpusCase> generate_corpus(const fs::path& out_dir, std::uint64_t rng_seed, const fs::path& fixtures) {
  auto cases = load_corpus(fixtures);
  fs::create_directories(out_dir);
  nlohmann::json index = nlohmann::json::array();
  for (auto& c : cases) {
    validate_case(c);
    fs::path dst = out_dir / c.name;
    fs::create_directories(dst);
    fs::copy_file(c.dir / "program.mc", dst / "program.mc", fs::copy_options::overwrite_existing);
    fs::copy_file(c.dir / "case.json", dst / "case.json", fs::copy_options::overwrite_existing);
    c.dir = dst;
    index.push_back(c.to_json());
  }
  std::ofstream(out_dir / "corpus.json") << nlohmann::json{{"seed", rng_seed}, {"cases", index}}.dump(2) << "\n";
  return cases;
}

}  // namespace sigforge

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "sigforge/cfg.hpp"
#include "sigforge/corpus.hpp"
#include "sigforge/experiment.hpp"
#include "sigforge/fault.hpp"
#include "sigforge/frontend.hpp"
#include "sigforge/fuzz.hpp"
#include "sigforge/interp.hpp"
#include "sigforge/patch.hpp"
#include "sigforge/path.hpp"
#include "sigforge/signature.hpp"
#include "sigforge/slice.hpp"

using namespace sigforge;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Globals {
  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  bool json_out = false;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  out << text;
}

Program load_program(const fs::path& file) {
  Program p = parse(slurp(file), file.filename().string());
  check_program(p);
  return p;
}

Config load_config(const Globals& g) {
  Config c;
  if (!g.config_file.empty()) {
    c = Config::load(g.config_file);
  } else if (fs::exists("sigforge.toml")) {
    c = Config::load("sigforge.toml");
  }
  if (g.seed) c.seed = *g.seed;
  if (g.workers) c.workers = *g.workers;
  return c;
}

std::optional<FaultType> fault_hint(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return parse_fault_type(s);
}

FaultSpec fault_at(const Program& p, const std::string& loc, const std::string& type) {
  return analyze_fault(p, SourceLoc{p.file, parse_loc_arg(loc), 0, kNoStmt}, fault_hint(type));
}

FaultSignature load_signature_dir(const fs::path& dir) {
  auto m = SignatureManifest::from_json(json::parse(slurp(dir / "manifest.json")));
  return load_signature(slurp(dir / "signature.mc"), m);
}

// Inputs of a tests directory: every regular file, sorted by name.
std::vector<std::pair<std::string, std::string>> read_inputs(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() != ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : files) out.emplace_back(f.filename().string(), slurp(f));
  return out;
}

void print_json(const json& j) { std::cout << j.dump(2) << "\n"; }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

ExecOptions exec_options(std::uint64_t steps, FaultType t) {
  ExecOptions o;
  o.step_limit = steps;
  o.detect_leaks = t == FaultType::ResourceLeak;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sig: fault signatures for MiniC programs"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_file, "settings file (default: ./sigforge.toml when present)");
  app.add_option("--seed", g.seed, "RNG seed for fuzzing");
  app.add_option("--workers", g.workers, "worker threads");
  app.add_flag("--json", g.json_out, "machine-readable output");
  int exit_code = 0;

  // analyze
  std::string file, loc, fault_type;
  auto* analyze = app.add_subcommand("analyze", "print the fault condition at a location");
  analyze->add_option("file", file)->required()->check(CLI::ExistingFile);
  analyze->add_option("--loc", loc, "file:line")->required();
  analyze->add_option("--fault-type", fault_type);
  analyze->callback([&]() {
    Program p = load_program(file);
    print_json(fault_at(p, loc, fault_type).to_json());
  });

  // path
  std::optional<int> unroll;
  std::optional<std::size_t> max_paths;
  auto* path = app.add_subcommand("path", "find the faulty path segment");
  path->add_option("file", file)->required()->check(CLI::ExistingFile);
  path->add_option("--loc", loc)->required();
  path->add_option("--fault-type", fault_type);
  path->add_option("--unroll", unroll);
  path->add_option("--max-paths", max_paths);
  auto budget_of = [&](const Config& c) {
    ExplorationBudget b;
    b.unroll = unroll.value_or(c.unroll);
    b.max_paths = max_paths.value_or(c.path_budget);
    return b;
  };
  path->callback([&]() {
    Program p = load_program(file);
    FaultSpec f = fault_at(p, loc, fault_type);
    print_json(find_faulty_path(p, f, budget_of(load_config(g))).to_json(p));
  });

  // extract
  std::string out_dir = "signature";
  auto* extract = app.add_subcommand("extract", "write the fault signature of a location");
  extract->add_option("file", file)->required()->check(CLI::ExistingFile);
  extract->add_option("--loc", loc)->required();
  extract->add_option("--fault-type", fault_type);
  extract->add_option("--unroll", unroll);
  extract->add_option("--max-paths", max_paths);
  extract->add_option("-o,--out", out_dir);
  extract->callback([&]() {
    Program p = load_program(file);
    FaultSpec f = fault_at(p, loc, fault_type);
    FaultSignature sig = synthesize(find_faulty_path(p, f, budget_of(load_config(g))), p);
    sig.manifest.original_file = fs::absolute(file).string();
    spit(fs::path(out_dir) / "signature.mc", sig.source);
    spit(fs::path(out_dir) / "signature.c", export_c(sig));
    spit(fs::path(out_dir) / "manifest.json", sig.manifest.to_json().dump(2) + "\n");
    if (g.json_out) {
      print_json({{"dir", out_dir}, {"manifest", sig.manifest.to_json()}});
    } else {
      std::cout << sig.source;
      std::cerr << "wrote " << out_dir << "/{signature.mc,signature.c,manifest.json}\n";
    }
  });

  // run
  std::string input_file, trace_file;
  std::optional<std::uint64_t> steps;
  bool leaks = false;
  auto* runc = app.add_subcommand("run", "interpret a program");
  runc->add_option("file", file)->required()->check(CLI::ExistingFile);
  runc->add_option("--input", input_file)->check(CLI::ExistingFile);
  runc->add_option("--steps", steps);
  runc->add_option("--trace", trace_file, "write the executed trace as JSON");
  runc->add_flag("--detect-leaks", leaks);
  runc->callback([&]() {
    Program p = load_program(file);
    ExecOptions o;
    o.step_limit = steps.value_or(load_config(g).step_limit);
    o.detect_leaks = leaks;
    ExecOutcome r = run(p, input_file.empty() ? std::string() : slurp(input_file), o);
    if (!trace_file.empty()) spit(trace_file, r.to_json(true).dump() + "\n");
    std::cout << r.output;
    print_json(r.to_json());
    exit_code = r.verdict.kind == VerdictKind::NormalExit ? 0 : r.verdict.kind == VerdictKind::Fault ? 10 : 11;
  });

  // substitute
  std::string sig_dir;
  auto* substitute = app.add_subcommand("substitute", "run the original and switch into the signature at its entry");
  substitute->add_option("original", file)->required()->check(CLI::ExistingFile);
  substitute->add_option("sigdir", sig_dir)->required()->check(CLI::ExistingDirectory);
  substitute->add_option("--input", input_file)->check(CLI::ExistingFile);
  substitute->callback([&]() {
    Program p = load_program(file);
    FaultSignature sig = load_signature_dir(sig_dir);
    auto opts = exec_options(load_config(g).step_limit, sig.manifest.fault_type);
    SubstitutedOutcome r =
        run_substituted(p, sig.program, sig.plan(), input_file.empty() ? std::string() : slurp(input_file), opts);
    print_json({{"entered_signature", r.entered_signature},
                {"prefix", r.prefix.to_json()},
                {"outcome", r.outcome.to_json()}});
    exit_code = r.outcome.verdict.kind == VerdictKind::NormalExit ? 0 : r.outcome.verdict.kind == VerdictKind::Fault ? 10 : 11;
  });

  // fuzz
  std::string oracle_arg, findings_dir;
  std::optional<std::size_t> fuzz_budget;
  bool keep_going = false;
  auto* fuzzc = app.add_subcommand("fuzz", "mutation fuzzing against a fault oracle");
  fuzzc->add_option("target", file)->required()->check(CLI::ExistingFile);
  fuzzc->add_option("--oracle", oracle_arg, "manifest.json or file:line")->required();
  fuzzc->add_option("--fault-type", fault_type);
  fuzzc->add_option("--budget", fuzz_budget);
  fuzzc->add_flag("--keep-going", keep_going);
  fuzzc->add_option("-o,--out", findings_dir);
  fuzzc->callback([&]() {
    Config c = load_config(g);
    Program p = load_program(file);
    FuzzCampaign camp;
    camp.target = p;
    if (oracle_arg.ends_with(".json")) {
      auto m = SignatureManifest::from_json(json::parse(slurp(oracle_arg)));
      camp.oracle = analyze_fault(p, SourceLoc{p.file, m.fault_loc_signature.line, 0, kNoStmt}, m.fault_type);
    } else {
      camp.oracle = fault_at(p, oracle_arg, fault_type);
    }
    camp.rng_seed = c.seed;
    camp.budget.max_iterations = fuzz_budget.value_or(c.fuzz_budget);
    camp.keep_going = keep_going;
    camp.workers = c.workers;
    camp.step_limit = c.fuzz_step_limit;
    FuzzCampaign done = fuzz(std::move(camp));
    if (!findings_dir.empty()) {
      for (std::size_t i = 0; i < done.findings.size(); ++i) {
        std::ostringstream name;
        name << std::setw(3) << std::setfill('0') << i;
        spit(fs::path(findings_dir) / (name.str() + ".input"), done.findings[i].input);
        spit(fs::path(findings_dir) / (name.str() + ".json"), done.findings[i].to_json().dump(2) + "\n");
      }
    }
    print_json(done.report());
  });

  // classify
  std::string tests_dir;
  auto* classify = app.add_subcommand("classify", "relate signature findings to the original (CSV)");
  classify->add_option("original", file)->required()->check(CLI::ExistingFile);
  classify->add_option("sigdir", sig_dir)->required()->check(CLI::ExistingDirectory);
  classify->add_option("--tests", tests_dir, "reaching tests for the original")->check(CLI::ExistingDirectory);
  classify->add_option("--findings", findings_dir, "signature findings (default: fuzz the signature)")
      ->check(CLI::ExistingDirectory);
  classify->callback([&]() {
    Config c = load_config(g);
    Program p = load_program(file);
    FaultSignature sig = load_signature_dir(sig_dir);
    FaultSpec orig = analyze_fault(p, SourceLoc{p.file, sig.manifest.fault_loc_original.line, 0, kNoStmt},
                                   sig.manifest.fault_type);
    std::vector<std::pair<std::string, std::string>> findings;
    if (!findings_dir.empty()) {
      findings = read_inputs(findings_dir);
    } else {
      FuzzCampaign camp;
      camp.target = sig.program;
      camp.oracle = sig.fault;
      camp.rng_seed = c.seed;
      camp.budget.max_iterations = c.fuzz_budget;
      camp.workers = c.workers;
      camp.step_limit = c.fuzz_step_limit;
      FuzzCampaign done = fuzz(std::move(camp));
      for (const auto& f : done.findings) findings.emplace_back("iteration " + std::to_string(f.iteration), f.input);
    }
    std::vector<std::string> reaching;
    if (!tests_dir.empty()) {
      for (auto& [n, t] : read_inputs(tests_dir)) reaching.push_back(t);
    }
    auto opts = exec_options(c.step_limit, orig.fault_type);
    std::cout << "finding,relation,combined\n";
    for (const auto& [name, in] : findings) {
      RelationResult r = classify_input_relation(p, orig, sig, in, reaching, opts);
      std::cout << csv_field(name) << "," << to_string(r.relation) << "," << csv_field(r.combined) << "\n";
    }
  });

  // slice
  bool dynamic = false;
  auto* slice = app.add_subcommand("slice", "static or dynamic slice of a location");
  slice->add_option("file", file)->required()->check(CLI::ExistingFile);
  slice->add_option("--loc", loc)->required();
  slice->add_flag("--dynamic", dynamic);
  slice->add_option("--input", input_file)->check(CLI::ExistingFile);
  slice->callback([&]() {
    Program p = load_program(file);
    SourceLoc crit{p.file, parse_loc_arg(loc), 0, kNoStmt};
    Slice s;
    if (dynamic) {
      ExecOptions o;
      o.step_limit = load_config(g).step_limit;
      s = dynamic_slice(p, crit, run(p, input_file.empty() ? std::string() : slurp(input_file), o));
    } else {
      s = static_slice(p, crit);
    }
    json j = s.to_json(p);
    j["loc"] = slice_loc(p, s);
    print_json(j);
  });

  // metrics
  std::vector<std::string> files;
  bool csv = false;
  auto* metricsc = app.add_subcommand("metrics", "LOC and cyclomatic complexity");
  metricsc->add_option("files", files)->required()->check(CLI::ExistingFile);
  metricsc->add_flag("--csv", csv);
  metricsc->callback([&]() {
    std::vector<MetricsRow> rows;
    for (const auto& f : files) rows.push_back(metrics(load_program(f), f));
    if (g.json_out) {
      json a = json::array();
      for (const auto& r : rows) a.push_back(r.to_json());
      print_json(a);
    } else if (csv) {
      std::cout << "name,loc,cyclomatic\n";
      for (const auto& r : rows) std::cout << csv_field(r.name) << "," << r.loc << "," << r.cyclomatic << "\n";
    } else {
      std::cout << std::left << std::setw(40) << "name" << std::setw(8) << "loc" << "cyclomatic\n";
      for (const auto& r : rows) std::cout << std::setw(40) << r.name << std::setw(8) << r.loc << r.cyclomatic << "\n";
    }
  });

  // patch
  std::string patch_file, validate_dir, original_file;
  auto* patchc = app.add_subcommand("patch", "transfer a patch of the original onto a signature");
  patchc->add_option("sigdir", sig_dir)->required()->check(CLI::ExistingDirectory);
  patchc->add_option("--patch", patch_file)->required()->check(CLI::ExistingFile);
  patchc->add_option("--original", original_file, "original program (default: manifest original_file)");
  patchc->add_option("--validate", validate_dir, "inputs to classify the patched signature on")
      ->check(CLI::ExistingDirectory);
  patchc->add_option("-o,--out", out_dir);
  patchc->callback([&]() {
    Config c = load_config(g);
    FaultSignature sig = load_signature_dir(sig_dir);
    Patch patch = Patch::from_json(json::parse(slurp(patch_file)));
    bool by_line = std::any_of(patch.edits.begin(), patch.edits.end(), [](const PatchEdit& e) { return e.target == kNoStmt; });
    if (by_line) {
      std::string orig = original_file.empty() ? sig.manifest.original_file : original_file;
      patch = patch.resolved(load_program(orig));
    }
    json out;
    try {
      FaultSignature patched = transfer_patch(patch, sig);
      out["transferred"] = true;
      out["signature"] = patched.source;
      if (out_dir != "signature") {
        spit(fs::path(out_dir) / "signature.mc", patched.source);
        spit(fs::path(out_dir) / "signature.c", export_c(patched));
        spit(fs::path(out_dir) / "manifest.json", patched.manifest.to_json().dump(2) + "\n");
      }
      auto opts = exec_options(c.step_limit, sig.manifest.fault_type);
      if (!validate_dir.empty()) {
        std::vector<std::string> failing, passing;
        for (auto& [n, in] : read_inputs(validate_dir)) {
          (run(sig.program, in, opts).verdict.is_fault() ? failing : passing).push_back(in);
        }
        out["classification"] =
            classify_patch_effect(sig.program, patched.program, sig.fault, failing, passing, nullptr, opts).to_json();
      }
      FuzzCampaign camp;
      camp.target = patched.program;
      camp.oracle = patched.fault;
      camp.rng_seed = c.seed;
      camp.budget.max_iterations = c.fuzz_budget;
      camp.workers = c.workers;
      camp.step_limit = c.fuzz_step_limit;
      out["fuzz"] = fuzz(std::move(camp)).report();
    } catch (const CannotPatch& e) {
      out["transferred"] = false;
      out["error"] = e.what();
      exit_code = 3;
    }
    print_json(out);
  });

  // corpus
  std::string corpus_dir;
  auto* corpusc = app.add_subcommand("corpus", "copy, validate and index the bug corpus");
  corpusc->add_option("-o,--out", out_dir, "output directory")->required();
  corpusc->add_option("--from", corpus_dir, "fixture directory");
  corpusc->callback([&]() {
    Config c = load_config(g);
    auto cases = corpus_dir.empty() ? generate_corpus(out_dir, c.seed) : generate_corpus(out_dir, c.seed, corpus_dir);
    if (g.json_out) {
      json a = json::array();
      for (const auto& k : cases) a.push_back(k.to_json());
      print_json(a);
    } else {
      for (const auto& k : cases) {
        std::cout << std::left << std::setw(20) << k.name << std::setw(17) << to_string(k.fault.fault_type) << "line "
                  << k.fault.fault_loc.line << "  " << to_string(k.expected_relation) << "\n";
      }
    }
  });

  // experiment
  std::vector<std::string> only;
  std::string csv_out, json_out_file;
  auto* experiment = app.add_subcommand("experiment", "run the whole pipeline over the corpus");
  experiment->add_option("--corpus", corpus_dir);
  experiment->add_option("--only", only, "case names");
  experiment->add_option("--budget", fuzz_budget, "fuzz iterations per campaign");
  experiment->add_option("--csv", csv_out, "also write CSV here");
  experiment->add_option("--json-out", json_out_file, "also write JSON here");
  experiment->callback([&]() {
    Config c = load_config(g);
    if (fuzz_budget) c.fuzz_budget = *fuzz_budget;
    auto corpus = load_corpus(corpus_dir.empty() ? default_corpus_dir() : fs::path(corpus_dir));
    if (!only.empty()) {
      std::erase_if(corpus, [&](const CorpusCase& k) { return std::find(only.begin(), only.end(), k.name) == only.end(); });
    }
    ExperimentReport r = run_experiments(corpus, c);
    if (!csv_out.empty()) spit(csv_out, r.to_csv());
    if (!json_out_file.empty()) spit(json_out_file, r.to_json().dump(2) + "\n");
    if (g.json_out) {
      print_json(r.to_json());
    } else {
      std::cout << r.to_table();
    }
  });

  // cfg
  std::string entry = "main", dot_file;
  bool inlined = false;
  auto* cfgc = app.add_subcommand("cfg", "control-flow graph as Graphviz dot");
  cfgc->add_option("file", file)->required()->check(CLI::ExistingFile);
  cfgc->add_option("--entry", entry);
  cfgc->add_option("--dot", dot_file, "write here instead of standard output");
  cfgc->add_flag("--inline", inlined, "inline user calls from the entry function");
  cfgc->callback([&]() {
    Program p = load_program(file);
    Cfg graph;
    if (inlined) {
      graph = inline_program(p, entry);
    } else {
      const FuncDef* f = p.find_function(entry);
      if (!f) throw Error("no function '" + entry + "'");
      graph = build_cfg(p, *f);
    }
    if (dot_file.empty()) {
      std::cout << graph.to_dot();
    } else {
      spit(dot_file, graph.to_dot());
    }
  });

  // report
  std::string case_dir;
  auto* report = app.add_subcommand("report", "signature, original and slice sizes of one corpus case");
  report->add_option("case_dir", case_dir)->required()->check(CLI::ExistingDirectory);
  report->callback([&]() {
    Config c = load_config(g);
    CorpusCase k = load_case(case_dir);
    ExplorationBudget b;
    b.unroll = c.unroll;
    b.max_paths = c.path_budget;
    FaultSignature sig = synthesize(find_faulty_path(k.program, k.fault, b), k.program);
    Slice s = static_slice(k.program, k.fault.fault_loc);
    Program sliced = restrict_program(k.program, s.nodes);
    std::vector<MetricsRow> rows{metrics(sig.program, "fs"), metrics(k.program, "ori"), metrics(sliced, "slice")};
    rows[2].loc = slice_loc(k.program, s);
    if (g.json_out) {
      json a = json::array();
      for (const auto& r : rows) a.push_back(r.to_json());
      print_json({{"case", k.name}, {"rows", a}});
    } else {
      std::cout << "case " << k.name << "\n" << std::left << std::setw(8) << "kind" << std::setw(8) << "loc"
                << "cyclomatic\n";
      for (const auto& r : rows) std::cout << std::setw(8) << r.name << std::setw(8) << r.loc << r.cyclomatic << "\n";
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return exit_code;
}

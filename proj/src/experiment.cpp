#include "sigforge/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <iomanip>
#include <sstream>
#include <thread>

#include "sigforge/frontend.hpp"
#include "sigforge/slice.hpp"

namespace sigforge {

namespace {

bool reproduces(const ExecOutcome& o, const FaultSignature& sig) {
  return o.verdict.is_fault() && o.verdict.fault == sig.manifest.fault_type &&
         o.verdict.loc.line == sig.manifest.fault_loc_signature.line;
}

StmtId find_by_text(const Program& p, const std::string& text) {
  for (const Stmt* s : p.all_statements()) {
    if (s->kind != StmtKind::Block && stmt_text(*s) == text) return s->loc.stmt_id;
  }
  return kNoStmt;
}

FuzzCampaign campaign(const Program& target, const FaultSpec& oracle, const Config& cfg) {
  FuzzCampaign c;
  c.target = target;
  c.oracle = oracle;
  c.rng_seed = cfg.seed;
  c.budget.max_iterations = cfg.fuzz_budget;
  c.step_limit = cfg.fuzz_step_limit;
  return c;
}

}  // namespace

nlohmann::json CaseRow::to_json() const {
  nlohmann::json j{{"name", name},
                   {"fault_type", fault_type},
                   {"error", error},
                   {"signature_found", signature_found},
                   {"approximate", approximate},
                   {"segment_lines", segment_lines},
                   {"signature_lines", signature_lines},
                   {"satisfying_input", satisfying_input},
                   {"reproduced_by_test", reproduced_by_test},
                   {"reproduced_by_substitution", reproduced_by_substitution},
                   {"subsequence", subsequence},
                   {"minimal", minimal},
                   {"brute_force_size", brute_force_size ? nlohmann::json(*brute_force_size) : nlohmann::json()},
                   {"original_loc", original_loc},
                   {"signature_loc", signature_loc},
                   {"slice_loc", slice_loc},
                   {"original_cyclomatic", original_cyclomatic},
                   {"signature_cyclomatic", signature_cyclomatic},
                   {"static_slice_nodes", static_slice_nodes},
                   {"dynamic_slice_nodes", dynamic_slice_nodes},
                   {"patch_present", patch_present},
                   {"patch_transferred", patch_transferred},
                   {"patch_error", patch_error},
                   {"patch_validated", patch_validated},
                   {"patched_fuzz_findings", patched_fuzz_findings},
                   {"patch_effect", patch_effect},
                   {"signature_patch_effect", signature_patch_effect},
                   {"fuzz_sig_found", fuzz_sig_found},
                   {"fuzz_orig_found", fuzz_orig_found},
                   {"fuzz_sig_iterations", fuzz_sig_iterations},
                   {"fuzz_orig_iterations", fuzz_orig_iterations},
                   {"relation", relation},
                   {"expected_relation", expected_relation}};
  return j;
}

CaseRow run_case(const CorpusCase& c, const Config& cfg) {
  CaseRow row;
  row.name = c.name;
  row.fault_type = to_string(c.fault.fault_type);
  row.expected_relation = to_string(c.expected_relation);
  row.patch_present = c.developer_patch.has_value();
  ExecOptions opts;
  opts.step_limit = cfg.step_limit;
  opts.detect_leaks = c.fault.fault_type == FaultType::ResourceLeak;
  std::string stage = "validate";
  try {
    validate_case(c, cfg.step_limit);
    ExecOutcome failing = run(c.program, c.failing_input, opts);

    stage = "extract";
    ExplorationBudget budget;
    budget.unroll = cfg.unroll;
    budget.max_paths = cfg.path_budget;
    FaultyPathSegment seg = find_faulty_path(c.program, c.fault, budget);
    FaultSignature sig = synthesize(seg, c.program);
    row.signature_found = true;
    row.approximate = seg.approximate;
    for (StmtId id : seg.stmt_ids()) row.segment_lines.push_back(c.program.find_stmt(id)->loc.line);
    for (std::size_t i = 0; i < seg.nodes.size(); ++i) {
      for (const auto& r : sig.manifest.line_map) {
        if (r.node == static_cast<int>(i)) {
          row.signature_lines.push_back(r.sig_line);
          break;
        }
      }
    }

    stage = "minimality";
    row.minimal = verify_sufficiency(c.program, seg.nodes, seg.fault);
    for (std::size_t i = 0; row.minimal && i < seg.nodes.size(); ++i) {
      auto trial = seg.nodes;
      trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(i));
      if (verify_sufficiency(c.program, trial, seg.fault)) row.minimal = false;
    }
    if (seg.nodes.size() <= 8) row.brute_force_size = brute_force_minimum(c.program, seg);

    stage = "fuzz";
    FuzzCampaign on_sig = fuzz(campaign(sig.program, sig.fault, cfg));
    row.fuzz_sig_found = !on_sig.findings.empty();
    row.fuzz_sig_iterations = on_sig.iterations;
    FuzzCampaign on_orig_setup = campaign(c.program, c.fault, cfg);
    auto ids = seg.stmt_ids();
    on_orig_setup.focus = std::set<StmtId>(ids.begin(), ids.end());
    FuzzCampaign on_orig = fuzz(std::move(on_orig_setup));
    row.fuzz_orig_found = !on_orig.findings.empty();
    row.fuzz_orig_iterations = on_orig.iterations;

    stage = "reproduce";
    std::vector<std::string> candidates{c.failing_input};
    if (auto skip = records_before(c.program, c.failing_input, sig.manifest.entry_original, opts); skip && *skip > 0) {
      auto recs = split_records(c.failing_input);
      recs.erase(recs.begin(), recs.begin() + static_cast<std::ptrdiff_t>(std::min(*skip, recs.size())));
      candidates.push_back(join_records(recs));
    }
    if (row.fuzz_sig_found) candidates.push_back(on_sig.findings.front().input);
    ExecOutcome sig_run;
    for (const auto& in : candidates) {
      sig_run = run(sig.program, in, opts);
      if (reproduces(sig_run, sig)) {
        row.reproduced_by_test = true;
        row.satisfying_input = in;
        break;
      }
    }
    if (row.reproduced_by_test) row.subsequence = is_subsequence(sig.mapped_trace(sig_run.trace), failing.trace);

    stage = "substitute";
    SubstitutedOutcome sub = run_substituted(c.program, sig.program, sig.plan(), c.failing_input, opts);
    row.reproduced_by_substitution = sub.entered_signature && reproduces(sub.outcome, sig);

    stage = "metrics";
    MetricsRow mo = metrics(c.program);
    MetricsRow ms = metrics(sig.program);
    row.original_loc = mo.loc;
    row.original_cyclomatic = mo.cyclomatic;
    row.signature_loc = ms.loc;
    row.signature_cyclomatic = ms.cyclomatic;
    Slice st = static_slice(c.program, c.fault.fault_loc);
    row.static_slice_nodes = st.nodes.size();
    row.slice_loc = slice_loc(c.program, st);
    row.dynamic_slice_nodes = dynamic_slice(c.program, c.fault.fault_loc, failing).nodes.size();

    stage = "relation";
    std::string finding = row.fuzz_sig_found ? on_sig.findings.front().input : row.satisfying_input;
    std::vector<std::string> reaching;
    if (c.passing_input) reaching.push_back(*c.passing_input);
    row.relation = to_string(classify_input_relation(c.program, c.fault, sig, finding, reaching, opts).relation);

    stage = "patch";
    std::vector<std::string> fails{c.failing_input};
    std::vector<std::string> passes;
    if (c.passing_input) passes.push_back(*c.passing_input);
    std::optional<Program> reference;
    if (c.developer_patch) {
      reference = apply_patch(c.program, *c.developer_patch);
      row.patch_effect = to_string(classify_patch_effect(c.program, *reference, c.fault, fails, passes, nullptr, opts).effect);
      try {
        FaultSignature patched = transfer_patch(*c.developer_patch, sig);
        row.patch_transferred = true;
        FuzzCampaign check = fuzz(campaign(patched.program, patched.fault, cfg));
        row.patched_fuzz_findings = check.findings.size();
        row.patch_validated = check.findings.empty();
      } catch (const CannotPatch& e) {
        row.patch_error = e.what();
      }
    }
    if (c.signature_patch) {
      const auto& sp = *c.signature_patch;
      StmtId at = find_by_text(sig.program, sp.match);
      if (at == kNoStmt) throw Error("signature has no statement '" + sp.match + "'");
      Patch on_sig_patch;
      on_sig_patch.edits.push_back({at, 0, sp.action, sp.text});
      Program lifted = apply_patch(c.program, lift_patch(on_sig_patch, sig));
      row.signature_patch_effect = to_string(
          classify_patch_effect(c.program, lifted, c.fault, fails, passes, reference ? &*reference : nullptr, opts)
              .effect);
    }
  } catch (const std::exception& e) {
    row.error = stage + ": " + e.what();
  }
  return row;
}

ExperimentReport run_experiments(const std::vector<CorpusCase>& corpus, const Config& cfg) {
  ExperimentReport rep;
  rep.seed = cfg.seed;
  rep.config = cfg;
  rep.rows.resize(corpus.size());
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (std::size_t i = next++; i < corpus.size(); i = next++) rep.rows[i] = run_case(corpus[i], cfg);
  };
  unsigned n = std::max(1u, std::min<unsigned>(cfg.workers, static_cast<unsigned>(corpus.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  std::sort(rep.rows.begin(), rep.rows.end(), [](const CaseRow& a, const CaseRow& b) { return a.name < b.name; });
  return rep;
}

nlohmann::json ExperimentReport::aggregates() const {
  auto count = [&](auto pred) {
    return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), pred));
  };
  double sig_cc = 0;
  double orig_cc = 0;
  std::size_t found = count([](const CaseRow& r) { return r.signature_found; });
  for (const auto& r : rows) {
    if (!r.signature_found) continue;
    sig_cc += r.signature_cyclomatic;
    orig_cc += r.original_cyclomatic;
  }
  if (found > 0) {
    sig_cc /= static_cast<double>(found);
    orig_cc /= static_cast<double>(found);
  }
  std::size_t labeled = count([](const CaseRow& r) { return r.expected_relation != "Unknown"; });
  std::size_t labeled_ok = count([](const CaseRow& r) {
    return r.expected_relation != "Unknown" && r.relation == r.expected_relation;
  });
  return {{"cases", rows.size()},
          {"errors", count([](const CaseRow& r) { return !r.error.empty(); })},
          {"signature_found", found},
          {"approximate", count([](const CaseRow& r) { return r.approximate; })},
          {"reproduced_by_test", count([](const CaseRow& r) { return r.reproduced_by_test; })},
          {"reproduced_by_substitution", count([](const CaseRow& r) { return r.reproduced_by_substitution; })},
          {"subsequence", count([](const CaseRow& r) { return r.subsequence; })},
          {"minimal", count([](const CaseRow& r) { return r.minimal; })},
          {"smaller_than_slice", count([](const CaseRow& r) { return r.signature_found && r.signature_loc < r.slice_loc; })},
          {"smaller_than_original",
           count([](const CaseRow& r) { return r.signature_found && r.signature_loc < r.original_loc; })},
          {"mean_signature_cyclomatic", sig_cc},
          {"mean_original_cyclomatic", orig_cc},
          {"patch_present", count([](const CaseRow& r) { return r.patch_present; })},
          {"patch_transferred", count([](const CaseRow& r) { return r.patch_transferred; })},
          {"patch_validated", count([](const CaseRow& r) { return r.patch_validated; })},
          {"fuzz_sig_found", count([](const CaseRow& r) { return r.fuzz_sig_found; })},
          {"fuzz_orig_found", count([](const CaseRow& r) { return r.fuzz_orig_found; })},
          {"relation_same", count([](const CaseRow& r) { return r.relation == "Same"; })},
          {"relation_partial", count([](const CaseRow& r) { return r.relation == "Partial"; })},
          {"relation_unknown", count([](const CaseRow& r) { return r.relation == "Unknown"; })},
          {"relation_labeled", labeled},
          {"relation_labeled_match", labeled_ok}};
}

nlohmann::json ExperimentReport::to_json() const {
  nlohmann::json rs = nlohmann::json::array();
  for (const auto& r : rows) rs.push_back(r.to_json());
  return {{"seed", seed}, {"config", config.to_json()}, {"rows", rs}, {"aggregates", aggregates()}};
}

namespace {

std::string csv_cell(const nlohmann::json& v) {
  std::string s = v.is_string() ? v.get<std::string>() : v.dump();
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

}  // namespace

std::string ExperimentReport::to_csv() const {
  std::ostringstream out;
  std::vector<std::string> cols;
  const nlohmann::json blank = CaseRow{}.to_json();
  for (const auto& [k, v] : blank.items()) cols.push_back(k);
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << "\n";
  for (const auto& r : rows) {
    nlohmann::json j = r.to_json();
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << csv_cell(j[cols[i]]);
    out << "\n";
  }
  return out.str();
}

std::string ExperimentReport::to_table() const {
  std::ostringstream out;
  auto yn = [](bool b) { return b ? "y" : "-"; };
  out << std::left << std::setw(20) << "case" << std::setw(17) << "fault" << "sig test sub seq min "
      << " loc(o/s/sl)   cc(o/s) patch fz(s/o) relation\n";
  for (const auto& r : rows) {
    std::ostringstream loc;
    loc << r.original_loc << "/" << r.signature_loc << "/" << r.slice_loc;
    std::ostringstream cc;
    cc << r.original_cyclomatic << "/" << r.signature_cyclomatic;
    std::string patch = !r.patch_present ? "n/a" : r.patch_validated ? "ok" : r.patch_transferred ? "fail" : "cant";
    out << std::left << std::setw(20) << r.name << std::setw(17) << r.fault_type << std::setw(4)
        << yn(r.signature_found) << std::setw(5) << yn(r.reproduced_by_test) << std::setw(4)
        << yn(r.reproduced_by_substitution) << std::setw(4) << yn(r.subsequence) << std::setw(5) << yn(r.minimal)
        << std::setw(14) << loc.str() << std::setw(8) << cc.str() << std::setw(6) << patch << std::setw(8)
        << (std::string(yn(r.fuzz_sig_found)) + "/" + yn(r.fuzz_orig_found)) << r.relation;
    if (!r.relation.empty() && r.expected_relation != r.relation) out << " (expected " << r.expected_relation << ")";
    if (!r.error.empty()) out << "  ERROR " << r.error;
    out << "\n";
  }
  nlohmann::json a = aggregates();
  out << "\n";
  for (const auto& [k, v] : a.items()) out << "  " << k << ": " << v.dump() << "\n";
  return out.str();
}

}  // namespace sigforge

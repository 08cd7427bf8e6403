#include "sigforge/patch.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>

#include "sigforge/frontend.hpp"

namespace sigforge {

std::string to_string(EditAction a) {
  switch (a) {
    case EditAction::Replace: return "replace";
    case EditAction::InsertBefore: return "insert_before";
    case EditAction::InsertAfter: return "insert_after";
    case EditAction::Delete: return "delete";
  }
  return "?";
}

EditAction parse_edit_action(const std::string& s) {
  std::string k = s;
  std::transform(k.begin(), k.end(), k.begin(), [](unsigned char c) { return c == '-' ? '_' : std::tolower(c); });
  if (k == "replace") return EditAction::Replace;
  if (k == "insert_before" || k == "insertbefore") return EditAction::InsertBefore;
  if (k == "insert_after" || k == "insertafter") return EditAction::InsertAfter;
  if (k == "delete") return EditAction::Delete;
  throw Error("unknown edit action '" + s + "'");
}

std::string to_string(PatchEffect e) {
  switch (e) {
    case PatchEffect::Fix: return "Fix";
    case PatchEffect::FixWithSideEffect: return "FixWithSideEffect";
    case PatchEffect::NotAFix: return "NotAFix";
  }
  return "?";
}

Patch Patch::resolved(const Program& program) const {
  Patch out = *this;
  std::set<StmtId> seen;
  for (auto& e : out.edits) {
    if (e.target == kNoStmt) {
      if (e.line <= 0) throw Error("patch edit has neither stmt_id nor line");
      e.target = resolve_line(program, e.line);
    }
    if (!seen.insert(e.target).second) throw Error("patch edits target stmt " + std::to_string(e.target) + " twice");
  }
  return out;
}

nlohmann::json Patch::to_json() const {
  nlohmann::json edits_json = nlohmann::json::array();
  for (const auto& e : edits) {
    nlohmann::json j{{"action", to_string(e.action)}};
    if (e.target != kNoStmt) j["stmt_id"] = e.target;
    if (e.line > 0) j["line"] = e.line;
    if (e.action != EditAction::Delete) j["text"] = e.text;
    edits_json.push_back(j);
  }
  return {{"edits", edits_json}};
}

Patch Patch::from_json(const nlohmann::json& j) {
  Patch p;
  for (const auto& e : j.at("edits")) {
    PatchEdit edit;
    edit.target = e.value("stmt_id", kNoStmt);
    edit.line = e.value("line", 0);
    edit.action = parse_edit_action(e.at("action").get<std::string>());
    edit.text = e.value("text", std::string());
    if (edit.action != EditAction::Delete && edit.text.empty()) throw Error("patch edit without text");
    p.edits.push_back(edit);
  }
  return p;
}

namespace {

struct Tag {
  std::vector<LineOrigin> rows;
  std::string transfer;
};

StmtId max_id(const Stmt& s) {
  StmtId m = s.loc.stmt_id;
  std::vector<Stmt> v{s};
  for_each_stmt(v, [&](const Stmt& x) { m = std::max(m, x.loc.stmt_id); });
  return m;
}

Stmt* find_equal(std::vector<Stmt>& v, const Stmt& like) {
  Stmt* hit = nullptr;
  for_each_stmt(v, [&](Stmt& x) {
    if (!hit && x.kind != StmtKind::Block && structurally_equal(x, like)) hit = &x;
  });
  return hit;
}

class Editor {
 public:
  Editor(StmtId next, std::map<StmtId, Tag>* tags) : next_(next), tags_(tags) {}

  int apply(std::vector<Stmt>& v, const std::set<StmtId>& targets, const PatchEdit& e) {
    int done = 0;
    for (std::size_t i = 0; i < v.size();) {
      if (!targets.count(v[i].loc.stmt_id)) {
        done += apply(v[i].body, targets, e) + apply(v[i].else_body, targets, e) + apply(v[i].latch, targets, e);
        ++i;
        continue;
      }
      ++done;
      switch (e.action) {
        case EditAction::Delete:
          v.erase(v.begin() + static_cast<std::ptrdiff_t>(i));
          break;
        case EditAction::InsertBefore:
          v.insert(v.begin() + static_cast<std::ptrdiff_t>(i), fresh(e.text));
          i += 2;
          break;
        case EditAction::InsertAfter:
          v.insert(v.begin() + static_cast<std::ptrdiff_t>(i) + 1, fresh(e.text));
          i += 2;
          break;
        case EditAction::Replace:
          replace(v[i], e.text);
          ++i;
          break;
      }
    }
    return done;
  }

 private:
  Stmt fresh(const std::string& text) {
    Stmt s;
    try {
      s = parse_statement(text, next_);
    } catch (const Error& err) {
      throw CannotPatch("patch text does not parse: " + text + " (" + err.what() + ")");
    }
    next_ = max_id(s) + 1;
    return s;
  }

  void replace(Stmt& old, const std::string& text) {
    bool header = (old.kind == StmtKind::If || old.kind == StmtKind::While) && text.find('{') == std::string::npos;
    if (header) {
      Stmt h = fresh(text + " {}");
      if (h.kind != old.kind) throw CannotPatch("header replacement changes statement kind: " + text);
      old.value = h.value;
      return;
    }
    Stmt n = fresh(text);
    if (tags_) {
      auto it = tags_->find(old.loc.stmt_id);
      if (it != tags_->end()) {
        Tag t = it->second;
        tags_->erase(it);
        std::vector<Stmt> holder{n};
        Stmt* same = find_equal(holder, old);
        StmtId heir = same ? same->loc.stmt_id : n.loc.stmt_id;
        (*tags_)[heir] = t;
      }
    }
    old = std::move(n);
  }

  StmtId next_;
  std::map<StmtId, Tag>* tags_;
};

void apply_all(Program& p, const Patch& patch, std::map<StmtId, Tag>* tags,
               const std::function<std::set<StmtId>(const PatchEdit&)>& targets_of) {
  Editor ed(p.max_stmt_id() + 1, tags);
  for (const auto& e : patch.edits) {
    auto targets = targets_of(e);
    int n = ed.apply(p.globals, targets, e);
    for (auto& f : p.functions) n += ed.apply(f.body.body, targets, e);
    if (n == 0) throw CannotPatch("statement " + std::to_string(e.target) + " is not present");
  }
}

}  // namespace

Program apply_patch(const Program& program, const Patch& patch) {
  Patch pr = patch.resolved(program);
  Program w = program;
  apply_all(w, pr, nullptr, [](const PatchEdit& e) { return std::set<StmtId>{e.target}; });
  Program out = parse(emit_source(w), program.file);
  try {
    check_program(out);
  } catch (const Error& err) {
    throw CannotPatch(std::string("patched program is invalid: ") + err.what());
  }
  return out;
}

FaultSignature transfer_patch(const Patch& patch, const FaultSignature& signature) {
  const auto& m = signature.manifest;
  Program w = signature.program;
  std::map<StmtId, Tag> tags;
  std::map<StmtId, std::set<StmtId>> by_origin;
  int last_node = -1;
  for (const auto& r : m.line_map) last_node = std::max(last_node, r.node);
  for (const Stmt* s : w.all_statements()) {
    if (s->kind == StmtKind::Block) continue;
    Tag t;
    for (const auto& r : m.line_map) {
      if (r.sig_line != s->loc.line) continue;
      t.rows.push_back(r);
      if (!r.scaffold()) by_origin[r.origin].insert(s->loc.stmt_id);
    }
    auto tr = m.transfers.find(s->loc.line);
    if (tr != m.transfers.end()) t.transfer = tr->second;
    tags[s->loc.stmt_id] = t;
  }
  for (const auto& e : patch.edits) {
    if (e.target == kNoStmt) throw CannotPatch("signature patches must be keyed by original stmt_id");
    if (!by_origin.count(e.target)) {
      throw CannotPatch("the signature does not contain original statement " + std::to_string(e.target));
    }
  }
  apply_all(w, patch, &tags, [&](const PatchEdit& e) { return by_origin.at(e.target); });

  std::vector<EmittedLine> lines;
  std::string text = emit_source(w, &lines);
  SignatureManifest pm = m;
  pm.line_map.clear();
  pm.transfers.clear();
  int fault_line = 0;
  for (const auto& l : lines) {
    auto it = tags.find(l.stmt->loc.stmt_id);
    if (it == tags.end() || it->second.rows.empty()) {
      pm.line_map.push_back({l.line, kNoStmt, -1});
    } else {
      for (auto r : it->second.rows) {
        r.sig_line = l.line;
        if (r.node == last_node && last_node >= 0) fault_line = l.line;
        pm.line_map.push_back(r);
      }
    }
    if (it != tags.end() && !it->second.transfer.empty()) pm.transfers[l.line] = it->second.transfer;
  }

  FaultSignature out;
  out.source = text;
  std::string file = signature.program.file.empty() ? "signature.mc" : signature.program.file;
  out.program = parse(text, file);
  try {
    check_program(out.program);
  } catch (const Error& err) {
    throw CannotPatch(std::string("patched signature is invalid: ") + err.what());
  }
  out.manifest = pm;
  out.manifest.fault_loc_signature = SourceLoc{file, fault_line, 0, kNoStmt};
  out.fault.fault_type = m.fault_type;
  out.fault.fault_loc = out.manifest.fault_loc_signature;
  if (fault_line > 0) {
    try {
      out.fault = analyze_fault(out.program, out.manifest.fault_loc_signature, m.fault_type);
      out.manifest.fault_loc_signature = out.fault.fault_loc;
    } catch (const Error&) {
      // the fault statement was rewritten beyond the template
    }
  }
  return out;
}

Patch lift_patch(const Patch& on_signature, const FaultSignature& signature) {
  Patch p = on_signature.resolved(signature.program);
  for (auto& e : p.edits) {
    const Stmt* s = signature.program.find_stmt(e.target);
    StmtId o = s ? signature.manifest.origin_of_line(s->loc.line) : kNoStmt;
    if (o == kNoStmt) throw CannotPatch("signature statement " + std::to_string(e.target) + " has no original");
    e.target = o;
    e.line = 0;
  }
  return p;
}

nlohmann::json PatchClassification::to_json() const {
  return {{"effect", to_string(effect)}, {"still_failing", still_failing}, {"changed", changed}};
}

bool same_behavior(const ExecOutcome& a, const ExecOutcome& b) {
  if (a.verdict.kind != b.verdict.kind || a.output != b.output) return false;
  if (a.verdict.kind == VerdictKind::NormalExit) return a.verdict.exit_code == b.verdict.exit_code;
  if (a.verdict.kind == VerdictKind::Fault) return a.verdict.fault == b.verdict.fault;
  return true;
}

PatchClassification classify_patch_effect(const Program& original, const Program& patched, const FaultSpec& fault,
                                          const std::vector<std::string>& failing_inputs,
                                          const std::vector<std::string>& passing_inputs, const Program* reference,
                                          const ExecOptions& options) {
  PatchClassification c;
  const Stmt* fstmt = original.find_stmt(fault.fault_loc.stmt_id);
  for (const auto& in : failing_inputs) {
    ExecOutcome r = run(patched, in, options);
    if (r.verdict.is_fault() && r.verdict.fault == fault.fault_type) {
      const Stmt* at = patched.find_stmt(r.verdict.loc.stmt_id);
      if (at && fstmt && structurally_equal(*at, *fstmt)) c.still_failing.push_back(in);
    }
  }
  for (const auto& in : passing_inputs) {
    if (!same_behavior(run(original, in, options), run(patched, in, options))) c.changed.push_back(in);
  }
  if (reference) {
    for (const auto* group : {&failing_inputs, &passing_inputs}) {
      for (const auto& in : *group) {
        if (std::find(c.changed.begin(), c.changed.end(), in) != c.changed.end()) continue;
        if (!same_behavior(run(*reference, in, options), run(patched, in, options))) c.changed.push_back(in);
      }
    }
  }
  if (!c.still_failing.empty()) {
    c.effect = PatchEffect::NotAFix;
  } else if (!c.changed.empty()) {
    c.effect = PatchEffect::FixWithSideEffect;
  } else {
    c.effect = PatchEffect::Fix;
  }
  return c;
}

}  // namespace sigforge

#include "sigforge/signature.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "sigforge/frontend.hpp"

namespace sigforge {

namespace {

constexpr std::int64_t kStubCap = 100;

bool is_literal(const ExprPtr& e) {
  bool ok = true;
  for_each_expr(e, [&](const Expr& x) {
    if (x.kind == ExprKind::Ident || x.kind == ExprKind::Call) ok = false;
  });
  return ok;
}

Stmt make_stmt(StmtKind kind) {
  Stmt s;
  s.kind = kind;
  return s;
}

Stmt decl(const Type& t, const std::string& name, ExprPtr init) {
  Stmt s = make_stmt(StmtKind::VarDecl);
  s.type = t;
  s.name = name;
  s.init = std::move(init);
  return s;
}

Stmt assign(ExprPtr target, ExprPtr value) {
  Stmt s = make_stmt(StmtKind::Assign);
  s.target = std::move(target);
  s.value = std::move(value);
  return s;
}

Stmt expr_stmt(ExprPtr e) {
  Stmt s = make_stmt(StmtKind::ExprStmt);
  s.value = std::move(e);
  return s;
}

struct Origin {
  StmtId stmt = kNoStmt;
  int node = -1;
};

// Synthesized statements carry an index into the tag table in loc.stmt_id
// until the text is re-parsed.
struct Tag {
  std::vector<Origin> origins;
  std::string transfer;
};

class Synth {
 public:
  Synth(const FaultyPathSegment& seg, const Program& program) : seg_(seg), prog_(program) {}

  FaultSignature run() {
    name_variables();
    std::vector<Stmt> body = range(0, seg_.nodes.size());
    for (const auto& t : seg_.tail) {
      for (auto& st : plain(stmt(t), func_of(t))) {
        tag(st, t.stmt, -1);
        body.push_back(std::move(st));
      }
    }
    std::vector<Stmt> main_body = place(scaffold_locals(), std::move(body));

    Program sig;
    sig.file = "signature.mc";
    sig.globals = scaffold_globals();
    FuncDef main;
    main.ret = Type{BaseType::Int, 0, std::nullopt};
    main.name = "main";
    main.body = make_stmt(StmtKind::Block);
    main.body.body = std::move(main_body);
    sig.functions.push_back(std::move(main));

    std::vector<EmittedLine> lines;
    std::string text = emit_source(sig, &lines);
    SignatureManifest m;
    m.original_file = prog_.file;
    m.fault_type = seg_.fault.fault_type;
    m.fault_loc_original = seg_.fault.fault_loc;
    m.entry_original = seg_.entry_node();
    m.approximate = seg_.approximate;
    for (const auto& l : lines) {
      auto id = static_cast<std::size_t>(l.stmt->loc.stmt_id);
      const Tag* t = id > 0 && id <= tags_.size() ? &tags_[id - 1] : nullptr;
      if (!t || t->origins.empty()) {
        m.line_map.push_back({l.line, kNoStmt, -1});
      } else {
        for (const auto& o : t->origins) m.line_map.push_back({l.line, o.stmt, o.node});
      }
      if (t && !t->transfer.empty()) m.transfers[l.line] = t->transfer;
    }
    int fault_line = 0;
    for (const auto& r : m.line_map) {
      if (r.node == static_cast<int>(seg_.nodes.size()) - 1) fault_line = r.sig_line;
    }
    if (fault_line == 0) throw SynthesisFailure("fault statement was not emitted");
    m.fault_loc_signature = SourceLoc{"signature.mc", fault_line, 0, kNoStmt};
    return load_signature(text, m);
  }

 private:
  std::string func_of(const SegmentNode& n) const { return prog_.function_of(n.stmt); }

  VarKey key(const std::string& name, const std::string& func) const {
    Scope sc{&prog_, prog_.find_function(func)};
    return sc.resolve(name);
  }

  const Stmt& stmt(const SegmentNode& n) const { return *prog_.find_stmt(n.stmt); }

  const Expr* call_of(const SegmentNode& n) const { return user_call(prog_, stmt(n)); }

  void note(const VarKey& k) {
    if (std::find(order_.begin(), order_.end(), k) == order_.end()) order_.push_back(k);
  }

  void note_expr(const ExprPtr& e, const std::string& func) {
    if (!e) return;
    std::vector<std::string> ids;
    collect_idents(e, ids);
    for (const auto& n : ids) note(key(n, func));
  }

  // Variables in first-reference order; records which ones the segment declares.
  void name_variables() {
    for (std::size_t i = 0; i < seg_.nodes.size(); ++i) {
      const SegmentNode& n = seg_.nodes[i];
      const Stmt& s = stmt(n);
      std::string func = func_of(n);
      if (n.role == NodeRole::CallBind) {
        const Expr* call = call_of(n);
        for (const auto& a : call->args) note_expr(a, func);
        for (const auto& p : prog_.find_function(call->text)->params) note({call->text, p.name});
        continue;
      }
      if (n.role == NodeRole::CallReturn || n.role == NodeRole::OpaqueCall) {
        if (s.kind == StmtKind::VarDecl) {
          VarKey k = key(s.name, func);
          if (std::find(order_.begin(), order_.end(), k) == order_.end()) declared_.insert(k);
          note(k);
        } else if (s.kind == StmtKind::Assign) {
          note_expr(s.target, func);
        }
        if (n.role == NodeRole::OpaqueCall && s.kind == StmtKind::ExprStmt) note_expr(s.value, func);
        continue;
      }
      if (s.kind == StmtKind::VarDecl) {
        note_expr(s.init, func);
        VarKey k = key(s.name, func);
        if (std::find(order_.begin(), order_.end(), k) == order_.end()) declared_.insert(k);
        note(k);
        continue;
      }
      for (const auto& e : stmt_exprs(s)) note_expr(e, func);
    }
    for (const auto& t : seg_.tail) {
      for (const auto& e : stmt_exprs(stmt(t))) note_expr(e, func_of(t));
    }
    std::set<std::string> taken;
    for (const auto& g : prog_.globals) taken.insert(g.name);
    for (const auto& k : order_) {
      if (k.is_global()) continue;
      std::string name = k.name;
      if (taken.count(name)) name = k.name + "_" + k.func;
      for (int i = 2; taken.count(name); ++i) name = k.name + "_" + k.func + std::to_string(i);
      taken.insert(name);
      names_[k] = name;
    }
  }

  std::string name_of(const VarKey& k) const {
    if (k.is_global()) return k.name;
    return names_.at(k);
  }

  ExprPtr rename(const ExprPtr& e, const std::string& func) const {
    if (!e) return e;
    auto copy = std::make_shared<Expr>(*e);
    if (copy->kind == ExprKind::Ident) copy->text = name_of(key(e->text, func));
    for (auto& a : copy->args) a = rename(a, func);
    return copy;
  }

  std::string ret_name(const std::string& callee) {
    std::string n = callee + "_ret";
    while (std::any_of(prog_.globals.begin(), prog_.globals.end(), [&](const Stmt& g) { return g.name == n; }) ||
           std::any_of(names_.begin(), names_.end(), [&](const auto& kv) { return kv.second == n; })) {
      n += "_";
    }
    if (!ret_types_.count(n)) ret_types_[n] = prog_.find_function(callee)->ret;
    return n;
  }

  Type type_of(const VarKey& k) const {
    Scope sc{&prog_, prog_.find_function(k.func)};
    auto t = sc.type_of(k);
    return t ? *t : Type{BaseType::Int, 0, std::nullopt};
  }

  // Value standing in for a call whose body is not part of the segment.
  std::vector<Stmt> stub(ExprPtr target, const Type& t) {
    std::vector<Stmt> out;
    if (t.is_pointer()) {
      out.push_back(assign(target, Expr::call("malloc", {Expr::int_lit(kStubCap)})));
      out.push_back(expr_stmt(Expr::call("read_line", {target, Expr::int_lit(kStubCap)})));
    } else {
      need_stub_buffer_ = true;
      out.push_back(assign(target, Expr::call("read_line", {Expr::ident(stub_buffer()), Expr::int_lit(12)})));
    }
    return out;
  }

  std::string stub_buffer() const { return "stub_input"; }

  Tag& tag_of(Stmt& s) {
    if (s.loc.stmt_id == kNoStmt) {
      tags_.emplace_back();
      s.loc.stmt_id = static_cast<StmtId>(tags_.size());
    }
    return tags_[static_cast<std::size_t>(s.loc.stmt_id) - 1];
  }

  void tag(Stmt& s, StmtId origin, int node) { tag_of(s).origins.push_back({origin, node}); }

  // Nodes governed (directly or through nested kept branches) by node i end here.
  std::size_t governed_end(std::size_t i, std::size_t limit) const {
    std::set<std::size_t> inside{seg_.nodes[i].pos};
    std::size_t end = i;
    for (std::size_t j = i + 1; j < limit; ++j) {
      const auto& needs = seg_.nodes[j].needs;
      if (std::any_of(needs.begin(), needs.end(), [&](std::size_t p) { return inside.count(p) > 0; })) {
        inside.insert(seg_.nodes[j].pos);
        end = j;
      }
    }
    return end;
  }

  std::vector<Stmt> range(std::size_t from, std::size_t to) {
    std::vector<Stmt> out;
    std::size_t last = seg_.nodes.size() - 1;
    for (std::size_t i = from; i < to; ++i) {
      const SegmentNode& n = seg_.nodes[i];
      const Stmt& s = stmt(n);
      std::string func = func_of(n);
      int idx = static_cast<int>(i);
      if (n.branch) {
        bool loop_fault = seg_.fault.fault_type == FaultType::InfiniteLoop && to > last && i < last &&
                          n.stmt == seg_.nodes[last].stmt &&
                          std::none_of(seg_.nodes.begin() + static_cast<std::ptrdiff_t>(i) + 1,
                                       seg_.nodes.begin() + static_cast<std::ptrdiff_t>(last),
                                       [&](const SegmentNode& m) { return m.stmt == n.stmt; });
        if (loop_fault) {
          Stmt w = make_stmt(StmtKind::While);
          w.value = rename(s.value, func);
          w.body = range(i + 1, last);
          out.push_back(std::move(w));
          tag(out.back(), n.stmt, idx);
          tag(out.back(), n.stmt, static_cast<int>(last));
          return out;
        }
        std::size_t end = std::min(governed_end(i, to), to - 1);
        Stmt b = make_stmt(StmtKind::If);
        b.value = rename(s.value, func);
        std::vector<Stmt> inner = range(i + 1, end + 1);
        if (n.taken) {
          b.body = std::move(inner);
        } else {
          b.has_else = true;
          b.else_body = std::move(inner);
        }
        out.push_back(std::move(b));
        tag(out.back(), n.stmt, idx);
        i = end;
        continue;
      }
      std::vector<Stmt> made;
      switch (n.role) {
        case NodeRole::CallBind: {
          const Expr* call = call_of(n);
          const FuncDef* callee = prog_.find_function(call->text);
          for (std::size_t p = 0; p < callee->params.size(); ++p) {
            made.push_back(assign(Expr::ident(name_of({callee->name, callee->params[p].name})),
                                  rename(call->args[p], func)));
          }
          pending_ret_.erase(callee->name);
          break;
        }
        case NodeRole::CallReturn:
        case NodeRole::OpaqueCall: {
          const Expr* call = call_of(n);
          ExprPtr target;
          Type t;
          if (s.kind == StmtKind::VarDecl) {
            VarKey k = key(s.name, func);
            target = Expr::ident(name_of(k));
            t = s.type;
          } else if (s.kind == StmtKind::Assign) {
            target = rename(s.target, func);
            t = s.target->kind == ExprKind::Ident ? type_of(key(s.target->text, func))
                                                    : Type{BaseType::Int, 0, std::nullopt};
          }
          if (!target) break;
          bool returned = n.role == NodeRole::CallReturn && pending_ret_.count(call->text);
          if (returned) {
            made.push_back(assign(target, Expr::ident(ret_name(call->text))));
            pending_ret_.erase(call->text);
          } else {
            made = stub(target, t);
          }
          if (s.kind == StmtKind::VarDecl) {
            VarKey k = key(s.name, func);
            if (declared_.count(k) && !emitted_decl_.count(k)) {
              emitted_decl_.insert(k);
              made.front() = decl(s.type, name_of(k), made.front().value);
            }
          }
          break;
        }
        default:
          made = plain(s, func);
      }
      for (std::size_t k = 0; k < made.size(); ++k) {
        out.push_back(std::move(made[k]));
        // stub helpers after the first line are scaffolding
        if (k == 0 || n.role == NodeRole::CallBind || n.role == NodeRole::Plain) tag(out.back(), n.stmt, idx);
      }
    }
    return out;
  }

  std::vector<Stmt> plain(const Stmt& s, const std::string& func) {
    std::vector<Stmt> out;
    switch (s.kind) {
      case StmtKind::VarDecl: {
        VarKey k = key(s.name, func);
        std::string name = name_of(k);
        if (declared_.count(k) && !emitted_decl_.count(k)) {
          emitted_decl_.insert(k);
          out.push_back(decl(s.type, name, rename(s.init, func)));
        } else if (s.init) {
          out.push_back(assign(Expr::ident(name), rename(s.init, func)));
        } else if (s.type.is_array()) {
          auto cell = std::make_shared<Expr>();
          cell->kind = ExprKind::Index;
          cell->args = {Expr::ident(name), Expr::int_lit(0)};
          out.push_back(assign(cell, Expr::int_lit(0)));
        } else {
          out.push_back(assign(Expr::ident(name), Expr::int_lit(0)));
        }
        return out;
      }
      case StmtKind::Return: {
        if (func == "main" || !s.init) {
          if (func == "main") {
            Stmt r = make_stmt(StmtKind::Return);
            r.init = rename(s.init, func);
            out.push_back(std::move(r));
          }
          return out;
        }
        std::string r = ret_name(func);
        pending_ret_.insert(func);
        out.push_back(assign(Expr::ident(r), rename(s.init, func)));
        return out;
      }
      case StmtKind::Break:
      case StmtKind::Continue: return out;
      default: {
        Stmt c = make_stmt(s.kind);
        c.value = rename(s.value, func);
        c.target = rename(s.target, func);
        out.push_back(std::move(c));
        return out;
      }
    }
  }

  std::vector<Stmt> scaffold_locals() {
    std::vector<Stmt> out;
    std::set<std::string> active = active_functions();
    for (const auto& k : order_) {
      if (k.is_global() || declared_.count(k)) continue;
      Type t = type_of(k);
      ExprPtr init;
      Scope sc{&prog_, prog_.find_function(k.func)};
      if (const Stmt* d = sc.declaration(k); d && d->init && is_literal(d->init)) init = d->init;
      if (!init && !t.is_array()) init = Expr::int_lit(0);
      out.push_back(decl(t, name_of(k), init));
      if (active.count(k.func)) tag_of(out.back()).transfer = k.name;
    }
    for (const auto& [name, t] : ret_types_) out.push_back(decl(t, name, t.is_array() ? nullptr : Expr::int_lit(0)));
    if (need_stub_buffer_) {
      out.push_back(decl(Type{BaseType::Char, 0, 12}, stub_buffer(), nullptr));
    }
    return out;
  }

  // Each scaffold declaration goes right before the first statement using it.
  static std::vector<Stmt> place(std::vector<Stmt> decls, std::vector<Stmt> body) {
    std::vector<Stmt> out;
    std::vector<bool> done(decls.size(), false);
    std::vector<Stmt> ordered;
    for (auto& b : body) {
      std::vector<std::string> used;
      for_each_stmt(std::vector<Stmt>{b}, [&](const Stmt& x) {
        for (const auto& e : stmt_exprs(x)) collect_idents(e, used);
        if (x.kind == StmtKind::VarDecl) used.push_back(x.name);
      });
      for (std::size_t d = 0; d < decls.size(); ++d) {
        if (!done[d] && std::find(used.begin(), used.end(), decls[d].name) != used.end()) {
          done[d] = true;
          ordered.push_back(std::move(decls[d]));
        }
      }
      ordered.push_back(std::move(b));
    }
    for (std::size_t d = 0; d < decls.size(); ++d) {
      if (!done[d]) out.push_back(std::move(decls[d]));
    }
    for (auto& o : ordered) out.push_back(std::move(o));
    return out;
  }

  // Functions with a frame when the original reaches the segment entry.
  std::set<std::string> active_functions() const {
    std::set<std::string> out{"main"};
    if (seg_.nodes.empty()) return out;
    std::size_t entry_pos = seg_.nodes.front().pos;
    std::vector<std::string> stack{"main"};
    for (std::size_t i = 0; i < entry_pos && i < seg_.witness.size(); ++i) {
      const SegmentNode& w = seg_.witness[i];
      const Expr* call = w.role == NodeRole::CallBind || w.role == NodeRole::CallReturn ? call_of(w) : nullptr;
      if (w.role == NodeRole::CallBind && call) stack.push_back(call->text);
      if (w.role == NodeRole::CallReturn && stack.size() > 1) stack.pop_back();
    }
    out.insert(stack.begin(), stack.end());
    return out;
  }

  std::vector<Stmt> scaffold_globals() {
    std::vector<Stmt> out;
    for (const auto& k : order_) {
      if (!k.is_global()) continue;
      Scope sc{&prog_, nullptr};
      const Stmt* d = sc.declaration(k);
      if (!d) continue;
      out.push_back(decl(d->type, d->name, d->init));
      tag_of(out.back()).transfer = d->name;
    }
    return out;
  }

  const FaultyPathSegment& seg_;
  const Program& prog_;
  std::vector<VarKey> order_;
  std::set<VarKey> declared_;
  std::set<VarKey> emitted_decl_;
  std::map<VarKey, std::string> names_;
  std::map<std::string, Type> ret_types_;
  std::set<std::string> pending_ret_;
  bool need_stub_buffer_ = false;
  std::vector<Tag> tags_;
};

}  // namespace

std::vector<StmtId> SignatureManifest::segment_origins() const {
  std::vector<StmtId> out;
  int last = -1;
  for (const auto& r : line_map) {
    if (r.scaffold() || r.node == last) continue;
    out.push_back(r.origin);
    last = r.node;
  }
  return out;
}

StmtId SignatureManifest::origin_of_line(int sig_line) const {
  for (const auto& r : line_map) {
    if (r.sig_line == sig_line) return r.origin;
  }
  return kNoStmt;
}

nlohmann::json SignatureManifest::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : line_map) {
    nlohmann::json row{{"sig_line", r.sig_line}};
    if (r.scaffold()) {
      row["origin"] = "scaffold";
    } else {
      row["origin"] = r.origin;
      row["node"] = r.node;
    }
    rows.push_back(std::move(row));
  }
  nlohmann::json tr = nlohmann::json::object();
  for (const auto& [line, name] : transfers) tr[std::to_string(line)] = name;
  return {{"original_file", original_file},
          {"fault", {{"type", to_string(fault_type)}, {"line", fault_loc_original.line},
                     {"stmt_id", fault_loc_original.stmt_id}}},
          {"fault_line_signature", fault_loc_signature.line},
          {"entry_stmt_id", entry_original},
          {"approximate", approximate},
          {"line_map", rows},
          {"transfers", tr}};
}

SignatureManifest SignatureManifest::from_json(const nlohmann::json& j) {
  SignatureManifest m;
  m.original_file = j.at("original_file").get<std::string>();
  m.fault_type = parse_fault_type(j.at("fault").at("type").get<std::string>());
  m.fault_loc_original.file = m.original_file;
  m.fault_loc_original.line = j.at("fault").at("line").get<int>();
  m.fault_loc_original.stmt_id = j.at("fault").value("stmt_id", kNoStmt);
  m.fault_loc_signature.line = j.at("fault_line_signature").get<int>();
  m.entry_original = j.value("entry_stmt_id", kNoStmt);
  m.approximate = j.value("approximate", false);
  for (const auto& r : j.at("line_map")) {
    LineOrigin o;
    o.sig_line = r.at("sig_line").get<int>();
    if (r.at("origin").is_number()) {
      o.origin = r.at("origin").get<StmtId>();
      o.node = r.value("node", -1);
    }
    m.line_map.push_back(o);
  }
  if (j.contains("transfers")) {
    for (const auto& [line, name] : j.at("transfers").items()) m.transfers[std::stoi(line)] = name.get<std::string>();
  }
  return m;
}

SubstitutionPlan FaultSignature::plan() const {
  SubstitutionPlan p;
  p.entry_original = manifest.entry_original;
  for (const auto& [line, name] : manifest.transfers) {
    for (const Stmt* s : program.statements_on_line(line)) {
      if (s->kind == StmtKind::VarDecl) p.transfers[s->loc.stmt_id] = name;
    }
  }
  return p;
}

std::vector<StmtId> FaultSignature::mapped_trace(const std::vector<StmtId>& trace) const {
  std::vector<StmtId> out;
  for (StmtId id : trace) {
    const Stmt* s = program.find_stmt(id);
    if (!s) continue;
    StmtId o = manifest.origin_of_line(s->loc.line);
    if (o != kNoStmt) out.push_back(o);
  }
  return out;
}

FaultSignature load_signature(const std::string& source, const SignatureManifest& manifest, const std::string& file) {
  FaultSignature sig;
  sig.source = source;
  sig.program = parse(source, file);
  check_program(sig.program);
  sig.manifest = manifest;
  sig.manifest.fault_loc_signature.file = file;
  sig.fault = analyze_fault(sig.program, SourceLoc{file, manifest.fault_loc_signature.line, 0, kNoStmt},
                            manifest.fault_type);
  sig.manifest.fault_loc_signature = sig.fault.fault_loc;
  return sig;
}

FaultSignature synthesize(const FaultyPathSegment& segment, const Program& program) {
  if (segment.nodes.empty()) throw SynthesisFailure("empty segment");
  Synth s(segment, program);
  return s.run();
}

// ---------------------------------------------------------------------------

namespace {

const char* kPreamble = R"(#include <assert.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

static int read_line(char* buf, int n) {
  int c = 0;
  int len = 0;
  if (n <= 0) return -1;
  c = getchar();
  if (c == EOF) {
    buf[0] = 0;
    return -1;
  }
  while (c != EOF && c != '\n') {
    if (len < n - 1) buf[len++] = (char)c;
    c = getchar();
  }
  buf[len] = 0;
  return len;
}

static void print_s(const char* s) { printf("%s\n", s); }
static void print_i(long v) { printf("%ld\n", v); }

)";

bool stringy(const Program& p, const std::string& func, const ExprPtr& e) {
  if (e->kind == ExprKind::StrLit) return true;
  if (e->kind == ExprKind::Ident) {
    Scope sc{&p, p.find_function(func)};
    auto t = sc.type_of(sc.resolve(e->text));
    return t && t->base == BaseType::Char && (t->is_array() || t->pointer == 1);
  }
  if (e->kind == ExprKind::Binary && (e->text == "+" || e->text == "-")) return stringy(p, func, e->args[0]);
  return false;
}

ExprPtr c_expr(const Program& p, const std::string& func, const ExprPtr& e) {
  if (!e) return e;
  auto copy = std::make_shared<Expr>(*e);
  for (auto& a : copy->args) a = c_expr(p, func, a);
  if (copy->kind == ExprKind::Call && copy->text == "print") {
    copy->text = stringy(p, func, e->args[0]) ? "print_s" : "print_i";
  }
  return copy;
}

void c_stmts(const Program& p, const std::string& func, std::vector<Stmt>& v) {
  for (auto& s : v) {
    s.value = c_expr(p, func, s.value);
    s.init = c_expr(p, func, s.init);
    s.target = c_expr(p, func, s.target);
    c_stmts(p, func, s.body);
    c_stmts(p, func, s.else_body);
    c_stmts(p, func, s.latch);
  }
}

}  // namespace

std::string export_c(const FaultSignature& signature) {
  Program c = signature.program;
  for (auto& f : c.functions) c_stmts(signature.program, f.name, f.body.body);
  std::ostringstream out;
  out << "/* fault signature of " << signature.manifest.original_file << ": "
      << to_string(signature.manifest.fault_type) << " at line " << signature.manifest.fault_loc_signature.line
      << " */\n";
  out << kPreamble << emit_source(c);
  return out.str();
}

}  // namespace sigforge

#include "sigforge/interp.hpp"

#include <algorithm>
#include <cstring>

namespace sigforge {

std::string Verdict::describe() const {
  switch (kind) {
    case VerdictKind::NormalExit: return "NormalExit(" + std::to_string(exit_code) + ")";
    case VerdictKind::Timeout: return "Timeout";
    case VerdictKind::Fault: return "Fault(" + to_string(fault) + ") at line " + std::to_string(loc.line);
  }
  return "";
}

nlohmann::json ExecOutcome::to_json(bool with_trace) const {
  nlohmann::json j;
  switch (verdict.kind) {
    case VerdictKind::NormalExit:
      j["verdict"] = "NormalExit";
      j["exit_code"] = verdict.exit_code;
      break;
    case VerdictKind::Timeout: j["verdict"] = "Timeout"; break;
    case VerdictKind::Fault:
      j["verdict"] = "Fault";
      j["fault_type"] = to_string(verdict.fault);
      j["line"] = verdict.loc.line;
      j["stmt_id"] = verdict.loc.stmt_id;
      break;
  }
  j["steps"] = steps;
  if (with_trace) j["trace"] = trace;
  return j;
}

std::vector<std::string> split_records(const std::string& input) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start < input.size()) {
    std::size_t nl = input.find('\n', start);
    if (nl == std::string::npos) {
      out.push_back(input.substr(start));
      break;
    }
    out.push_back(input.substr(start, nl - start));
    start = nl + 1;
  }
  return out;
}

std::string join_records(const std::vector<std::string>& records) {
  std::string s;
  for (const auto& r : records) s += r + "\n";
  return s;
}

bool is_subsequence(const std::vector<StmtId>& sub, const std::vector<StmtId>& full) {
  std::size_t i = 0;
  for (StmtId id : full) {
    if (i < sub.size() && sub[i] == id) ++i;
  }
  return i == sub.size();
}

namespace {

struct Value {
  enum Kind : std::uint8_t { Int, Ptr, Bad };
  Kind k = Int;
  std::int64_t i = 0;   // integer, or offset for Ptr
  int obj = -1;

  static Value integer(std::int64_t v) { return {Int, v, -1}; }
  static Value pointer(int obj, std::int64_t off) { return {Ptr, off, obj}; }
  static Value bad() { return {Bad, 0, -1}; }
};

struct Obj {
  std::vector<Value> cells;
  bool array = false;
  bool heap = false;
  bool freed = false;
  bool live = true;
  int free_count = 0;
  StmtId alloc = kNoStmt;
  StmtId last_use = kNoStmt;
  const Program* owner = nullptr;
};

struct Frame {
  const FuncDef* func = nullptr;
  std::map<std::string, int> vars;
  std::map<StmtId, int> decl_objs;
  Value ret = Value::integer(0);
};

struct FaultSignal {
  FaultType type;
  SourceLoc loc;
};
struct ExitSignal {
  int code;
};
struct TimeoutSignal {};
struct SwitchSignal {};

constexpr std::size_t kMaxFrames = 4000;

struct Machine {
  std::vector<Obj> mem;
  std::vector<std::string> records;
  std::size_t cursor = 0;
  ExecOptions opt;
  ExecOutcome out;
  std::map<const Expr*, int> literals;
};

enum class Flow { Next, Break, Continue, Return };

class Interp {
 public:
  Interp(const Program& p, Machine& m) : prog_(p), m_(m) {}

  StmtId switch_at = kNoStmt;
  const std::map<StmtId, std::string>* transfers = nullptr;
  const Interp* source = nullptr;

  void init_globals() {
    for (const auto& g : prog_.globals) {
      int o = new_obj(g.type, true);
      globals_[g.name] = o;
      init_decl(g, o, true);
      transfer(g, o);
    }
  }

  int run_main() {
    const FuncDef* main = prog_.find_function("main");
    if (!main) throw Error("program has no main function");
    Value v = invoke(*main, {});
    return v.k == Value::Int ? static_cast<int>(v.i) : 0;
  }

  const Program& program() const { return prog_; }

  /// Object holding `name`, searching active frames innermost first, then globals.
  int find_var(const std::string& name) const {
    for (auto it = frames_.rbegin(); it != frames_.rend(); ++it) {
      auto v = it->vars.find(name);
      if (v != it->vars.end()) return v->second;
    }
    auto g = globals_.find(name);
    return g == globals_.end() ? -1 : g->second;
  }

  const Stmt* current() const { return cur_; }

 private:
  // ---- bookkeeping ----

  void record(const Stmt& s, NodeRole role) {
    if (switch_at != kNoStmt && s.loc.stmt_id == switch_at && role != NodeRole::CallReturn) throw SwitchSignal{};
    cur_ = &s;
    if (++m_.out.steps > m_.opt.step_limit) throw TimeoutSignal{};
    m_.out.trace.push_back(s.loc.stmt_id);
    m_.out.roles.push_back(role);
  }

  SourceLoc here() const {
    SourceLoc l = cur_ ? cur_->loc : SourceLoc{};
    l.file = prog_.file;
    return l;
  }

  [[noreturn]] void fault(FaultType t) { throw FaultSignal{t, here()}; }

  int new_obj(const Type& t, bool global) {
    Obj o;
    o.array = t.is_array();
    o.owner = &prog_;
    Value init = (t.is_pointer() && !t.is_array() && !global) ? Value::bad() : Value::integer(0);
    o.cells.assign(static_cast<std::size_t>(std::max<std::int64_t>(t.cells(), 1)), init);
    m_.mem.push_back(std::move(o));
    return static_cast<int>(m_.mem.size()) - 1;
  }

  int literal(const Expr& e) {
    auto it = m_.literals.find(&e);
    if (it != m_.literals.end()) return it->second;
    Obj o;
    o.array = true;
    o.owner = &prog_;
    for (char c : e.text) o.cells.push_back(Value::integer(static_cast<unsigned char>(c)));
    o.cells.push_back(Value::integer(0));
    m_.mem.push_back(std::move(o));
    int id = static_cast<int>(m_.mem.size()) - 1;
    m_.literals[&e] = id;
    return id;
  }

  int var(const std::string& name) {
    if (!frames_.empty()) {
      auto& vars = frames_.back().vars;
      auto it = vars.find(name);
      if (it != vars.end()) return it->second;
    }
    auto g = globals_.find(name);
    if (g == globals_.end()) throw Error("line " + std::to_string(cur_ ? cur_->loc.line : 0) + ": undefined variable " + name);
    return g->second;
  }

  void touch(const Value& v) {
    if (v.k == Value::Ptr && cur_ && m_.mem[v.obj].heap) m_.mem[v.obj].last_use = cur_->loc.stmt_id;
  }

  // Resolves p[idx] to a live cell or raises the matching fault.
  std::pair<int, std::int64_t> access(const Value& p, std::int64_t idx) {
    if (p.k != Value::Ptr) fault(FaultType::NullDeref);
    Obj& o = m_.mem[p.obj];
    if (!o.live || o.freed) fault(FaultType::NullDeref);
    std::int64_t off = p.i + idx;
    if (off < 0 || off >= static_cast<std::int64_t>(o.cells.size())) fault(FaultType::BufferOverflow);
    return {p.obj, off};
  }

  Value& cell(std::pair<int, std::int64_t> ref) { return m_.mem[ref.first].cells[ref.second]; }

  // ---- declarations and calls ----

  void init_decl(const Stmt& s, int o, bool global) {
    Obj& obj = m_.mem[o];
    Value def = (s.type.is_pointer() && !s.type.is_array() && !global) ? Value::bad() : Value::integer(0);
    std::fill(obj.cells.begin(), obj.cells.end(), def);
    if (!s.init) return;
    if (s.type.is_array()) {
      // parser guarantees a fitting string literal
      const std::string& text = s.init->text;
      for (std::size_t i = 0; i < text.size() && i < obj.cells.size(); ++i) {
        obj.cells[i] = Value::integer(static_cast<unsigned char>(text[i]));
      }
      return;
    }
    Value v = eval(*s.init);
    m_.mem[o].cells[0] = v;
  }

  Value invoke(const FuncDef& f, const std::vector<Value>& args) {
    if (frames_.size() >= kMaxFrames) throw TimeoutSignal{};
    Frame fr;
    fr.func = &f;
    frames_.push_back(std::move(fr));
    for (std::size_t i = 0; i < f.params.size(); ++i) {
      int o = new_obj(f.params[i].type, false);
      m_.mem[o].cells[0] = args.at(i);
      frames_.back().vars[f.params[i].name] = o;
    }
    exec_block(f.body.body);
    Frame done = std::move(frames_.back());
    frames_.pop_back();
    for (const auto& [name, o] : done.vars) m_.mem[o].live = false;
    for (const auto& [id, o] : done.decl_objs) m_.mem[o].live = false;
    return done.ret;
  }

  Value call_user(const Stmt& s, const Expr& call) {
    std::vector<Value> args;
    for (const auto& a : call.args) args.push_back(eval(*a));
    const FuncDef* callee = prog_.find_function(call.text);
    record(s, NodeRole::CallBind);
    Value v = invoke(*callee, args);
    record(s, NodeRole::CallReturn);
    touch(v);
    return v;
  }

  void transfer(const Stmt& s, int o) {
    if (!transfers || !source) return;
    auto it = transfers->find(s.loc.stmt_id);
    if (it == transfers->end()) return;
    int src = source->find_var(it->second);
    if (src < 0) return;
    const Obj& from = m_.mem[src];
    Obj& to = m_.mem[o];
    if (to.array && from.array) {
      for (std::size_t i = 0; i < to.cells.size() && i < from.cells.size(); ++i) to.cells[i] = from.cells[i];
    } else if (!to.array && from.array) {
      to.cells[0] = Value::pointer(src, 0);
    } else {
      to.cells[0] = from.cells[0];
    }
  }

  // ---- statements ----

  Flow exec_block(const std::vector<Stmt>& stmts) {
    for (const auto& s : stmts) {
      Flow f = exec(s);
      if (f != Flow::Next) return f;
    }
    return Flow::Next;
  }

  Flow exec(const Stmt& s) {
    switch (s.kind) {
      case StmtKind::Block: return exec_block(s.body);
      case StmtKind::VarDecl: {
        const Expr* call = user_call(prog_, s);
        Value v;
        if (call) {
          v = call_user(s, *call);
        } else {
          record(s, NodeRole::Plain);
        }
        Frame& fr = frames_.back();
        auto it = fr.decl_objs.find(s.loc.stmt_id);
        int o = it != fr.decl_objs.end() ? it->second : new_obj(s.type, false);
        fr.decl_objs[s.loc.stmt_id] = o;
        fr.vars[s.name] = o;
        if (call) {
          m_.mem[o].cells.assign(m_.mem[o].cells.size(), Value::integer(0));
          m_.mem[o].cells[0] = v;
        } else {
          init_decl(s, o, false);
        }
        transfer(s, o);
        return Flow::Next;
      }
      case StmtKind::Assign: {
        const Expr* call = user_call(prog_, s);
        Value v;
        if (call) {
          v = call_user(s, *call);
        } else {
          record(s, NodeRole::Plain);
        }
        auto ref = lvalue(*s.target);
        if (!call) v = eval(*s.value);
        touch(v);
        cell(ref) = v;
        return Flow::Next;
      }
      case StmtKind::ExprStmt: {
        if (const Expr* call = user_call(prog_, s)) {
          call_user(s, *call);
        } else {
          record(s, NodeRole::Plain);
          eval(*s.value);
        }
        return Flow::Next;
      }
      case StmtKind::If:
        record(s, NodeRole::Plain);
        if (truthy(eval(*s.value))) return exec_block(s.body);
        return s.has_else ? exec_block(s.else_body) : Flow::Next;
      case StmtKind::While: return exec_while(s);
      case StmtKind::Return:
        record(s, NodeRole::Plain);
        if (s.init) {
          frames_.back().ret = eval(*s.init);
          touch(frames_.back().ret);
        }
        return Flow::Return;
      case StmtKind::Break: record(s, NodeRole::Plain); return Flow::Break;
      case StmtKind::Continue: record(s, NodeRole::Plain); return Flow::Continue;
      case StmtKind::Assert:
        record(s, NodeRole::Plain);
        if (!truthy(eval(*s.value))) fault(FaultType::AssertViolation);
        return Flow::Next;
    }
    return Flow::Next;
  }

  // Brent cycle detection over full-store snapshots taken at the loop head.
  Flow exec_while(const Stmt& s) {
    std::string saved;
    bool have_saved = false;
    std::uint64_t power = 1, lam = 0;
    for (;;) {
      record(s, NodeRole::Plain);
      std::string snap = snapshot();
      if (have_saved && snap == saved) fault(FaultType::InfiniteLoop);
      if (!have_saved || lam == power) {
        saved = std::move(snap);
        have_saved = true;
        if (lam == power) power *= 2;
        lam = 0;
      }
      ++lam;
      if (!truthy(eval(*s.value))) return Flow::Next;
      Flow f = exec_block(s.body);
      if (f == Flow::Break) return Flow::Next;
      if (f == Flow::Return) return f;
      if (exec_block(s.latch) == Flow::Return) return Flow::Return;
    }
  }

  std::string snapshot() const {
    std::string out;
    auto put = [&out](std::int64_t v) { out.append(reinterpret_cast<const char*>(&v), sizeof v); };
    put(static_cast<std::int64_t>(m_.cursor));
    for (std::size_t i = 0; i < m_.mem.size(); ++i) {
      const Obj& o = m_.mem[i];
      if (!o.live) continue;
      put(static_cast<std::int64_t>(i));
      put(o.freed);
      put(static_cast<std::int64_t>(o.cells.size()));
      for (const auto& c : o.cells) {
        put(c.k);
        put(c.i);
        put(c.obj);
      }
    }
    return out;
  }

  // ---- expressions ----

  static bool truthy(const Value& v) { return v.k != Value::Int || v.i != 0; }

  std::pair<int, std::int64_t> lvalue(const Expr& e) {
    switch (e.kind) {
      case ExprKind::Ident: return {var(e.text), 0};
      case ExprKind::Index: {
        Value base = eval(*e.args[0]);
        Value idx = eval(*e.args[1]);
        return access(base, idx.k == Value::Int ? idx.i : 0);
      }
      case ExprKind::Unary:
        if (e.text == "*") return access(eval(*e.args[0]), 0);
        break;
      default: break;
    }
    throw Error("line " + std::to_string(e.line) + ": expression is not assignable");
  }

  Value load(std::pair<int, std::int64_t> ref) {
    Value v = cell(ref);
    touch(v);
    return v;
  }

  Value eval(const Expr& e) {
    switch (e.kind) {
      case ExprKind::IntLit:
      case ExprKind::CharLit: return Value::integer(e.value);
      case ExprKind::StrLit: return Value::pointer(literal(e), 0);
      case ExprKind::Ident: {
        int o = var(e.text);
        if (m_.mem[o].array) return Value::pointer(o, 0);
        return load({o, 0});
      }
      case ExprKind::Index: return load(lvalue(e));
      case ExprKind::Unary: {
        if (e.text == "*") return load(lvalue(e));
        if (e.text == "&") {
          auto ref = lvalue(*e.args[0]);
          return Value::pointer(ref.first, ref.second);
        }
        Value v = eval(*e.args[0]);
        if (e.text == "!") return Value::integer(truthy(v) ? 0 : 1);
        if (v.k != Value::Int) return Value::bad();
        return Value::integer(-v.i);
      }
      case ExprKind::Binary: return binary(e);
      case ExprKind::Call: return builtin(e);
    }
    return Value::integer(0);
  }

  Value binary(const Expr& e) {
    const std::string& op = e.text;
    if (op == "&&") return Value::integer(truthy(eval(*e.args[0])) && truthy(eval(*e.args[1])));
    if (op == "||") return Value::integer(truthy(eval(*e.args[0])) || truthy(eval(*e.args[1])));
    Value a = eval(*e.args[0]);
    Value b = eval(*e.args[1]);
    if (op == "==" || op == "!=") {
      bool eq = a.k == b.k && a.i == b.i && a.obj == b.obj;
      return Value::integer(op == "==" ? eq : !eq);
    }
    if (a.k == Value::Int && b.k == Value::Int) {
      std::int64_t x = a.i, y = b.i;
      if (op == "+") return Value::integer(x + y);
      if (op == "-") return Value::integer(x - y);
      if (op == "*") return Value::integer(x * y);
      if (op == "/") return Value::integer(y == 0 ? 0 : x / y);
      if (op == "%") return Value::integer(y == 0 ? 0 : x % y);
      if (op == "<") return Value::integer(x < y);
      if (op == "<=") return Value::integer(x <= y);
      if (op == ">") return Value::integer(x > y);
      if (op == ">=") return Value::integer(x >= y);
    }
    if (a.k == Value::Ptr && b.k == Value::Int && (op == "+" || op == "-")) {
      return Value::pointer(a.obj, op == "+" ? a.i + b.i : a.i - b.i);
    }
    if (a.k == Value::Int && b.k == Value::Ptr && op == "+") return Value::pointer(b.obj, a.i + b.i);
    if (a.k == Value::Ptr && b.k == Value::Ptr) {
      if (op == "-") return a.obj == b.obj ? Value::integer(a.i - b.i) : Value::bad();
      // order by (object, offset)
      auto key = [](const Value& v) { return std::pair(v.obj, v.i); };
      if (op == "<") return Value::integer(key(a) < key(b));
      if (op == "<=") return Value::integer(key(a) <= key(b));
      if (op == ">") return Value::integer(key(a) > key(b));
      if (op == ">=") return Value::integer(key(a) >= key(b));
    }
    return Value::bad();
  }

  std::string read_str(const Value& p) {
    std::string s;
    for (std::int64_t k = 0;; ++k) {
      Value c = cell(access(p, k));
      if (c.k != Value::Int || c.i == 0) return s;
      s += static_cast<char>(c.i);
    }
  }

  void write_str(const Value& p, std::int64_t at, const std::string& s) {
    for (std::size_t k = 0; k <= s.size(); ++k) {
      std::int64_t byte = k < s.size() ? static_cast<unsigned char>(s[k]) : 0;
      cell(access(p, at + static_cast<std::int64_t>(k))) = Value::integer(byte);
    }
  }

  Value builtin(const Expr& e) {
    const std::string& f = e.text;
    std::vector<Value> a;
    for (const auto& x : e.args) a.push_back(eval(*x));
    auto int_arg = [&](std::size_t i) { return a.at(i).k == Value::Int ? a[i].i : 0; };
    if (f == "malloc") {
      Obj o;
      o.heap = true;
      o.array = true;
      o.owner = &prog_;
      o.cells.assign(static_cast<std::size_t>(std::max<std::int64_t>(int_arg(0), 0)), Value::integer(0));
      o.alloc = o.last_use = cur_ ? cur_->loc.stmt_id : kNoStmt;
      m_.mem.push_back(std::move(o));
      return Value::pointer(static_cast<int>(m_.mem.size()) - 1, 0);
    }
    if (f == "free") {
      const Value& p = a.at(0);
      if (p.k == Value::Int && p.i == 0) return Value::integer(0);
      if (p.k != Value::Ptr) fault(FaultType::NullDeref);
      Obj& o = m_.mem[p.obj];
      if (!o.heap || !o.live || p.i != 0) fault(FaultType::NullDeref);
      if (o.freed) fault(FaultType::DoubleFree);
      o.freed = true;
      ++o.free_count;
      return Value::integer(0);
    }
    if (f == "strcpy") {
      write_str(a.at(0), 0, read_str(a.at(1)));
      return a[0];
    }
    if (f == "strcat") {
      std::string head = read_str(a.at(0));
      write_str(a[0], static_cast<std::int64_t>(head.size()), read_str(a.at(1)));
      return a[0];
    }
    if (f == "strlen") return Value::integer(static_cast<std::int64_t>(read_str(a.at(0)).size()));
    if (f == "strcmp") {
      int c = read_str(a.at(0)).compare(read_str(a.at(1)));
      return Value::integer(c < 0 ? -1 : c > 0 ? 1 : 0);
    }
    if (f == "read_line") {
      std::int64_t n = int_arg(1);
      InputEvent ev;
      ev.trace_pos = m_.out.trace.empty() ? 0 : m_.out.trace.size() - 1;
      ev.stmt = cur_ ? cur_->loc.stmt_id : kNoStmt;
      if (m_.cursor >= m_.records.size()) {
        if (n > 0) write_str(a.at(0), 0, "");
        m_.out.inputs.push_back(ev);
        return Value::integer(-1);
      }
      ev.record = static_cast<int>(m_.cursor);
      std::string rec = m_.records[m_.cursor++];
      if (static_cast<std::int64_t>(rec.size()) > std::max<std::int64_t>(n - 1, 0)) {
        rec.resize(static_cast<std::size_t>(std::max<std::int64_t>(n - 1, 0)));
      }
      ev.text = rec;
      m_.out.inputs.push_back(ev);
      if (n > 0) write_str(a.at(0), 0, rec);
      return Value::integer(static_cast<std::int64_t>(rec.size()));
    }
    if (f == "print") {
      const Value& v = a.at(0);
      if (v.k == Value::Bad) fault(FaultType::NullDeref);
      m_.out.output += (v.k == Value::Ptr ? read_str(v) : std::to_string(v.i)) + "\n";
      return Value::integer(0);
    }
    if (f == "assert") {
      if (!truthy(a.at(0))) fault(FaultType::AssertViolation);
      return Value::integer(0);
    }
    if (f == "exit") throw ExitSignal{static_cast<int>(int_arg(0))};
    if (const FuncDef* fn = prog_.find_function(f)) return invoke(*fn, a);   // nested call, no trace nodes
    throw Error("line " + std::to_string(e.line) + ": unknown function " + f);
  }

  const Program& prog_;
  Machine& m_;
  std::map<std::string, int> globals_;
  std::vector<Frame> frames_;
  const Stmt* cur_ = nullptr;
};

void finish_normal(Machine& m, int code, const Program& prog, const Program* other) {
  m.out.verdict = Verdict{VerdictKind::NormalExit, code, FaultType::AssertViolation, {}};
  if (!m.opt.detect_leaks) return;
  for (const auto& o : m.mem) {
    if (!o.heap || o.freed) continue;
    const Stmt* s = prog.find_stmt(o.last_use);
    const Program* where = &prog;
    if (o.owner != &prog && other) {
      s = other->find_stmt(o.last_use);
      where = other;
    }
    Verdict v{VerdictKind::Fault, 0, FaultType::ResourceLeak, s ? s->loc : SourceLoc{}};
    v.loc.file = where->file;
    m.out.verdict = v;
    return;
  }
}

// Runs `interp` to completion, filling m.out.verdict. Returns false when it
// stopped at the switch point.
bool drive(Interp& interp, Machine& m, const Program* other) {
  try {
    int code = interp.run_main();
    finish_normal(m, code, interp.program(), other);
  } catch (const ExitSignal& e) {
    finish_normal(m, e.code, interp.program(), other);
  } catch (const FaultSignal& f) {
    m.out.verdict = Verdict{VerdictKind::Fault, 0, f.type, f.loc};
  } catch (const TimeoutSignal&) {
    m.out.verdict = Verdict{VerdictKind::Timeout, 0, FaultType::AssertViolation, {}};
  } catch (const SwitchSignal&) {
    return false;
  }
  return true;
}

}  // namespace

ExecOutcome run(const Program& program, const std::string& input, const ExecOptions& options) {
  Machine m;
  m.records = split_records(input);
  m.opt = options;
  Interp interp(program, m);
  try {
    interp.init_globals();
  } catch (const FaultSignal& f) {
    m.out.verdict = Verdict{VerdictKind::Fault, 0, f.type, f.loc};
    return m.out;
  }
  drive(interp, m, nullptr);
  return std::move(m.out);
}

SubstitutedOutcome run_substituted(const Program& original, const Program& signature, const SubstitutionPlan& plan,
                                   const std::string& input, const ExecOptions& options) {
  Machine m;
  m.records = split_records(input);
  m.opt = options;
  SubstitutedOutcome result;
  Interp orig(original, m);
  orig.switch_at = plan.entry_original;
  orig.init_globals();
  if (drive(orig, m, nullptr)) {
    result.outcome = m.out;
    result.prefix = m.out;
    return result;
  }
  result.entered_signature = true;
  result.prefix = m.out;
  m.out.trace.clear();
  m.out.roles.clear();
  m.out.inputs.clear();
  Interp sig(signature, m);
  sig.transfers = &plan.transfers;
  sig.source = &orig;
  sig.init_globals();
  drive(sig, m, &original);
  result.outcome = std::move(m.out);
  return result;
}

}  // namespace sigforge

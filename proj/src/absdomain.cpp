#include "sigforge/absdomain.hpp"

#include <algorithm>

namespace sigforge {

namespace {

std::int64_t clamp(__int128 v) {
  if (v <= -Interval::kInf) return -Interval::kInf;
  if (v >= Interval::kInf) return Interval::kInf;
  return static_cast<std::int64_t>(v);
}

bool is_inf(std::int64_t v) { return v <= -Interval::kInf || v >= Interval::kInf; }

AbsValue join(const AbsValue& a, const AbsValue& b) {
  if (a.kind == AbsValue::Int && b.kind == AbsValue::Int) {
    AbsValue r = AbsValue::integer(a.iv.join(b.iv));
    for (auto x : a.excl) {
      if (std::find(b.excl.begin(), b.excl.end(), x) != b.excl.end()) r.excl.push_back(x);
    }
    return r;
  }
  if (a.kind == AbsValue::Ptr && b.kind == AbsValue::Ptr && a.obj == b.obj) return AbsValue::pointer(a.obj, a.iv.join(b.iv));
  return AbsValue::unknown();
}

Truth truth_of_value(const AbsValue& v) {
  switch (v.kind) {
    case AbsValue::Ptr: return Truth::True;
    case AbsValue::Int:
      if (v.iv == Interval::point(0)) return Truth::False;
      return v.may_be_zero() ? Truth::Maybe : Truth::True;
    default: return Truth::Unknown;
  }
}

AbsValue value_of_truth(Truth t) {
  switch (t) {
    case Truth::True: return AbsValue::constant(1);
    case Truth::False: return AbsValue::constant(0);
    case Truth::Maybe: return AbsValue::integer({0, 1});
    default: return AbsValue::unknown();
  }
}

Truth compare_int(const std::string& op, const AbsValue& a, const AbsValue& b) {
  const Interval& x = a.iv;
  const Interval& y = b.iv;
  auto excluded = [](const AbsValue& v, std::int64_t p) {
    return std::find(v.excl.begin(), v.excl.end(), p) != v.excl.end();
  };
  if (op == "==" || op == "!=") {
    Truth eq;
    if (x.singleton() && y.singleton()) {
      eq = x.lo == y.lo ? Truth::True : Truth::False;
    } else if (x.meet(y).empty() || (x.singleton() && excluded(b, x.lo)) || (y.singleton() && excluded(a, y.lo))) {
      eq = Truth::False;
    } else {
      eq = Truth::Maybe;
    }
    return op == "==" ? eq : negate(eq);
  }
  if (op == "<") return x.hi < y.lo ? Truth::True : x.lo >= y.hi ? Truth::False : Truth::Maybe;
  if (op == "<=") return x.hi <= y.lo ? Truth::True : x.lo > y.hi ? Truth::False : Truth::Maybe;
  if (op == ">") return x.lo > y.hi ? Truth::True : x.hi <= y.lo ? Truth::False : Truth::Maybe;
  if (op == ">=") return x.lo >= y.hi ? Truth::True : x.hi < y.lo ? Truth::False : Truth::Maybe;
  return Truth::Unknown;
}

Truth compare(const std::string& op, const AbsValue& a, const AbsValue& b) {
  if (!a.known() || !b.known()) return Truth::Unknown;
  if (a.kind == AbsValue::Int && b.kind == AbsValue::Int) return compare_int(op, a, b);
  if (a.kind == AbsValue::Ptr && b.kind == AbsValue::Ptr) {
    if (a.obj == b.obj) return compare_int(op, AbsValue::integer(a.iv), AbsValue::integer(b.iv));
    if (op == "==") return Truth::False;
    if (op == "!=") return Truth::True;
    return Truth::Unknown;
  }
  // pointer against integer: only NULL is meaningful
  const AbsValue& i = a.kind == AbsValue::Int ? a : b;
  if (i.is_const(0)) {
    if (op == "==") return Truth::False;
    if (op == "!=") return Truth::True;
  }
  return Truth::Unknown;
}

std::string negate_op(const std::string& op) {
  if (op == "==") return "!=";
  if (op == "!=") return "==";
  if (op == "<") return ">=";
  if (op == "<=") return ">";
  if (op == ">") return "<=";
  return "<";   // >=
}

std::string flip_op(const std::string& op) {
  if (op == "<") return ">";
  if (op == "<=") return ">=";
  if (op == ">") return "<";
  if (op == ">=") return "<=";
  return op;
}

bool is_relational(const std::string& op) {
  return op == "==" || op == "!=" || op == "<" || op == "<=" || op == ">" || op == ">=";
}

// Constrains `x` so that `x op rhs` may hold. Returns false when empty.
bool constrain(AbsValue& x, const std::string& op, const AbsValue& rhs) {
  if (x.kind != AbsValue::Int || rhs.kind != AbsValue::Int) return true;
  Interval& v = x.iv;
  const Interval& r = rhs.iv;
  if (op == "==") {
    v = v.meet(r);
  } else if (op == "!=") {
    if (r.singleton()) {
      std::int64_t c = r.lo;
      if (v.lo == c) {
        ++v.lo;
      } else if (v.hi == c) {
        --v.hi;
      } else if (v.contains(c) && std::find(x.excl.begin(), x.excl.end(), c) == x.excl.end()) {
        x.excl.push_back(c);
      }
    }
  } else if (op == "<") {
    if (!is_inf(r.hi)) v.hi = std::min(v.hi, r.hi - 1);
  } else if (op == "<=") {
    v.hi = std::min(v.hi, r.hi);
  } else if (op == ">") {
    if (!is_inf(r.lo)) v.lo = std::max(v.lo, r.lo + 1);
  } else if (op == ">=") {
    v.lo = std::max(v.lo, r.lo);
  }
  // drop exclusions that moved to the boundary or outside
  bool changed = true;
  while (changed && !v.empty()) {
    changed = false;
    for (auto e : x.excl) {
      if (e == v.lo) {
        ++v.lo;
        changed = true;
      } else if (e == v.hi) {
        --v.hi;
        changed = true;
      }
    }
  }
  x.excl.erase(std::remove_if(x.excl.begin(), x.excl.end(), [&](std::int64_t e) { return !v.contains(e); }),
               x.excl.end());
  return !v.empty();
}

const Expr* root_ident(const ExprPtr& e) {
  const Expr* x = e.get();
  while (x) {
    if (x->kind == ExprKind::Ident) return x;
    if (x->kind == ExprKind::Index || x->kind == ExprKind::Unary || x->kind == ExprKind::Binary) {
      x = x->args[0].get();
    } else {
      return nullptr;
    }
  }
  return nullptr;
}

}  // namespace

std::string Interval::str() const {
  auto s = [](std::int64_t v) {
    if (v <= -kInf) return std::string("-inf");
    if (v >= kInf) return std::string("inf");
    return std::to_string(v);
  };
  return "[" + s(lo) + "," + s(hi) + "]";
}

Interval operator+(const Interval& a, const Interval& b) {
  return {is_inf(a.lo) || is_inf(b.lo) ? -Interval::kInf : clamp(static_cast<__int128>(a.lo) + b.lo),
          is_inf(a.hi) || is_inf(b.hi) ? Interval::kInf : clamp(static_cast<__int128>(a.hi) + b.hi)};
}

Interval operator-(const Interval& a, const Interval& b) {
  return a + Interval{b.hi <= -Interval::kInf ? Interval::kInf : -b.hi, b.lo >= Interval::kInf ? -Interval::kInf : -b.lo};
}

Interval operator*(const Interval& a, const Interval& b) {
  __int128 c[] = {static_cast<__int128>(a.lo) * b.lo, static_cast<__int128>(a.lo) * b.hi,
                  static_cast<__int128>(a.hi) * b.lo, static_cast<__int128>(a.hi) * b.hi};
  return {clamp(*std::min_element(c, c + 4)), clamp(*std::max_element(c, c + 4))};
}

bool AbsValue::may_be_zero() const {
  return kind == Int && iv.contains(0) && std::find(excl.begin(), excl.end(), 0) == excl.end();
}

bool AbsValue::same(const AbsValue& o) const {
  return kind == o.kind && iv == o.iv && obj == o.obj && excl == o.excl;
}

Truth negate(Truth t) {
  if (t == Truth::True) return Truth::False;
  if (t == Truth::False) return Truth::True;
  return t;
}

// ---------------------------------------------------------------------------

Transfer::Transfer(const Program& program) : program_(program) {
  for (const auto& g : program.globals) {
    types_[{"", g.name}] = g.type;
    decls_[{"", g.name}] = &g;
  }
  for (const auto& f : program.functions) {
    auto& names = locals_[f.name];
    for (const auto& p : f.params) {
      names.push_back(p.name);
      types_[{f.name, p.name}] = p.type;
    }
    for_each_stmt(f.body.body, [&](const Stmt& s) {
      if (s.kind != StmtKind::VarDecl) return;
      names.push_back(s.name);
      VarKey k{f.name, s.name};
      if (!types_.count(k)) types_[k] = s.type;
      if (!decls_.count(k)) decls_[k] = &s;
    });
  }
}

VarKey Transfer::resolve(const std::string& name, const std::string& func) const {
  auto it = locals_.find(func);
  if (it != locals_.end() && std::find(it->second.begin(), it->second.end(), name) != it->second.end()) {
    return {func, name};
  }
  return {"", name};
}

int Transfer::new_object(AbsState& s, const Type& t) const {
  AbsObj o;
  o.size = Interval::point(t.cells());
  o.array = t.is_array();
  s.objs.push_back(std::move(o));
  return static_cast<int>(s.objs.size()) - 1;
}

void Transfer::init_from_decl(AbsState& s, int obj, const Stmt& decl, bool global) const {
  const Type& t = decl.type;
  std::string func = global ? "" : program_.function_of(decl.loc.stmt_id);
  AbsObj& o = s.objs[obj];
  o.cells.clear();
  if (t.is_array()) {
    o.exact = decl.init && decl.init->kind == ExprKind::StrLit ? decl.init->text : std::string();
    o.rest = AbsValue::constant(0);
    return;
  }
  AbsValue v = t.is_pointer() && !global ? AbsValue::garbage() : AbsValue::constant(0);
  if (decl.init) v = eval(s, decl.init, func);
  s.objs[obj].cells[0] = v;
}

int Transfer::materialize(AbsState& s, const VarKey& key) const {
  auto t = types_.find(key);
  if (t == types_.end()) throw Error("unresolved variable " + key.str());
  int o = new_object(s, t->second);
  s.vars[key] = o;
  if (key.is_global()) {
    auto d = decls_.find(key);
    init_from_decl(s, o, *d->second, true);
  }
  // locals: content unknown (rest and cells stay Unknown)
  return o;
}

int Transfer::lookup(AbsState& s, const std::string& name, const std::string& func) const {
  VarKey key = resolve(name, func);
  auto it = s.vars.find(key);
  if (it != s.vars.end()) return it->second;
  return materialize(s, key);
}

AbsState Transfer::initial_state() const {
  AbsState s;
  for (const auto& g : program_.globals) {
    VarKey key{"", g.name};
    int o = new_object(s, g.type);
    s.vars[key] = o;
    init_from_decl(s, o, g, true);
  }
  return s;
}

void Transfer::touch(AbsState& s, const AbsValue& v) const {
  if (v.kind == AbsValue::Ptr && s.objs[v.obj].heap) s.objs[v.obj].last_use = s.current;
}

void Transfer::bump(AbsState& s, const ExprPtr& base, const std::string& func) const {
  if (const Expr* id = root_ident(base)) ++s.versions[resolve(id->text, func)];
}

AbsValue Transfer::read_cell(const AbsState& s, int obj, const Interval& off) const {
  const AbsObj& o = s.objs[obj];
  if (o.exact) {
    const std::string& str = *o.exact;
    if (off.singleton()) {
      std::int64_t i = off.lo;
      if (i < 0) return AbsValue::unknown();
      if (i < static_cast<std::int64_t>(str.size())) return AbsValue::constant(static_cast<unsigned char>(str[i]));
      return AbsValue::constant(0);
    }
    return AbsValue::integer({0, 255});
  }
  if (off.singleton()) {
    auto it = o.cells.find(off.lo);
    return it != o.cells.end() ? it->second : o.rest;
  }
  AbsValue v = o.rest;
  for (const auto& [k, c] : o.cells) {
    if (off.contains(k)) v = join(v, c);
  }
  return v;
}

namespace {

void explode(AbsObj& o) {
  if (!o.exact) return;
  const std::string& str = *o.exact;
  o.cells.clear();
  for (std::size_t k = 0; k < str.size(); ++k) {
    o.cells[static_cast<std::int64_t>(k)] = AbsValue::constant(static_cast<unsigned char>(str[k]));
  }
  o.cells[static_cast<std::int64_t>(str.size())] = AbsValue::constant(0);
  o.rest = AbsValue::constant(0);
  o.len_known = true;
  o.len = Interval::point(static_cast<std::int64_t>(str.size()));
  o.exact.reset();
}

}  // namespace

void Transfer::write_cell(AbsState& s, int obj, const Interval& off, const AbsValue& v) const {
  AbsObj& o = s.objs[obj];
  if (!off.singleton()) {
    explode(o);
    o.rest = join(o.rest, v);
    for (auto& [k, c] : o.cells) {
      if (off.contains(k)) c = join(c, v);
    }
    o.len_known = false;
    s.approximate = true;
    return;
  }
  std::int64_t i = off.lo;
  if (o.exact) {
    std::string& str = *o.exact;
    auto n = static_cast<std::int64_t>(str.size());
    if (v.kind == AbsValue::Int && v.iv.singleton() && i >= 0 && i <= n) {
      auto c = v.iv.lo;
      if (c == 0) {
        str.resize(static_cast<std::size_t>(i));
      } else if (i == n) {
        str.push_back(static_cast<char>(c));
      } else {
        str[static_cast<std::size_t>(i)] = static_cast<char>(c);
      }
      return;
    }
    if (v.is_const(0) && i > n) return;
    explode(o);
  }
  o.cells[i] = v;
  if (o.len_known) {
    if (v.is_const(0)) {
      o.len = {std::min(o.len.lo, i), std::min(o.len.hi, i)};
    } else if (o.len.hi >= i && i >= o.len.lo) {
      if (v.kind == AbsValue::Int && !v.may_be_zero()) {
        o.len = {i + 1 > o.len.lo ? o.len.lo : o.len.lo, Interval::kInf};
      } else {
        o.len.hi = Interval::kInf;
      }
    }
  }
}

std::optional<Interval> Transfer::strlen_of(const AbsState& s, const AbsValue& p) const {
  if (p.kind != AbsValue::Ptr) return std::nullopt;
  const AbsObj& o = s.objs[p.obj];
  Interval len;
  if (o.exact) {
    len = Interval::point(static_cast<std::int64_t>(o.exact->size()));
  } else if (o.len_known) {
    len = o.len;
  } else {
    return std::nullopt;
  }
  Interval r = len - p.iv;
  r.lo = std::max<std::int64_t>(r.lo, 0);
  r.hi = std::max<std::int64_t>(r.hi, 0);
  return r;
}

void Transfer::write_string(AbsState& s, const AbsValue& dst, const AbsValue& src, bool append) const {
  if (dst.kind != AbsValue::Ptr) {
    s.approximate = true;
    return;
  }
  AbsObj copy_src = src.kind == AbsValue::Ptr ? s.objs[src.obj] : AbsObj{};
  bool src_at_start = src.kind == AbsValue::Ptr && src.iv == Interval::point(0);
  auto src_len = strlen_of(s, src);
  AbsObj& d = s.objs[dst.obj];
  bool dst_at_start = dst.iv == Interval::point(0);
  if (dst_at_start && src_at_start && copy_src.exact && (!append || d.exact)) {
    d.exact = append ? *d.exact + *copy_src.exact : *copy_src.exact;
    d.cells.clear();
    return;
  }
  if (src.kind == AbsValue::Ptr && copy_src.exact && src.iv.singleton() && dst_at_start && (!append || d.exact)) {
    std::string tail = copy_src.exact->substr(std::min<std::size_t>(copy_src.exact->size(), src.iv.lo));
    d.exact = append ? *d.exact + tail : tail;
    d.cells.clear();
    return;
  }
  // imprecise: keep only a length bound
  auto dst_len = append ? strlen_of(s, AbsValue::pointer(dst.obj, Interval::point(0))) : std::optional<Interval>(Interval::point(0));
  AbsObj& dd = s.objs[dst.obj];
  dd.exact.reset();
  dd.cells.clear();
  dd.rest = AbsValue::integer({0, 255});
  if (src_len && dst_len) {
    dd.len_known = true;
    dd.len = *dst_len + *src_len + (append ? Interval::point(0) : dst.iv);
  } else {
    dd.len_known = false;
  }
  if (dst_at_start && src_at_start && !append && !copy_src.exact) {
    dd.cells = copy_src.cells;
    dd.rest = copy_src.rest;
  }
}

AbsValue Transfer::builtin(AbsState& s, const Expr& call, const std::string& func) const {
  const std::string& f = call.text;
  auto arg = [&](std::size_t i) { return eval(s, call.args.at(i), func); };
  if (f == "malloc") {
    AbsValue n = arg(0);
    AbsObj o;
    o.heap = true;
    o.array = true;
    if (n.kind == AbsValue::Int) {
      o.size = {std::max<std::int64_t>(n.iv.lo, 0), std::max<std::int64_t>(n.iv.hi, 0)};
    } else {
      o.size = {0, Interval::kInf};
      o.size_known = false;
    }
    o.exact = std::string();
    o.rest = AbsValue::constant(0);
    o.alloc = o.last_use = s.current;
    s.objs.push_back(std::move(o));
    return AbsValue::pointer(static_cast<int>(s.objs.size()) - 1, Interval::point(0));
  }
  if (f == "free") {
    AbsValue p = arg(0);
    if (p.kind == AbsValue::Ptr) {
      s.objs[p.obj].freed = true;
      ++s.objs[p.obj].free_count;
    } else if (!p.is_const(0)) {
      s.approximate = true;
    }
    return AbsValue::constant(0);
  }
  if (f == "strcpy" || f == "strcat") {
    AbsValue d = arg(0);
    AbsValue src = arg(1);
    write_string(s, d, src, f == "strcat");
    bump(s, call.args[0], func);
    return d;
  }
  if (f == "strlen") {
    AbsValue p = arg(0);
    auto len = strlen_of(s, p);
    if (!len) return AbsValue::unknown();
    AbsValue v = AbsValue::integer(*len);
    if (p.iv == Interval::point(0)) v.len_of = p.obj;
    return v;
  }
  if (f == "strcmp") {
    AbsValue a = arg(0);
    AbsValue b = arg(1);
    if (a.kind != AbsValue::Ptr || b.kind != AbsValue::Ptr) return AbsValue::unknown();
    const AbsObj& x = s.objs[a.obj];
    const AbsObj& y = s.objs[b.obj];
    if (x.exact && y.exact && a.iv.singleton() && b.iv.singleton()) {
      std::string xs = x.exact->substr(std::min<std::size_t>(x.exact->size(), a.iv.lo));
      std::string ys = y.exact->substr(std::min<std::size_t>(y.exact->size(), b.iv.lo));
      int c = xs.compare(ys);
      return AbsValue::constant(c < 0 ? -1 : c > 0 ? 1 : 0);
    }
    if ((x.exact || x.len_known) && (y.exact || y.len_known)) return AbsValue::integer({-1, 1});
    return AbsValue::unknown();
  }
  if (f == "read_line") {
    AbsValue b = arg(0);
    AbsValue n = arg(1);
    std::int64_t cap = n.kind == AbsValue::Int ? n.iv.hi : Interval::kInf;
    if (b.kind == AbsValue::Ptr) {
      AbsObj& o = s.objs[b.obj];
      o.exact.reset();
      o.cells.clear();
      o.rest = AbsValue::integer({0, 255});
      o.len_known = true;
      o.len = {0, std::max<std::int64_t>(cap - 1, 0)};
      if (!b.iv.singleton() || b.iv.lo != 0) o.len = {0, Interval::kInf};
      bump(s, call.args[0], func);
    } else {
      s.approximate = true;
    }
    return AbsValue::integer({-1, std::max<std::int64_t>(cap - 1, -1)});
  }
  if (f == "print" || f == "assert" || f == "exit") {
    for (std::size_t i = 0; i < call.args.size(); ++i) arg(i);
    return AbsValue::constant(0);
  }
  // user function that stays opaque
  for (std::size_t i = 0; i < call.args.size(); ++i) arg(i);
  s.approximate = true;
  return AbsValue::unknown();
}

AbsValue Transfer::eval(AbsState& s, const ExprPtr& ep, const std::string& func) const {
  const Expr& e = *ep;
  switch (e.kind) {
    case ExprKind::IntLit:
    case ExprKind::CharLit: return AbsValue::constant(e.value);
    case ExprKind::StrLit: {
      auto it = s.literals.find(&e);
      if (it != s.literals.end()) return AbsValue::pointer(it->second, Interval::point(0));
      AbsObj o;
      o.array = true;
      o.size = Interval::point(static_cast<std::int64_t>(e.text.size()) + 1);
      o.exact = e.text;
      o.rest = AbsValue::constant(0);
      s.objs.push_back(std::move(o));
      int id = static_cast<int>(s.objs.size()) - 1;
      s.literals[&e] = id;
      return AbsValue::pointer(id, Interval::point(0));
    }
    case ExprKind::Ident: {
      int o = lookup(s, e.text, func);
      if (s.objs[o].array) return AbsValue::pointer(o, Interval::point(0));
      auto it = s.objs[o].cells.find(0);
      AbsValue v = it != s.objs[o].cells.end() ? it->second : s.objs[o].rest;
      touch(s, v);
      return v;
    }
    case ExprKind::Index: {
      AbsValue base = eval(s, e.args[0], func);
      AbsValue idx = eval(s, e.args[1], func);
      if (base.kind != AbsValue::Ptr || idx.kind != AbsValue::Int) return AbsValue::unknown();
      AbsValue v = read_cell(s, base.obj, base.iv + idx.iv);
      touch(s, v);
      return v;
    }
    case ExprKind::Unary: {
      if (e.text == "*") {
        AbsValue p = eval(s, e.args[0], func);
        if (p.kind != AbsValue::Ptr) return AbsValue::unknown();
        AbsValue v = read_cell(s, p.obj, p.iv);
        touch(s, v);
        return v;
      }
      if (e.text == "&") {
        const Expr& a = *e.args[0];
        if (a.kind == ExprKind::Ident) return AbsValue::pointer(lookup(s, a.text, func), Interval::point(0));
        if (a.kind == ExprKind::Index) {
          AbsValue base = eval(s, a.args[0], func);
          AbsValue idx = eval(s, a.args[1], func);
          if (base.kind == AbsValue::Ptr && idx.kind == AbsValue::Int) return AbsValue::pointer(base.obj, base.iv + idx.iv);
        }
        return AbsValue::unknown();
      }
      if (e.text == "!") return value_of_truth(negate(truth(s, e.args[0], func)));
      AbsValue v = eval(s, e.args[0], func);
      if (v.kind != AbsValue::Int) return AbsValue::unknown();
      return AbsValue::integer(Interval::point(0) - v.iv);
    }
    case ExprKind::Binary: {
      const std::string& op = e.text;
      if (op == "&&" || op == "||" || is_relational(op)) return value_of_truth(truth(s, ep, func));
      AbsValue a = eval(s, e.args[0], func);
      AbsValue b = eval(s, e.args[1], func);
      if (a.kind == AbsValue::Int && b.kind == AbsValue::Int) {
        if (op == "+") return AbsValue::integer(a.iv + b.iv);
        if (op == "-") return AbsValue::integer(a.iv - b.iv);
        if (op == "*") return AbsValue::integer(a.iv * b.iv);
        if (b.iv == Interval::point(0)) return AbsValue::constant(0);
        if (a.iv.singleton() && b.iv.singleton()) {
          return AbsValue::constant(op == "/" ? a.iv.lo / b.iv.lo : a.iv.lo % b.iv.lo);
        }
        if (b.iv.singleton() && b.iv.lo > 0 && a.iv.bounded()) {
          std::int64_t d = b.iv.lo;
          if (op == "/") return AbsValue::integer({a.iv.lo / d, a.iv.hi / d});
          return AbsValue::integer(a.iv.lo >= 0 ? Interval{0, d - 1} : Interval{-(d - 1), d - 1});
        }
        return AbsValue::integer(Interval::top());
      }
      if (a.kind == AbsValue::Ptr && b.kind == AbsValue::Int && (op == "+" || op == "-")) {
        return AbsValue::pointer(a.obj, op == "+" ? a.iv + b.iv : a.iv - b.iv);
      }
      if (a.kind == AbsValue::Int && b.kind == AbsValue::Ptr && op == "+") return AbsValue::pointer(b.obj, a.iv + b.iv);
      if (a.kind == AbsValue::Ptr && b.kind == AbsValue::Ptr && op == "-" && a.obj == b.obj) {
        return AbsValue::integer(a.iv - b.iv);
      }
      return AbsValue::unknown();
    }
    case ExprKind::Call: return builtin(s, e, func);
  }
  return AbsValue::unknown();
}

Truth Transfer::truth(AbsState& s, const ExprPtr& ep, const std::string& func) const {
  const Expr& e = *ep;
  if (e.kind == ExprKind::Unary && e.text == "!") return negate(truth(s, e.args[0], func));
  if (e.kind == ExprKind::Binary) {
    const std::string& op = e.text;
    if (op == "&&" || op == "||") {
      Truth a = truth(s, e.args[0], func);
      Truth stop = op == "&&" ? Truth::False : Truth::True;
      Truth go = negate(stop);
      if (a == stop) return stop;
      // the right side may be skipped at run time, so it does not count as a use
      std::vector<StmtId> uses;
      if (a != go) {
        for (const auto& o : s.objs) uses.push_back(o.last_use);
      }
      Truth b = truth(s, e.args[1], func);
      for (std::size_t i = 0; i < uses.size(); ++i) s.objs[i].last_use = uses[i];
      if (b == stop) return stop;
      if (a == go && b == go) return go;
      if (a == Truth::Unknown || b == Truth::Unknown) return Truth::Unknown;
      return Truth::Maybe;
    }
    if (is_relational(op)) return compare(op, eval(s, e.args[0], func), eval(s, e.args[1], func));
  }
  return truth_of_value(eval(s, ep, func));
}

bool Transfer::refine_compare(AbsState& s, const Expr& lhs, const std::string& op, const AbsValue& rhs,
                              bool polarity, const std::string& func) const {
  if (rhs.kind != AbsValue::Int) return true;
  std::string eff = polarity ? op : negate_op(op);
  auto fail = [&s]() {
    s.feasible = false;
    return false;
  };
  auto refine_len = [&](int obj, const AbsValue& constraint_holder) {
    AbsObj& o = s.objs[obj];
    if (o.exact || !o.len_known) return true;
    AbsValue l = AbsValue::integer(o.len);
    l.excl = constraint_holder.excl;
    if (!constrain(l, eff, rhs)) return false;
    o.len = l.iv;
    return true;
  };
  if (lhs.kind == ExprKind::Ident) {
    int o = lookup(s, lhs.text, func);
    if (s.objs[o].array) return true;
    auto it = s.objs[o].cells.find(0);
    if (it == s.objs[o].cells.end() || it->second.kind != AbsValue::Int) return true;
    AbsValue& v = it->second;
    if (!constrain(v, eff, rhs)) return fail();
    if (v.len_of >= 0 && !refine_len(v.len_of, AbsValue::integer(v.iv))) return fail();
    if (v.len_of >= 0 && s.objs[v.len_of].len_known && !s.objs[v.len_of].exact) {
      v.iv = v.iv.meet(s.objs[v.len_of].len);
    }
    return true;
  }
  if (lhs.kind == ExprKind::Call && lhs.text == "strlen") {
    AbsValue p = eval(s, lhs.args[0], func);
    if (p.kind != AbsValue::Ptr || !(p.iv == Interval::point(0))) return true;
    if (!refine_len(p.obj, AbsValue::integer(Interval::top()))) return fail();
    return true;
  }
  if (lhs.kind == ExprKind::Index || (lhs.kind == ExprKind::Unary && lhs.text == "*")) {
    AbsValue base = eval(s, lhs.args[0], func);
    Interval off = Interval::point(0);
    if (lhs.kind == ExprKind::Index) {
      AbsValue idx = eval(s, lhs.args[1], func);
      if (idx.kind != AbsValue::Int) return true;
      off = idx.iv;
    }
    if (base.kind != AbsValue::Ptr) return true;
    off = base.iv + off;
    AbsObj& o = s.objs[base.obj];
    if (!off.singleton() || o.exact) return true;
    AbsValue v = read_cell(s, base.obj, off);
    if (v.kind != AbsValue::Int) return true;
    if (!constrain(v, eff, rhs)) return fail();
    o.cells[off.lo] = v;
    if (o.len_known) {
      if (!v.may_be_zero()) o.len.lo = std::max(o.len.lo, off.lo + 1);
      if (v.is_const(0)) o.len.hi = std::min(o.len.hi, off.lo);
      if (o.len.empty()) return fail();
    }
    return true;
  }
  return true;
}

bool Transfer::refine(AbsState& s, const ExprPtr& ep, bool polarity, const std::string& func) const {
  Truth t = truth(s, ep, func);
  if ((t == Truth::True && !polarity) || (t == Truth::False && polarity)) {
    s.feasible = false;
    return false;
  }
  const Expr& e = *ep;
  if (e.kind == ExprKind::Unary && e.text == "!") return refine(s, e.args[0], !polarity, func);
  if (e.kind == ExprKind::Binary && (e.text == "&&" || e.text == "||")) {
    bool conj = e.text == "&&";
    if (conj == polarity) {
      return refine(s, e.args[0], polarity, func) && refine(s, e.args[1], polarity, func);
    }
    // one side decides: constrain it only when the other is already settled
    Truth a = truth(s, e.args[0], func);
    Truth settled = conj ? Truth::True : Truth::False;
    if (a == settled) return refine(s, e.args[1], polarity, func);
    std::vector<StmtId> uses;
    for (const auto& o : s.objs) uses.push_back(o.last_use);
    Truth b = truth(s, e.args[1], func);
    for (std::size_t i = 0; i < uses.size(); ++i) s.objs[i].last_use = uses[i];
    if (b == settled) return refine(s, e.args[0], polarity, func);
    return s.feasible;
  }
  if (e.kind == ExprKind::Binary && is_relational(e.text)) {
    const Expr& l = *e.args[0];
    const Expr& r = *e.args[1];
    // strcmp(a, b) == 0 fixes a's content
    for (int side = 0; side < 2; ++side) {
      const Expr& call = side == 0 ? l : r;
      const Expr& other = side == 0 ? r : l;
      bool equal = (e.text == "==" && polarity) || (e.text == "!=" && !polarity);
      if (equal && call.kind == ExprKind::Call && call.text == "strcmp" && other.kind == ExprKind::IntLit &&
          other.value == 0) {
        AbsValue a = eval(s, call.args[0], func);
        AbsValue b = eval(s, call.args[1], func);
        if (a.kind == AbsValue::Ptr && b.kind == AbsValue::Ptr && a.iv == Interval::point(0) && s.objs[b.obj].exact &&
            b.iv == Interval::point(0)) {
          std::string text = *s.objs[b.obj].exact;
          AbsObj& o = s.objs[a.obj];
          o.exact = text;
          o.cells.clear();
          o.rest = AbsValue::constant(0);
        }
      }
    }
    AbsValue rv = eval(s, e.args[1], func);
    if (!refine_compare(s, l, e.text, rv, polarity, func)) return false;
    AbsValue lv = eval(s, e.args[0], func);
    if (!refine_compare(s, r, flip_op(e.text), lv, polarity, func)) return false;
    return s.feasible;
  }
  if (e.kind == ExprKind::Call && e.text == "strcmp" && !polarity) {
    // !strcmp(a, b): same as strcmp(a, b) == 0
    return refine(s, Expr::binary("==", ep, Expr::int_lit(0)), true, func);
  }
  if (!refine_compare(s, e, "!=", AbsValue::constant(0), polarity, func)) return false;
  return s.feasible;
}

// ---------------------------------------------------------------------------

void Transfer::assign(AbsState& s, const ExprPtr& target, const AbsValue& v, const std::string& func) const {
  const Expr& t = *target;
  touch(s, v);
  if (t.kind == ExprKind::Ident) {
    int o = lookup(s, t.text, func);
    s.objs[o].cells[0] = v;
    ++s.versions[resolve(t.text, func)];
    return;
  }
  AbsValue base = eval(s, t.args[0], func);
  Interval off = Interval::point(0);
  if (t.kind == ExprKind::Index) {
    AbsValue idx = eval(s, t.args[1], func);
    if (idx.kind != AbsValue::Int) {
      s.approximate = true;
      return;
    }
    off = idx.iv;
  }
  if (base.kind != AbsValue::Ptr) {
    s.approximate = true;
    return;
  }
  write_cell(s, base.obj, base.iv + off, v);
  bump(s, t.args[0], func);
}

void Transfer::exec(AbsState& s, const Stmt& stmt, NodeRole role) const {
  s.current = stmt.loc.stmt_id;
  std::string func = program_.function_of(stmt.loc.stmt_id);
  if (role == NodeRole::CallBind) {
    const Expr* call = user_call(program_, stmt);
    const FuncDef* callee = call ? program_.find_function(call->text) : nullptr;
    if (!callee) return;
    std::vector<AbsValue> args;
    for (const auto& a : call->args) args.push_back(eval(s, a, func));
    for (std::size_t i = 0; i < callee->params.size(); ++i) {
      VarKey key{callee->name, callee->params[i].name};
      int o = new_object(s, callee->params[i].type);
      s.objs[o].cells[0] = args.at(i);
      s.vars[key] = o;
      ++s.versions[key];
    }
    s.vars.erase({callee->name, "$ret"});
    return;
  }
  if (role == NodeRole::CallReturn) {
    const Expr* call = user_call(program_, stmt);
    AbsValue ret = AbsValue::unknown();
    if (call) {
      auto it = s.vars.find({call->text, "$ret"});
      if (it != s.vars.end()) ret = s.objs[it->second].cells[0];
    }
    if (stmt.kind == StmtKind::VarDecl) {
      VarKey key = resolve(stmt.name, func);
      int o = new_object(s, stmt.type);
      s.vars[key] = o;
      ++s.versions[key];
      s.objs[o].cells[0] = ret;
      touch(s, ret);
    } else if (stmt.kind == StmtKind::Assign) {
      assign(s, stmt.target, ret, func);
    }
    return;
  }
  switch (stmt.kind) {
    case StmtKind::VarDecl: {
      VarKey key = resolve(stmt.name, func);
      int o = new_object(s, stmt.type);
      init_from_decl(s, o, stmt, false);
      s.vars[key] = o;
      ++s.versions[key];
      return;
    }
    case StmtKind::Assign: {
      AbsValue v = eval(s, stmt.value, func);
      assign(s, stmt.target, v, func);
      return;
    }
    case StmtKind::ExprStmt:
      if (stmt.value->kind == ExprKind::Call && program_.find_function(stmt.value->text)) {
        // opaque user call
        for (const auto& a : stmt.value->args) eval(s, a, func);
        s.approximate = true;
        return;
      }
      eval(s, stmt.value, func);
      return;
    case StmtKind::Return:
      if (stmt.init) {
        AbsValue v = eval(s, stmt.init, func);
        touch(s, v);
        VarKey key{func, "$ret"};
        AbsObj o;
        o.cells[0] = v;
        s.objs.push_back(std::move(o));
        s.vars[key] = static_cast<int>(s.objs.size()) - 1;
      }
      return;
    case StmtKind::Assert:
      refine(s, stmt.value, true, func);
      return;
    default: return;
  }
}

Truth Transfer::condition(AbsState& s, const Stmt& branch) const {
  s.current = branch.loc.stmt_id;
  return truth(s, branch.value, program_.function_of(branch.loc.stmt_id));
}

bool Transfer::assume(AbsState& s, const Stmt& branch, bool taken) const {
  s.current = branch.loc.stmt_id;
  return refine(s, branch.value, taken, program_.function_of(branch.loc.stmt_id));
}

bool Transfer::derivable(AbsState& s, const FaultSpec& fault, const Stmt& stmt) const {
  s.current = stmt.loc.stmt_id;
  std::string func = program_.function_of(stmt.loc.stmt_id);
  const FaultCondition& c = fault.condition;
  switch (fault.fault_type) {
    case FaultType::BufferOverflow: {
      AbsValue buf = eval(s, c.buf, func);
      if (buf.kind != AbsValue::Ptr) return false;
      const AbsObj& o = s.objs[buf.obj];
      if (!o.size_known) return false;
      // room left in the buffer (cells), lowest possible
      std::int64_t room = o.size.lo - buf.iv.hi;
      std::int64_t below = buf.iv.lo;
      if (c.index) {
        AbsValue i = eval(s, c.index, func);
        if (i.kind != AbsValue::Int) return false;
        return i.iv.hi >= room || i.iv.lo + below < 0;
      }
      AbsValue str = eval(s, c.str, func);
      if (str.kind == AbsValue::Int) {   // read_line(buf, n): writes up to n bytes
        return str.iv.hi > room;
      }
      auto len = strlen_of(s, str);
      if (!len) return false;
      Interval need = *len + Interval::point(1);
      if (c.append) {
        auto head = strlen_of(s, buf);
        if (!head) return false;
        need = need + *head;
      }
      return need.hi > room;
    }
    case FaultType::NullDeref: {
      AbsValue p = eval(s, c.ptr, func);
      return p.kind == AbsValue::Garbage || p.may_be_zero();
    }
    case FaultType::DoubleFree: {
      AbsValue p = eval(s, c.ptr, func);
      return p.kind == AbsValue::Ptr && s.objs[p.obj].heap && s.objs[p.obj].freed;
    }
    case FaultType::AssertViolation: {
      Truth t = truth(s, c.assert_expr, func);
      return t == Truth::False || t == Truth::Maybe;
    }
    case FaultType::ResourceLeak: return leak_candidate(s, fault, stmt) >= 0;
    case FaultType::InfiniteLoop: return false;
  }
  return false;
}

int Transfer::leak_candidate(AbsState& s, const FaultSpec& fault, const Stmt& stmt) const {
  s.current = stmt.loc.stmt_id;
  AbsValue r = eval(s, fault.condition.r, program_.function_of(stmt.loc.stmt_id));
  if (r.kind != AbsValue::Ptr) return -1;
  const AbsObj& o = s.objs[r.obj];
  return o.heap && !o.freed ? r.obj : -1;
}

LoopRecord Transfer::loop_record(AbsState& s, const Stmt& header, const std::vector<std::string>& ind) const {
  LoopRecord rec;
  std::string func = program_.function_of(header.loc.stmt_id);
  for (const auto& name : ind) {
    VarKey key = resolve(name, func);
    rec.versions[key] = s.versions.count(key) ? s.versions.at(key) : 0;
    int o = lookup(s, name, func);
    auto it = s.objs[o].cells.find(0);
    rec.values[key] = s.objs[o].array ? AbsValue::pointer(o, Interval::point(0))
                                      : (it != s.objs[o].cells.end() ? it->second : s.objs[o].rest);
  }
  return rec;
}

bool reachable(const AbsState& s, int obj) {
  std::vector<bool> seen(s.objs.size(), false);
  std::vector<int> work;
  for (const auto& [k, o] : s.vars) {
    if (!seen[o]) {
      seen[o] = true;
      work.push_back(o);
    }
  }
  auto visit = [&](const AbsValue& v) {
    if (v.kind == AbsValue::Ptr && v.obj >= 0 && !seen[v.obj]) {
      seen[v.obj] = true;
      work.push_back(v.obj);
    }
  };
  while (!work.empty()) {
    int o = work.back();
    work.pop_back();
    if (o == obj) return true;
    for (const auto& [off, v] : s.objs[o].cells) visit(v);
    visit(s.objs[o].rest);
  }
  return false;
}

bool Transfer::unchanged(const LoopRecord& before, const LoopRecord& after) {
  for (const auto& [key, ver] : after.versions) {
    auto b = before.versions.find(key);
    if (b != before.versions.end() && b->second == ver) continue;
    auto bv = before.values.find(key);
    const AbsValue& av = after.values.at(key);
    if (bv != before.values.end() && bv->second.kind == AbsValue::Int && av.kind == AbsValue::Int &&
        bv->second.iv.singleton() && bv->second.iv == av.iv) {
      continue;
    }
    return false;
  }
  return true;
}

}  // namespace sigforge

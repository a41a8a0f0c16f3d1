#include "minisched/expr.h"

#include <algorithm>
#include <cassert>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace minisched {

int64_t hdiv(int64_t x, int64_t y) {
  if (y == 0) return 0;
  int64_t q = x / y;
  int64_t r = x % y;
  return r < 0 ? q + (y > 0 ? -1 : 1) : q;
}

int64_t hmod(int64_t x, int64_t y) {
  if (y == 0) return 0;
  int64_t r = x % y;
  return r < 0 ? r + (y > 0 ? y : -y) : r;
}

namespace {

int64_t gcd64(int64_t a, int64_t b) {
  a = a < 0 ? -a : a;
  b = b < 0 ? -b : b;
  while (b != 0) {
    int64_t t = a % b;
    a = b;
    b = t;
  }
  return a;
}

}  // namespace

rational::rational(int64_t n, int64_t d) : num(n), den(d) {
  if (den == 0) throw std::invalid_argument("rational with zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  int64_t g = gcd64(num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
}

rational rational::operator+(const rational& o) const {
  int64_t g = gcd64(den, o.den);
  int64_t l = den / g * o.den;
  return rational(num * (l / den) + o.num * (l / o.den), l);
}

rational rational::operator-(const rational& o) const { return *this + rational(-o.num, o.den); }

rational rational::operator/(int64_t d) const { return rational(num, den * d); }
rational rational::operator*(int64_t k) const { return rational(num * k, den); }

bool rational::operator<(const rational& o) const {
  return static_cast<__int128>(num) * o.den < static_cast<__int128>(o.num) * den;
}

std::string rational::str() const { return std::to_string(num) + "\\" + std::to_string(den); }

const char* binop_token(binop op) {
  switch (op) {
  case binop::add: return "+";
  case binop::sub: return "-";
  case binop::mul: return "*";
  case binop::div: return "/";
  case binop::mod: return "%";
  case binop::min: return "min";
  case binop::max: return "max";
  case binop::lt: return "<";
  case binop::le: return "<=";
  case binop::gt: return ">";
  case binop::ge: return ">=";
  case binop::eq: return "==";
  case binop::ne: return "!=";
  case binop::and_: return "&&";
  case binop::or_: return "||";
  case binop::implies: return "==>";
  }
  return "?";
}

bool is_comparison(binop op) {
  switch (op) {
  case binop::lt:
  case binop::le:
  case binop::gt:
  case binop::ge:
  case binop::eq:
  case binop::ne: return true;
  default: return false;
  }
}

bool is_logical(binop op) { return op == binop::and_ || op == binop::or_ || op == binop::implies; }

namespace {

std::shared_ptr<expr_node> node(expr_kind k) {
  auto n = std::make_shared<expr_node>();
  n->kind = k;
  return n;
}

}  // namespace

expr::expr(int64_t v) : expr(make_const(v)) {}

expr make_const(int64_t v) {
  auto n = node(expr_kind::constant);
  n->value = v;
  return expr(n);
}

expr make_var(const std::string& name) {
  auto n = node(expr_kind::var);
  n->name = name;
  return expr(n);
}

static expr make_call_kind(expr_kind k, const std::string& name, std::vector<expr> args) {
  auto n = node(k);
  n->name = name;
  n->args = std::move(args);
  return expr(n);
}

expr func_call(const std::string& name, std::vector<expr> args) {
  return make_call_kind(expr_kind::func_call, name, std::move(args));
}
expr buf_call(const std::string& name, std::vector<expr> args) {
  return make_call_kind(expr_kind::buf_call, name, std::move(args));
}
expr make_call(const std::string& name, std::vector<expr> args) {
  return make_call_kind(expr_kind::call, name, std::move(args));
}

expr make_load(const std::string& name, expr index) {
  auto n = node(expr_kind::load);
  n->name = name;
  n->args = {std::move(index)};
  return expr(n);
}

expr make_result() { return expr(node(expr_kind::result)); }

expr make_unary(unop op, expr a) {
  auto n = node(expr_kind::unary);
  n->uop = op;
  n->args = {std::move(a)};
  return expr(n);
}

expr make_binary(binop op, expr a, expr b) {
  auto n = node(expr_kind::binary);
  n->bop = op;
  n->args = {std::move(a), std::move(b)};
  return expr(n);
}

expr make_select(expr c, expr t, expr f) {
  auto n = node(expr_kind::select);
  n->args = {std::move(c), std::move(t), std::move(f)};
  return expr(n);
}

expr bound_ref(const std::string& entity, const std::string& dim, bool is_max) {
  auto n = node(expr_kind::bound_ref);
  n->name = entity;
  n->dim = dim;
  n->is_max = is_max;
  return expr(n);
}

expr make_forall(std::vector<quant_var> vars, expr body, bool star) {
  auto n = node(expr_kind::forall);
  n->qvars = std::move(vars);
  n->args = {std::move(body)};
  n->star = star;
  return expr(n);
}

expr make_perm(expr location, int64_t num, std::vector<int64_t> dens) {
  auto n = node(expr_kind::perm);
  n->args = {std::move(location)};
  n->value = num;
  n->dens = std::move(dens);
  return expr(n);
}

rational perm_fraction(const expr& p) {
  int64_t d = 1;
  for (int64_t f : p->dens) d *= f;
  return rational(p->value, d);
}

expr operator+(expr a, expr b) { return make_binary(binop::add, std::move(a), std::move(b)); }
expr operator-(expr a, expr b) { return make_binary(binop::sub, std::move(a), std::move(b)); }
expr operator*(expr a, expr b) { return make_binary(binop::mul, std::move(a), std::move(b)); }
expr operator<(expr a, expr b) { return make_binary(binop::lt, std::move(a), std::move(b)); }
expr operator<=(expr a, expr b) { return make_binary(binop::le, std::move(a), std::move(b)); }
expr operator>(expr a, expr b) { return make_binary(binop::gt, std::move(a), std::move(b)); }
expr operator>=(expr a, expr b) { return make_binary(binop::ge, std::move(a), std::move(b)); }
expr operator&&(expr a, expr b) { return make_binary(binop::and_, std::move(a), std::move(b)); }
expr operator||(expr a, expr b) { return make_binary(binop::or_, std::move(a), std::move(b)); }
expr operator!(expr a) { return make_unary(unop::not_, std::move(a)); }
expr eq(expr a, expr b) { return make_binary(binop::eq, std::move(a), std::move(b)); }
expr ne(expr a, expr b) { return make_binary(binop::ne, std::move(a), std::move(b)); }
expr implies(expr a, expr b) { return make_binary(binop::implies, std::move(a), std::move(b)); }
expr ediv(expr a, expr b) { return make_binary(binop::div, std::move(a), std::move(b)); }
expr emod(expr a, expr b) { return make_binary(binop::mod, std::move(a), std::move(b)); }
expr emin(expr a, expr b) { return make_binary(binop::min, std::move(a), std::move(b)); }
expr emax(expr a, expr b) { return make_binary(binop::max, std::move(a), std::move(b)); }

bool equal(const expr& a, const expr& b) {
  if (a.same_as(b)) return true;
  if (!a.defined() || !b.defined()) return false;
  const expr_node& x = *a;
  const expr_node& y = *b;
  if (x.kind != y.kind) return false;
  switch (x.kind) {
  case expr_kind::constant:
    if (x.value != y.value) return false;
    break;
  case expr_kind::var:
  case expr_kind::func_call:
  case expr_kind::buf_call:
  case expr_kind::call:
  case expr_kind::load:
    if (x.name != y.name) return false;
    break;
  case expr_kind::result: return true;
  case expr_kind::unary:
    if (x.uop != y.uop) return false;
    break;
  case expr_kind::binary:
    if (x.bop != y.bop) return false;
    break;
  case expr_kind::select: break;
  case expr_kind::bound_ref:
    return x.name == y.name && x.dim == y.dim && x.is_max == y.is_max;
  case expr_kind::forall:
    if (x.star != y.star || x.qvars.size() != y.qvars.size()) return false;
    for (size_t i = 0; i < x.qvars.size(); ++i) {
      if (x.qvars[i].name != y.qvars[i].name) return false;
      if (!equal(x.qvars[i].lo, y.qvars[i].lo) || !equal(x.qvars[i].hi, y.qvars[i].hi)) return false;
    }
    break;
  case expr_kind::perm:
    if (x.value != y.value || x.dens != y.dens) return false;
    break;
  }
  if (x.args.size() != y.args.size()) return false;
  for (size_t i = 0; i < x.args.size(); ++i) {
    if (!equal(x.args[i], y.args[i])) return false;
  }
  return true;
}

bool is_const(const expr& e, int64_t* v) {
  if (!e.defined() || e->kind != expr_kind::constant) return false;
  if (v) *v = e->value;
  return true;
}

std::optional<int64_t> as_const(const expr& e) {
  int64_t v;
  if (is_const(e, &v)) return v;
  return std::nullopt;
}

bool is_var(const expr& e, const std::string& name) {
  return e.defined() && e->kind == expr_kind::var && e->name == name;
}

expr conjunction(const std::vector<expr>& terms) {
  expr r;
  for (const expr& t : terms) r = r.defined() ? (r && t) : t;
  if (!r.defined()) return eq(make_const(0), make_const(0));
  return r;
}

std::vector<expr> conjuncts(const expr& e) {
  std::vector<expr> out;
  std::function<void(const expr&)> rec = [&](const expr& x) {
    if (x->kind == expr_kind::binary && x->bop == binop::and_) {
      rec(x->args[0]);
      rec(x->args[1]);
    } else {
      out.push_back(x);
    }
  };
  rec(e);
  return out;
}

expr mutate(const expr& e, const std::function<expr(const expr&)>& pre) {
  if (!e.defined()) return e;
  expr r = pre(e);
  if (r.defined()) return r;
  bool changed = false;
  std::vector<expr> args;
  args.reserve(e->args.size());
  for (const expr& a : e->args) {
    args.push_back(mutate(a, pre));
    changed = changed || !args.back().same_as(a);
  }
  std::vector<quant_var> qv = e->qvars;
  for (quant_var& q : qv) {
    expr lo = mutate(q.lo, pre);
    expr hi = mutate(q.hi, pre);
    changed = changed || !lo.same_as(q.lo) || !hi.same_as(q.hi);
    q.lo = lo;
    q.hi = hi;
  }
  if (!changed) return e;
  auto n = std::make_shared<expr_node>(*e);
  n->args = std::move(args);
  n->qvars = std::move(qv);
  return expr(n);
}

void visit(const expr& e, const std::function<bool(const expr&)>& f) {
  if (!e.defined()) return;
  if (!f(e)) return;
  for (const quant_var& q : e->qvars) {
    visit(q.lo, f);
    visit(q.hi, f);
  }
  for (const expr& a : e->args) visit(a, f);
}

expr substitute(const expr& e, const std::map<std::string, expr>& repl) {
  if (repl.empty()) return e;
  return mutate(e, [&](const expr& x) -> expr {
    if (x->kind == expr_kind::var) {
      auto it = repl.find(x->name);
      return it == repl.end() ? x : it->second;
    }
    if (x->kind == expr_kind::forall) {
      // Quantifier bounds are outside the binder; the body is inside it.
      std::map<std::string, expr> inner = repl;
      auto n = std::make_shared<expr_node>(*x);
      for (quant_var& q : n->qvars) {
        q.lo = substitute(q.lo, inner);
        q.hi = substitute(q.hi, inner);
        inner.erase(q.name);
      }
      n->args[0] = substitute(x->args[0], inner);
      return expr(n);
    }
    return expr();
  });
}

expr substitute(const expr& e, const std::string& var, const expr& replacement) {
  return substitute(e, std::map<std::string, expr>{{var, replacement}});
}

namespace {

void collect_free(const expr& e, std::set<std::string>& bound, std::vector<std::string>& out) {
  if (!e.defined()) return;
  if (e->kind == expr_kind::var) {
    if (!bound.count(e->name) && std::find(out.begin(), out.end(), e->name) == out.end()) {
      out.push_back(e->name);
    }
    return;
  }
  if (e->kind == expr_kind::forall) {
    std::vector<std::string> added;
    for (const quant_var& q : e->qvars) {
      collect_free(q.lo, bound, out);
      collect_free(q.hi, bound, out);
      if (bound.insert(q.name).second) added.push_back(q.name);
    }
    collect_free(e->args[0], bound, out);
    for (const std::string& a : added) bound.erase(a);
    return;
  }
  for (const expr& a : e->args) collect_free(a, bound, out);
}

}  // namespace

std::vector<std::string> free_vars(const expr& e) {
  std::set<std::string> bound;
  std::vector<std::string> out;
  collect_free(e, bound, out);
  return out;
}

bool mentions_var(const expr& e, const std::string& var) {
  auto fv = free_vars(e);
  return std::find(fv.begin(), fv.end(), var) != fv.end();
}

bool mentions_call(const expr& e, const std::string& name) {
  bool found = false;
  visit(e, [&](const expr& x) {
    if ((x->kind == expr_kind::func_call || x->kind == expr_kind::buf_call ||
         x->kind == expr_kind::call || x->kind == expr_kind::load) &&
        x->name == name) {
      found = true;
    }
    return !found;
  });
  return found;
}

namespace {

expr simplify_binary(binop op, const expr& a, const expr& b) {
  int64_t ca, cb;
  bool ka = is_const(a, &ca), kb = is_const(b, &cb);
  if (ka && kb) {
    switch (op) {
    case binop::add: return make_const(ca + cb);
    case binop::sub: return make_const(ca - cb);
    case binop::mul: return make_const(ca * cb);
    case binop::div: return make_const(hdiv(ca, cb));
    case binop::mod: return make_const(hmod(ca, cb));
    case binop::min: return make_const(std::min(ca, cb));
    case binop::max: return make_const(std::max(ca, cb));
    default: break;
    }
  }
  switch (op) {
  case binop::add:
    if (ka && ca == 0) return b;
    if (kb && cb == 0) return a;
    if (kb && cb < 0) return simplify_binary(binop::sub, a, make_const(-cb));
    if (kb && a->kind == expr_kind::binary) {
      int64_t c1;
      if (a->bop == binop::add && is_const(a->args[1], &c1)) {
        return simplify_binary(binop::add, a->args[0], make_const(c1 + cb));
      }
      if (a->bop == binop::sub && is_const(a->args[1], &c1)) {
        return simplify_binary(binop::add, a->args[0], make_const(cb - c1));
      }
    }
    break;
  case binop::sub:
    if (kb && cb == 0) return a;
    if (kb && cb < 0) return simplify_binary(binop::add, a, make_const(-cb));
    if (equal(a, b)) return make_const(0);
    if (kb && a->kind == expr_kind::binary) {
      int64_t c1;
      if (a->bop == binop::add && is_const(a->args[1], &c1)) {
        return simplify_binary(binop::add, a->args[0], make_const(c1 - cb));
      }
      if (a->bop == binop::sub && is_const(a->args[1], &c1)) {
        return simplify_binary(binop::sub, a->args[0], make_const(c1 + cb));
      }
    }
    break;
  case binop::mul:
    if ((ka && ca == 0) || (kb && cb == 0)) return make_const(0);
    if (ka && ca == 1) return b;
    if (kb && cb == 1) return a;
    if (kb && a->kind == expr_kind::binary && a->bop == binop::mul) {
      int64_t c1;
      if (is_const(a->args[1], &c1)) return simplify_binary(binop::mul, a->args[0], make_const(c1 * cb));
    }
    break;
  case binop::div:
    if (kb && cb == 1) return a;
    break;
  case binop::min:
  case binop::max:
    if (equal(a, b)) return a;
    break;
  default: break;
  }
  return make_binary(op, a, b);
}

}  // namespace

expr simplify(const expr& e) {
  if (!e.defined()) return e;
  switch (e->kind) {
  case expr_kind::binary: {
    expr a = simplify(e->args[0]);
    expr b = simplify(e->args[1]);
    return simplify_binary(e->bop, a, b);
  }
  case expr_kind::unary: {
    expr a = simplify(e->args[0]);
    int64_t c;
    if (e->uop == unop::neg && is_const(a, &c)) return make_const(-c);
    return a.same_as(e->args[0]) ? e : make_unary(e->uop, a);
  }
  default: {
    bool changed = false;
    auto n = std::make_shared<expr_node>(*e);
    for (expr& a : n->args) {
      expr s = simplify(a);
      changed = changed || !s.same_as(a);
      a = s;
    }
    for (quant_var& q : n->qvars) {
      expr lo = simplify(q.lo), hi = simplify(q.hi);
      changed = changed || !lo.same_as(q.lo) || !hi.same_as(q.hi);
      q.lo = lo;
      q.hi = hi;
    }
    return changed ? expr(n) : e;
  }
  }
}

affine affine::operator+(const affine& o) const {
  affine r = *this;
  r.constant += o.constant;
  for (const auto& [v, c] : o.coeffs) {
    r.coeffs[v] += c;
    if (r.coeffs[v] == 0) r.coeffs.erase(v);
  }
  return r;
}

affine affine::operator-(const affine& o) const { return *this + o.scaled(-1); }

affine affine::scaled(int64_t k) const {
  affine r;
  if (k == 0) return r;
  r.constant = constant * k;
  for (const auto& [v, c] : coeffs) r.coeffs[v] = c * k;
  return r;
}

std::optional<affine> to_affine(const expr& e) {
  switch (e->kind) {
  case expr_kind::constant: {
    affine a;
    a.constant = e->value;
    return a;
  }
  case expr_kind::var: {
    affine a;
    a.coeffs[e->name] = 1;
    return a;
  }
  case expr_kind::unary:
    if (e->uop == unop::neg) {
      auto a = to_affine(e->args[0]);
      if (a) return a->scaled(-1);
    }
    return std::nullopt;
  case expr_kind::binary: {
    if (e->bop != binop::add && e->bop != binop::sub && e->bop != binop::mul) return std::nullopt;
    auto a = to_affine(e->args[0]);
    auto b = to_affine(e->args[1]);
    if (!a || !b) return std::nullopt;
    if (e->bop == binop::add) return *a + *b;
    if (e->bop == binop::sub) return *a - *b;
    if (a->is_constant()) return b->scaled(a->constant);
    if (b->is_constant()) return a->scaled(b->constant);
    return std::nullopt;
  }
  default: return std::nullopt;
  }
}

expr from_affine(const affine& a) {
  std::vector<std::pair<std::string, int64_t>> terms(a.coeffs.begin(), a.coeffs.end());
  std::stable_sort(terms.begin(), terms.end(), [](const auto& x, const auto& y) {
    int64_t ax = x.second < 0 ? -x.second : x.second;
    int64_t ay = y.second < 0 ? -y.second : y.second;
    return ax > ay;
  });
  // Lead with a positive term when there is one: y - yo * 8, not -(yo * 8) + y.
  std::stable_partition(terms.begin(), terms.end(), [](const auto& x) { return x.second > 0; });
  expr r;
  for (const auto& [v, c] : terms) {
    int64_t mag = c < 0 ? -c : c;
    expr t = mag == 1 ? make_var(v) : make_var(v) * make_const(mag);
    if (!r.defined()) {
      r = c < 0 ? make_unary(unop::neg, t) : t;
    } else {
      r = c < 0 ? r - t : r + t;
    }
  }
  if (!r.defined()) return make_const(a.constant);
  if (a.constant > 0) r = r + make_const(a.constant);
  if (a.constant < 0) r = r - make_const(-a.constant);
  return r;
}

// Printing.

namespace {

constexpr int prec_implies = 0;
constexpr int prec_select = 1;
constexpr int prec_or = 2;
constexpr int prec_and = 3;
constexpr int prec_eq = 4;
constexpr int prec_rel = 5;
constexpr int prec_add = 6;
constexpr int prec_mul = 7;
constexpr int prec_unary = 8;
constexpr int prec_atom = 10;

int binop_prec(binop op, dialect d) {
  switch (op) {
  case binop::implies: return prec_implies;
  case binop::or_: return prec_or;
  case binop::and_: return prec_and;
  case binop::eq:
  case binop::ne: return prec_eq;
  case binop::lt:
  case binop::le:
  case binop::gt:
  case binop::ge: return prec_rel;
  case binop::add:
  case binop::sub: return prec_add;
  case binop::mul: return prec_mul;
  case binop::div:
  case binop::mod: return d == dialect::dsl ? prec_mul : prec_atom;
  case binop::min:
  case binop::max: return d == dialect::dsl || d == dialect::pvl ? prec_atom : prec_select;
  }
  return prec_atom;
}

int expr_prec(const expr& e, dialect d) {
  switch (e->kind) {
  case expr_kind::binary: return binop_prec(e->bop, d);
  case expr_kind::unary: return prec_unary;
  case expr_kind::select: return d == dialect::dsl ? prec_atom : prec_select;
  case expr_kind::constant: return e->value < 0 ? prec_unary : prec_atom;
  default: return prec_atom;
  }
}

class printer {
public:
  explicit printer(const print_options& o) : o_(o) {}

  std::string str(const expr& e) {
    std::ostringstream os;
    emit(os, e);
    return os.str();
  }

private:
  const print_options& o_;
  bool compact() const { return o_.d != dialect::dsl; }

  void emit_wrapped(std::ostream& os, const expr& e, bool paren) {
    if (paren) os << "(";
    emit(os, e);
    if (paren) os << ")";
  }

  void emit_args(std::ostream& os, const std::vector<expr>& args) {
    for (size_t i = 0; i < args.size(); ++i) {
      if (i) os << ", ";
      emit(os, args[i]);
    }
  }

  std::string op_text(binop op, const expr& rhs) {
    if (!compact()) return std::string(" ") + binop_token(op) + " ";
    switch (op) {
    case binop::sub: {
      int64_t c;
      if (is_const(rhs, &c) && c >= 0) return "-";
      return " - ";
    }
    case binop::mul: return "*";
    case binop::lt: return "<";
    case binop::le: return "<=";
    default: return std::string(" ") + binop_token(op) + " ";
    }
  }

  void emit_binary(std::ostream& os, const expr& e) {
    binop op = e->bop;
    const expr& a = e->args[0];
    const expr& b = e->args[1];
    dialect d = o_.d;
    if (op == binop::div || op == binop::mod) {
      if (d != dialect::dsl) {
        const char* fn = op == binop::div ? (d == dialect::c_code ? "div_eucl" : "hdiv")
                                          : (d == dialect::c_code ? "mod_eucl" : "hmod");
        os << fn << "(";
        emit(os, a);
        os << ", ";
        emit(os, b);
        os << ")";
        return;
      }
    }
    if (op == binop::min || op == binop::max) {
      if (d == dialect::dsl || d == dialect::pvl) {
        os << binop_token(op) << "(";
        emit(os, a);
        os << ", ";
        emit(os, b);
        os << ")";
      } else {
        // (a < b ? a : b)
        os << "(";
        emit_wrapped(os, a, expr_prec(a, d) <= prec_rel);
        os << (op == binop::min ? " < " : " > ");
        emit_wrapped(os, b, expr_prec(b, d) <= prec_rel);
        os << " ? ";
        emit_wrapped(os, a, expr_prec(a, d) <= prec_select);
        os << " : ";
        emit_wrapped(os, b, expr_prec(b, d) < prec_select);
        os << ")";
      }
      return;
    }
    int p = binop_prec(op, d);
    bool right_assoc = op == binop::implies;
    bool chainless = p == prec_rel || p == prec_eq;
    int pa = expr_prec(a, d), pb = expr_prec(b, d);
    bool paren_a = pa < p || (pa == p && (right_assoc || chainless));
    bool paren_b = pb < p || (pb == p && (!right_assoc || chainless));
    // Keep associative chains flat: a + b + c, a && b && c.
    if (pb == p && !chainless && !right_assoc && b->kind == expr_kind::binary && b->bop == op &&
        (op == binop::and_ || op == binop::or_)) {
      paren_b = true;
    }
    emit_wrapped(os, a, paren_a);
    os << op_text(op, b);
    emit_wrapped(os, b, paren_b);
  }

  void emit_forall(std::ostream& os, const expr& e) {
    bool typed = o_.d != dialect::dsl;
    os << "(\\forall" << (e->star ? "*" : "") << " ";
    for (size_t i = 0; i < e->qvars.size(); ++i) {
      if (i) os << ", ";
      if (typed) os << "int ";
      os << e->qvars[i].name;
    }
    os << "; ";
    for (size_t i = 0; i < e->qvars.size(); ++i) {
      const quant_var& q = e->qvars[i];
      if (i) os << " && ";
      emit_wrapped(os, q.lo, expr_prec(q.lo, o_.d) <= prec_rel);
      os << (compact() ? "<=" : " <= ") << q.name << " && " << q.name << (compact() ? "<" : " < ");
      emit_wrapped(os, q.hi, expr_prec(q.hi, o_.d) <= prec_rel);
    }
    os << "; ";
    emit(os, e->args[0]);
    os << ")";
  }

  void emit(std::ostream& os, const expr& e) {
    dialect d = o_.d;
    switch (e->kind) {
    case expr_kind::constant: os << e->value; return;
    case expr_kind::var: os << e->name; return;
    case expr_kind::func_call:
    case expr_kind::buf_call:
    case expr_kind::call:
      os << e->name << "(";
      emit_args(os, e->args);
      os << ")";
      return;
    case expr_kind::load:
      os << (o_.load_name ? o_.load_name(e->name) : e->name) << "[";
      emit(os, e->args[0]);
      os << "]";
      return;
    case expr_kind::result: os << "\\result"; return;
    case expr_kind::unary: {
      os << (e->uop == unop::neg ? "-" : "!");
      const expr& a = e->args[0];
      emit_wrapped(os, a, expr_prec(a, d) < prec_atom);
      return;
    }
    case expr_kind::binary: emit_binary(os, e); return;
    case expr_kind::select:
      if (d == dialect::dsl) {
        os << "select(";
        emit_args(os, e->args);
        os << ")";
      } else {
        emit_wrapped(os, e->args[0], expr_prec(e->args[0], d) <= prec_select);
        os << " ? ";
        emit_wrapped(os, e->args[1], expr_prec(e->args[1], d) < prec_select);
        os << " : ";
        emit_wrapped(os, e->args[2], expr_prec(e->args[2], d) < prec_select);
      }
      return;
    case expr_kind::bound_ref:
      if (o_.bound_name) {
        os << o_.bound_name(e->name, e->dim, e->is_max);
      } else if (d == dialect::dsl) {
        os << e->name << "." << e->dim << (e->is_max ? ".max" : ".min");
      } else {
        os << e->name << "_" << e->dim << (e->is_max ? "_max()" : "_min()");
      }
      return;
    case expr_kind::forall: emit_forall(os, e); return;
    case expr_kind::perm: {
      os << "Perm(";
      const expr& loc = e->args[0];
      if (d == dialect::c_ann || d == dialect::c_code) os << "&";
      emit(os, loc);
      os << ", " << e->value << "\\";
      if (e->dens.size() == 1) {
        os << e->dens[0];
      } else {
        os << "(";
        for (size_t i = 0; i < e->dens.size(); ++i) os << (i ? "*" : "") << e->dens[i];
        os << ")";
      }
      os << ")";
      return;
    }
    }
  }
};

}  // namespace

std::string print(const expr& e, const print_options& opts) {
  if (!e.defined()) return "<undef>";
  printer p(opts);
  return p.str(e);
}

std::string print(const expr& e, dialect d) {
  print_options o;
  o.d = d;
  return print(e, o);
}

}  // namespace minisched

#include "minisched/lower.h"

#include <algorithm>
#include <functional>
#include <set>
#include <sstream>

#include "minisched/error.h"

namespace minisched {

expr alloc_info::index_of(const std::vector<expr>& point) const {
  expr r;
  for (size_t i = point.size(); i-- > 0;) {
    expr d = simplify(point[i] - base[i]);
    if (auto a = to_affine(d)) d = from_affine(*a);
    if (is_const(d) && d->value == 0) continue;
    expr t = stride[i] == 1 ? d : d * make_const(stride[i]);
    r = r.defined() ? r + t : t;
  }
  return r.defined() ? simplify(r) : make_const(0);
}

expr lnode::max() const {
  expr m = min + make_const(extent - 1);
  if (auto a = to_affine(m)) return from_affine(*a);
  return simplify(m);
}

const alloc_info* lowered_program::input(const std::string& name) const {
  for (const alloc_info& a : inputs) {
    if (a.func == name) return &a;
  }
  return nullptr;
}

void walk(const lnode& n, const std::function<void(const lnode&)>& f) {
  f(n);
  for (const lnode& c : n.body) walk(c, f);
}

void walk_mut(lnode& n, const std::function<void(lnode&)>& f) {
  f(n);
  for (lnode& c : n.body) walk_mut(c, f);
}

namespace {

// Interval arithmetic over affine bounds. Variables outside the environment
// stay symbolic; non-affine subterms become opaque atoms.
struct sym_interval {
  affine lo, hi;
};

class bounds_engine {
public:
  // Loop var -> (min expr, extent); min may mention other loop vars.
  std::map<std::string, std::pair<expr, int64_t>> env;
  // Algorithm var -> interval, used for update footprints.
  std::map<std::string, sym_interval> fixed;

  std::optional<sym_interval> of(const expr& e) {
    switch (e->kind) {
    case expr_kind::constant: {
      affine a;
      a.constant = e->value;
      return sym_interval{a, a};
    }
    case expr_kind::var: {
      auto fi = fixed.find(e->name);
      if (fi != fixed.end()) return fi->second;
      auto it = env.find(e->name);
      if (it == env.end()) {
        affine a;
        a.coeffs[e->name] = 1;
        return sym_interval{a, a};
      }
      auto m = of(it->second.first);
      if (!m) return std::nullopt;
      m->hi.constant += it->second.second - 1;
      return m;
    }
    case expr_kind::unary: {
      if (e->uop != unop::neg) return std::nullopt;
      auto a = of(e->args[0]);
      if (!a) return std::nullopt;
      return sym_interval{a->hi.scaled(-1), a->lo.scaled(-1)};
    }
    case expr_kind::select: {
      auto t = of(e->args[1]);
      auto f = of(e->args[2]);
      if (!t || !f) return std::nullopt;
      return unite(*t, *f);
    }
    case expr_kind::binary: return of_binary(e);
    default: return std::nullopt;
    }
  }

  sym_interval unite(const sym_interval& a, const sym_interval& b) {
    return {pick(a.lo, b.lo, true), pick(a.hi, b.hi, false)};
  }

  expr to_expr(const affine& a) const {
    expr e = from_affine(a);
    if (atoms_.empty()) return e;
    std::map<std::string, expr> sub;
    for (const auto& [v, c] : a.coeffs) {
      (void)c;
      if (!v.empty() && v[0] == '$') sub[v] = atoms_[std::stoul(v.substr(1))];
    }
    return sub.empty() ? e : substitute(e, sub);
  }

private:
  std::vector<expr> atoms_;
  std::map<std::string, size_t> atom_index_;

  affine atom(const expr& e) {
    std::string key = print(e);
    auto it = atom_index_.find(key);
    size_t k;
    if (it == atom_index_.end()) {
      k = atoms_.size();
      atoms_.push_back(e);
      atom_index_[key] = k;
    } else {
      k = it->second;
    }
    affine a;
    a.coeffs["$" + std::to_string(k)] = 1;
    return a;
  }

  affine pick(const affine& a, const affine& b, bool lower) {
    affine d = a - b;
    if (d.is_constant()) return (d.constant <= 0) == lower ? a : b;
    return atom(lower ? emin(to_expr(a), to_expr(b)) : emax(to_expr(a), to_expr(b)));
  }

  std::optional<affine> point_const(const std::optional<sym_interval>& s) {
    if (s && s->lo == s->hi && s->lo.is_constant()) return s->lo;
    return std::nullopt;
  }

  affine floor_div(const affine& a, int64_t c) {
    bool exact = true;
    for (const auto& [v, k] : a.coeffs) {
      (void)v;
      if (k % c != 0) exact = false;
    }
    if (exact) {
      affine r;
      for (const auto& [v, k] : a.coeffs) r.coeffs[v] = k / c;
      r.constant = hdiv(a.constant, c);
      return r;
    }
    return atom(ediv(to_expr(a), make_const(c)));
  }

  std::optional<sym_interval> of_binary(const expr& e) {
    auto a = of(e->args[0]);
    auto b = of(e->args[1]);
    if (!a || !b) return std::nullopt;
    switch (e->bop) {
    case binop::add: return sym_interval{a->lo + b->lo, a->hi + b->hi};
    case binop::sub: return sym_interval{a->lo - b->hi, a->hi - b->lo};
    case binop::mul: {
      auto ca = point_const(a), cb = point_const(b);
      if (!ca && !cb) {
        if (a->lo == a->hi && b->lo == b->hi) {
          affine p = atom(to_expr(a->lo) * to_expr(b->lo));
          return sym_interval{p, p};
        }
        return std::nullopt;
      }
      const sym_interval& x = ca ? *b : *a;
      int64_t k = ca ? ca->constant : cb->constant;
      if (k >= 0) return sym_interval{x.lo.scaled(k), x.hi.scaled(k)};
      return sym_interval{x.hi.scaled(k), x.lo.scaled(k)};
    }
    case binop::div: {
      auto cb = point_const(b);
      if (!cb || cb->constant <= 0) return std::nullopt;
      int64_t c = cb->constant;
      return sym_interval{floor_div(a->lo, c), floor_div(a->hi, c)};
    }
    case binop::mod: {
      auto cb = point_const(b);
      if (!cb || cb->constant <= 0) return std::nullopt;
      int64_t c = cb->constant;
      if (a->lo.is_constant() && a->hi.is_constant()) {
        int64_t lo = a->lo.constant, hi = a->hi.constant;
        affine l, h;
        if (hi - lo + 1 < c && hmod(lo, c) <= hmod(hi, c)) {
          l.constant = hmod(lo, c);
          h.constant = hmod(hi, c);
        } else {
          h.constant = c - 1;
        }
        return sym_interval{l, h};
      }
      if (a->lo == a->hi) {
        affine p = atom(emod(to_expr(a->lo), make_const(c)));
        return sym_interval{p, p};
      }
      affine l, h;
      h.constant = c - 1;
      return sym_interval{l, h};
    }
    case binop::min: return sym_interval{pick(a->lo, b->lo, true), pick(a->hi, b->hi, true)};
    case binop::max: return sym_interval{pick(a->lo, b->lo, false), pick(a->hi, b->hi, false)};
    default: {
      affine l, h;
      h.constant = 1;
      return sym_interval{l, h};
    }
    }
  }
};

lnode make_node(node_kind k) {
  lnode n;
  n.kind = k;
  return n;
}

expr canon(const expr& e) {
  if (auto a = to_affine(e)) return from_affine(*a);
  return simplify(e);
}

std::string c_name(const std::string& n) {
  std::string s = n;
  std::replace(s.begin(), s.end(), '.', '_');
  return s;
}

const std::set<std::string> c_reserved = {
    "auto", "break", "case", "char", "const", "continue", "default", "do", "double", "else", "enum",
    "extern", "float", "for", "goto", "if", "int", "long", "register", "return", "short", "signed",
    "sizeof", "static", "struct", "switch", "typedef", "union", "unsigned", "void", "volatile", "while",
    "hdiv", "hmod", "div_eucl", "mod_eucl", "malloc", "free", "buffer", "main", "int32_t", "int64_t"};

struct scope_loop {
  std::string var;
  expr min;
  int64_t extent = 0;
  const_range range;
};

struct level_key {
  std::string func;
  int stage;
  std::string var;
  bool operator<(const level_key& o) const {
    return std::tie(func, stage, var) < std::tie(o.func, o.stage, o.var);
  }
};

struct computed_region {
  func_region region;
  std::vector<expr> hi;          // inclusive upper bounds
  std::vector<scope_loop> path;  // loops enclosing the compute level
};

class lowerer {
public:
  explicit lowerer(const scheduled_pipeline& sp) : sp_(sp), p_(sp.p) {
    for (const func& f : p_.funcs) {
      taken_.insert(f.name);
      const func_schedule& fs = sp_.of(f.name);
      if (fs.where != placement::at) continue;
      computed_at_[{fs.compute.func, fs.compute.stage, fs.compute.var}].push_back(f.name);
      stored_at_[{fs.store.func, fs.store.stage, fs.store.var}].push_back(f.name);
    }
    for (const buffer& b : p_.inputs) taken_.insert(b.name);
  }

  lowered_program run() {
    lowered_program prog;
    prog.sp = sp_;
    for (const buffer& b : p_.inputs) prog.inputs.push_back(domain_alloc(b.name, b.dims, true));
    const func& out = p_.output_func();
    prog.output = domain_alloc(out.name, out.dims, false);
    prog.output.output = true;

    std::vector<scope_loop> root;
    func_region oreg = domain_region(out);
    std::vector<lnode> body{build_produce(out, oreg, root)};
    std::vector<std::string> roots;
    for (const func& f : p_.funcs) {
      if (f.name != out.name && sp_.of(f.name).where == placement::root) roots.push_back(f.name);
    }
    for (auto it = roots.rbegin(); it != roots.rend(); ++it) {
      const func& g = *p_.find_func(*it);
      func_region reg = domain_region(g);
      regions_[g.name] = {reg, his(reg), root};
      lnode cons = make_node(node_kind::consume);
      cons.func = g.name;
      cons.body = std::move(body);
      lnode al = make_node(node_kind::allocate);
      al.func = g.name;
      al.alloc = make_alloc(g, reg);
      al.body = {build_produce(g, reg, root), std::move(cons)};
      body = {std::move(al)};
    }
    prog.root.kind = node_kind::block;
    prog.root.body = std::move(body);
    for (const auto& [name, r] : regions_) {
      prog.regions[name] = r.region;
      std::vector<path_loop>& pl = prog.compute_paths[name];
      for (const scope_loop& l : r.path) pl.push_back({l.var, l.min, l.extent});
    }
    flatten(prog);
    return prog;
  }

private:
  const scheduled_pipeline& sp_;
  const pipeline& p_;
  std::map<level_key, std::vector<std::string>> computed_at_, stored_at_;
  std::map<std::string, computed_region> regions_;
  std::set<std::string> taken_;

  static std::vector<expr> his(const func_region& r) {
    std::vector<expr> out;
    for (size_t i = 0; i < r.min.size(); ++i) out.push_back(canon(r.min[i] + make_const(r.extent[i] - 1)));
    return out;
  }

  func_region domain_region(const func& f) const {
    func_region r;
    for (const dim& d : f.dims) {
      r.min.push_back(make_const(d.range.min));
      r.extent.push_back(d.range.extent);
    }
    return r;
  }

  alloc_info domain_alloc(const std::string& name, const std::vector<dim>& dims, bool input) const {
    func_region r;
    for (const dim& d : dims) {
      r.min.push_back(make_const(d.range.min));
      r.extent.push_back(d.range.extent);
    }
    alloc_info a = alloc_from(name, r);
    a.input = input;
    return a;
  }

  static alloc_info alloc_from(const std::string& name, const func_region& r) {
    alloc_info a;
    a.func = name;
    a.base = r.min;
    a.extent = r.extent;
    int64_t s = 1;
    for (int64_t e : r.extent) {
      a.stride.push_back(s);
      s *= std::max<int64_t>(e, 0);
    }
    a.size = s;
    return a;
  }

  alloc_info make_alloc(const func& f, const func_region& r) const { return alloc_from(f.name, r); }

  // Inlines pure funcs placed inline and resolves bound references.
  expr inline_calls(const expr& e) const {
    if (!e.defined()) return e;
    expr r = resolve_bound_refs(e, p_);
    return mutate(r, [&](const expr& x) -> expr {
      if (x->kind != expr_kind::func_call) return expr();
      if (sp_.of(x->name).where != placement::inlined) return expr();
      const func& g = *p_.find_func(x->name);
      std::map<std::string, expr> sub;
      for (size_t i = 0; i < g.dims.size(); ++i) sub[g.dims[i].name] = inline_calls(x->args[i]);
      return inline_calls(substitute(g.stages[0].rhs, sub));
    });
  }

  std::string fresh_var(const std::string& func, const std::string& dim, const std::vector<scope_loop>& scope) const {
    auto used = [&](const std::string& n) {
      if (taken_.count(n) || c_reserved.count(n)) return true;
      for (const scope_loop& s : scope) {
        if (s.var == n) return true;
      }
      return false;
    };
    std::string base = c_name(dim);
    if (!used(base)) return base;
    std::string pref = func + "_" + base;
    if (!used(pref)) return pref;
    for (int k = 1;; ++k) {
      std::string n = pref + std::to_string(k);
      if (!used(n)) return n;
    }
  }

  const_range concrete(const expr& e, const std::vector<scope_loop>& scope) const {
    std::map<std::string, const_range> m;
    for (const scope_loop& s : scope) m[s.var] = s.range;
    auto r = range_of(e, m);
    if (!r) throw error("InternalError", "cannot bound '" + print(e) + "'");
    return *r;
  }

  lnode build_produce(const func& f, const func_region& reg, const std::vector<scope_loop>& scope) {
    lnode prod = make_node(node_kind::produce);
    prod.func = f.name;
    // Points of the region outside the func's domain are skipped.
    std::vector<bool> clamp(f.dims.size(), false);
    if (f.name != p_.output) {
      for (size_t i = 0; i < f.dims.size(); ++i) {
        const_range lo = concrete(reg.min[i], scope);
        if (lo.lo < f.dims[i].range.min || lo.hi + reg.extent[i] > f.dims[i].range.max()) clamp[i] = true;
      }
    }
    for (size_t si = 0; si < f.stages.size(); ++si) {
      for (lnode& n : build_stage(f, si, reg, clamp, scope)) prod.body.push_back(std::move(n));
    }
    return prod;
  }

  struct loop_spec {
    std::string dim, var, label;
    expr min;
    int64_t extent;
    loop_kind kind;
    std::vector<int> rvars;
  };

  std::vector<lnode> build_stage(const func& f, size_t si, const func_region& reg, const std::vector<bool>& clamp,
                                 const std::vector<scope_loop>& scope) {
    const stage& s = f.stages[si];
    const stage_schedule& ss = sp_.of(f.name).stages[si];
    std::map<std::string, expr> base;
    std::map<std::string, int64_t> ext;
    std::map<std::string, std::string> label;
    std::map<std::string, std::vector<int>> rv;
    std::set<std::string> original;
    for (size_t i = 0; i < f.dims.size(); ++i) {
      base[f.dims[i].name] = reg.min[i];
      ext[f.dims[i].name] = reg.extent[i];
      label[f.dims[i].name] = f.dims[i].name;
    }
    if (s.rd) {
      for (size_t k = 0; k < s.rd->vars.size(); ++k) {
        const rdom_var& r = s.rd->vars[k];
        base[r.name] = make_const(r.range.min);
        ext[r.name] = r.range.extent;
        label[r.name] = r.name;
        rv[r.name] = {static_cast<int>(k)};
      }
    }
    for (const std::string& n : default_stage_dims(f, si)) original.insert(n);
    for (const dim_relation& r : ss.relations) {
      if (r.kind == dim_relation::split) {
        int64_t e = ext[r.a];
        ext[r.b] = (e + r.factor - 1) / r.factor;
        ext[r.c] = r.factor;
        base[r.b] = base[r.c] = make_const(0);
        label[r.b] = label[r.a] + "." + r.b;
        label[r.c] = label[r.a] + "." + r.c;
        rv[r.b] = rv[r.c] = rv[r.a];
      } else {
        ext[r.c] = ext[r.a] * ext[r.b];
        base[r.c] = make_const(0);
        label[r.c] = r.c;
        std::vector<int> u = rv[r.a];
        u.insert(u.end(), rv[r.b].begin(), rv[r.b].end());
        std::sort(u.begin(), u.end());
        rv[r.c] = u;
      }
    }

    // Loops, outermost first, with names unique in scope.
    std::vector<loop_spec> loops;
    std::vector<scope_loop> inner_scope = scope;
    for (size_t k = ss.dims.size(); k-- > 0;) {
      const sched_dim& d = ss.dims[k];
      loop_spec l;
      l.dim = d.name;
      l.var = fresh_var(f.name, d.name, inner_scope);
      l.label = label[d.name];
      l.min = original.count(d.name) ? base[d.name] : make_const(0);
      l.extent = ext[d.name];
      l.kind = d.kind;
      l.rvars = rv[d.name];
      const_range mr = concrete(l.min, inner_scope);
      inner_scope.push_back({l.var, l.min, l.extent, {mr.lo, mr.hi + l.extent - 1}});
      loops.push_back(l);
    }

    // Algorithm names in terms of loop vars.
    std::map<std::string, expr> defs;
    for (const loop_spec& l : loops) defs[l.dim] = make_var(l.var);
    std::vector<expr> guards;
    for (auto it = ss.relations.rbegin(); it != ss.relations.rend(); ++it) {
      const dim_relation& r = *it;
      if (r.kind == dim_relation::split) {
        expr b = original.count(r.a) ? base[r.a] : make_const(0);
        expr v = canon(b + defs[r.b] * make_const(r.factor) + defs[r.c]);
        if (ext[r.a] % r.factor != 0) guards.push_back(v < canon(b + make_const(ext[r.a])));
        defs[r.a] = v;
        defs.erase(r.b);
        defs.erase(r.c);
      } else {
        expr ba = original.count(r.a) ? base[r.a] : make_const(0);
        expr bb = original.count(r.b) ? base[r.b] : make_const(0);
        expr fv = defs[r.c];
        defs[r.a] = simplify(ba + emod(fv, make_const(ext[r.a])));
        defs[r.b] = simplify(bb + ediv(fv, make_const(ext[r.a])));
        defs.erase(r.c);
      }
    }
    std::reverse(guards.begin(), guards.end());
    for (size_t i = 0; i < f.dims.size(); ++i) {
      if (!clamp[i]) continue;
      auto it = defs.find(f.dims[i].name);
      if (it == defs.end()) continue;
      const interval& dom = f.dims[i].range;
      guards.push_back(make_const(dom.min) <= it->second && it->second < make_const(dom.max()));
    }

    lnode st = make_node(node_kind::store);
    st.func = f.name;
    st.stage = static_cast<int>(si);
    st.stmt.func = f.name;
    st.stmt.stage = static_cast<int>(si);
    for (const expr& a : s.lhs) st.stmt.args.push_back(inline_calls(a));
    st.stmt.value = inline_calls(s.rhs);
    st.stmt.cond = inline_calls(s.guard);
    st.stmt.defs = defs;
    st.stmt.guards = guards;

    std::vector<lnode> body{std::move(st)};
    for (size_t k = loops.size(); k-- > 0;) {
      const loop_spec& l = loops[k];
      std::vector<scope_loop> at(inner_scope.begin(), inner_scope.begin() + scope.size() + k + 1);
      body = wrap_level({f.name, static_cast<int>(si), l.dim}, std::move(body), at);
      lnode loop = make_node(node_kind::loop);
      loop.func = f.name;
      loop.stage = static_cast<int>(si);
      loop.var = l.var;
      loop.label = l.label;
      loop.dim = l.dim;
      loop.min = l.min;
      loop.extent = l.extent;
      loop.lkind = l.kind;
      loop.rvars = l.rvars;
      loop.body = std::move(body);
      body = {std::move(loop)};
    }
    return body;
  }

  // Accesses of g below `n`, with the loops on the way recorded in the engine.
  void collect(const lnode& n, const std::string& g, bounds_engine& be, std::vector<std::vector<expr>>& out,
               std::vector<std::map<std::string, std::pair<expr, int64_t>>>& envs) const {
    if (n.kind == node_kind::loop) {
      auto saved = be.env;
      be.env[n.var] = {n.min, n.extent};
      for (const lnode& c : n.body) collect(c, g, be, out, envs);
      be.env = saved;
      return;
    }
    if (n.kind == node_kind::store) {
      auto scan = [&](const expr& e) {
        if (!e.defined()) return;
        visit(e, [&](const expr& x) {
          if (x->kind == expr_kind::func_call && x->name == g) {
            std::vector<expr> args;
            for (const expr& a : x->args) args.push_back(substitute(a, n.stmt.defs));
            out.push_back(args);
            envs.push_back(be.env);
          }
          return true;
        });
      };
      scan(n.stmt.value);
      scan(n.stmt.cond);
      for (const expr& a : n.stmt.args) scan(a);
      return;
    }
    for (const lnode& c : n.body) collect(c, g, be, out, envs);
  }

  func_region infer_region(const func& g, const std::vector<lnode>& body) {
    bounds_engine be;
    std::vector<std::vector<expr>> accesses;
    std::vector<std::map<std::string, std::pair<expr, int64_t>>> envs;
    for (const lnode& n : body) collect(n, g.name, be, accesses, envs);
    if (accesses.empty()) {
      throw error("InvalidPlacement", "'" + g.name + "' is computed at a loop that never reads it", g.span);
    }
    size_t nd = g.dims.size();
    std::vector<std::optional<sym_interval>> box(nd);
    std::vector<bool> failed(nd, false);
    for (size_t k = 0; k < accesses.size(); ++k) {
      be.env = envs[k];
      for (size_t i = 0; i < nd; ++i) {
        if (failed[i]) continue;
        auto s = be.of(accesses[k][i]);
        if (!s) {
          failed[i] = true;
          continue;
        }
        box[i] = box[i] ? be.unite(*box[i], *s) : *s;
      }
    }
    be.env.clear();
    // Updates may touch points the consumers never read.
    for (int round = 0; round < 2; ++round) {
      for (size_t si = 1; si < g.stages.size(); ++si) {
        const stage& s = g.stages[si];
        be.fixed.clear();
        for (size_t i = 0; i < nd; ++i) {
          if (box[i] && !failed[i]) be.fixed[g.dims[i].name] = *box[i];
        }
        if (s.rd) {
          for (const rdom_var& r : s.rd->vars) {
            affine lo, hi;
            lo.constant = r.range.min;
            hi.constant = r.range.max() - 1;
            be.fixed[r.name] = {lo, hi};
          }
        }
        std::vector<std::vector<expr>> pts{s.lhs};
        visit(s.rhs, [&](const expr& x) {
          if (x->kind == expr_kind::func_call && x->name == g.name) pts.push_back(x->args);
          return true;
        });
        for (const auto& pt : pts) {
          for (size_t i = 0; i < nd; ++i) {
            if (failed[i]) continue;
            auto b = be.of(inline_calls(pt[i]));
            if (!b) {
              failed[i] = true;
              continue;
            }
            box[i] = box[i] ? be.unite(*box[i], *b) : *b;
          }
        }
      }
    }
    func_region r;
    for (size_t i = 0; i < nd; ++i) {
      const interval& dom = g.dims[i].range;
      if (!failed[i] && box[i]) {
        affine d = box[i]->hi - box[i]->lo;
        if (d.is_constant() && d.constant >= 0) {
          r.min.push_back(be.to_expr(box[i]->lo));
          r.extent.push_back(d.constant + 1);
          continue;
        }
      }
      r.min.push_back(make_const(dom.min));
      r.extent.push_back(dom.extent);
    }
    return r;
  }

  // Allocation at a store level covering every compute-level region below it.
  func_region infer_alloc(const func& g, const std::vector<scope_loop>& store_path) {
    const computed_region& cr = regions_.at(g.name);
    if (cr.path.size() == store_path.size()) return cr.region;
    bounds_engine be;
    for (size_t k = store_path.size(); k < cr.path.size(); ++k) {
      be.env[cr.path[k].var] = {cr.path[k].min, cr.path[k].extent};
    }
    func_region r;
    for (size_t i = 0; i < g.dims.size(); ++i) {
      auto lo = be.of(cr.region.min[i]);
      auto hi = be.of(cr.hi[i]);
      const interval& dom = g.dims[i].range;
      if (lo && hi) {
        affine d = hi->hi - lo->lo;
        if (d.is_constant() && d.constant >= 0) {
          r.min.push_back(be.to_expr(lo->lo));
          r.extent.push_back(d.constant + 1);
          continue;
        }
      }
      r.min.push_back(make_const(dom.min));
      r.extent.push_back(dom.extent);
    }
    return r;
  }

  std::vector<lnode> wrap_level(const level_key& lv, std::vector<lnode> body, const std::vector<scope_loop>& path) {
    auto ci = computed_at_.find(lv);
    if (ci != computed_at_.end()) {
      for (auto it = ci->second.rbegin(); it != ci->second.rend(); ++it) {
        const func& g = *p_.find_func(*it);
        func_region reg = infer_region(g, body);
        regions_[g.name] = {reg, his(reg), path};
        lnode cons = make_node(node_kind::consume);
        cons.func = g.name;
        cons.body = std::move(body);
        body.clear();
        body.push_back(build_produce(g, reg, path));
        body.push_back(std::move(cons));
      }
    }
    auto st = stored_at_.find(lv);
    if (st != stored_at_.end()) {
      for (auto it = st->second.rbegin(); it != st->second.rend(); ++it) {
        const func& g = *p_.find_func(*it);
        lnode al = make_node(node_kind::allocate);
        al.func = g.name;
        al.alloc = make_alloc(g, infer_alloc(g, path));
        al.body = std::move(body);
        body.clear();
        body.push_back(std::move(al));
      }
    }
    return body;
  }

  void flatten(lowered_program& prog) {
    std::map<std::string, const alloc_info*> scope;
    for (const alloc_info& a : prog.inputs) scope[a.func] = &a;
    scope[prog.output.func] = &prog.output;
    flatten_node(prog.root, scope);
  }

  expr flatten_expr(const expr& e, const std::map<std::string, expr>& defs,
                    const std::map<std::string, const alloc_info*>& scope) const {
    expr s = substitute(e, defs);
    return mutate(s, [&](const expr& x) -> expr {
      if (x->kind != expr_kind::func_call && x->kind != expr_kind::buf_call) return expr();
      auto it = scope.find(x->name);
      if (it == scope.end()) {
        // A consumer placed outside the loop the producer is computed at.
        throw error("InvalidPlacement", "'" + x->name + "' is read outside the loop it is computed at");
      }
      std::vector<expr> args;
      for (const expr& a : x->args) args.push_back(flatten_expr(a, {}, scope));
      return make_load(x->name, it->second->index_of(args));
    });
  }

  void flatten_node(lnode& n, std::map<std::string, const alloc_info*>& scope) {
    if (n.kind == node_kind::allocate) {
      auto saved = scope;
      scope[n.func] = &n.alloc;
      for (lnode& c : n.body) flatten_node(c, scope);
      scope = saved;
      return;
    }
    if (n.kind == node_kind::store) {
      store_stmt& s = n.stmt;
      auto it = scope.find(s.func);
      if (it == scope.end()) throw error("InternalError", "'" + s.func + "' is written outside its allocation");
      std::vector<expr> args;
      for (const expr& a : s.args) args.push_back(flatten_expr(a, s.defs, scope));
      s.index = it->second->index_of(args);
      s.flat_value = flatten_expr(s.value, s.defs, scope);
      std::vector<expr> cs = s.guards;
      if (s.cond.defined()) cs.push_back(flatten_expr(s.cond, s.defs, scope));
      s.flat_cond = cs.empty() ? expr() : conjunction(cs);
      return;
    }
    for (lnode& c : n.body) flatten_node(c, scope);
  }
};

void dump_anns(std::ostringstream& os, const ann_set& a, const std::string& ind) {
  auto list = [&](const char* kw, const std::vector<expr>& es) {
    for (const expr& e : es) os << ind << "// " << kw << " " << print(e) << "\n";
  };
  list("requires", a.requires_);
  list("ensures", a.ensures);
  list("context", a.context);
  list("invariant", a.invariants);
}

void dump_node(std::ostringstream& os, const lnode& n, int depth, bool anns) {
  std::string ind(2 * depth, ' ');
  if (anns) dump_anns(os, n.anns, ind);
  switch (n.kind) {
  case node_kind::block:
    for (const lnode& c : n.body) dump_node(os, c, depth, anns);
    return;
  case node_kind::loop:
    os << ind << loop_kind_name(n.lkind) << " " << n.label << " in [" << print(n.min) << ", " << print(n.max())
       << "]:\n";
    break;
  case node_kind::produce: os << ind << "produce " << n.func << ":\n"; break;
  case node_kind::consume: os << ind << "consume " << n.func << ":\n"; break;
  case node_kind::allocate: os << ind << "store " << n.func << ":\n"; break;
  case node_kind::store: {
    const store_stmt& s = n.stmt;
    os << ind << s.func << "(";
    for (size_t i = 0; i < s.args.size(); ++i) os << (i ? ", " : "") << print(s.args[i]);
    os << ") = " << print(s.value);
    if (s.cond.defined()) os << " if " << print(s.cond);
    os << "\n";
    return;
  }
  }
  for (const lnode& c : n.body) dump_node(os, c, depth + 1, anns);
}

}  // namespace

lowered_program lower(const scheduled_pipeline& sp) { return lowerer(sp).run(); }

func_region footprint(const lowered_program& prog, const std::string& g, const std::string& loop_var) {
  const func& f = *prog.sp.p.find_func(g);
  const func_region& reg = prog.regions.at(g);
  const std::vector<path_loop>& path = prog.compute_paths.at(g);
  bounds_engine be;
  bool inside = false;
  for (const path_loop& l : path) {
    if (inside) be.env[l.var] = {l.min, l.extent};
    if (l.var == loop_var) inside = true;
  }
  func_region r;
  for (size_t i = 0; i < f.dims.size(); ++i) {
    auto lo = be.of(reg.min[i]);
    auto hi = be.of(canon(reg.min[i] + make_const(reg.extent[i] - 1)));
    if (lo && hi) {
      affine d = hi->hi - lo->lo;
      if (d.is_constant() && d.constant >= 0) {
        r.min.push_back(be.to_expr(lo->lo));
        r.extent.push_back(d.constant + 1);
        continue;
      }
    }
    r.min.push_back(make_const(f.dims[i].range.min));
    r.extent.push_back(f.dims[i].range.extent);
  }
  return r;
}

std::string dump_loop_nest(const lowered_program& prog, bool with_annotations) {
  std::ostringstream os;
  if (with_annotations) dump_anns(os, prog.contract, "");
  dump_node(os, prog.root, 0, with_annotations);
  return os.str();
}

}  // namespace minisched

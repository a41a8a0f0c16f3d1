#include "minisched/annotate.h"

#include <algorithm>
#include <optional>
#include <set>

#include "minisched/encoder.h"
#include "minisched/error.h"

namespace minisched {

std::string abstract_input_name(size_t i, size_t n) { return n == 1 ? "p_i" : "p_i" + std::to_string(i); }

namespace {

bool has_perm(const expr& e) {
  bool found = false;
  visit(e, [&](const expr& x) {
    if (x->kind == expr_kind::perm) found = true;
    return !found;
  });
  return found;
}

void names_in(const expr& e, std::set<std::string>& out) {
  visit(e, [&](const expr& x) {
    if (x->kind == expr_kind::var) out.insert(x->name);
    if (x->kind == expr_kind::forall) {
      for (const quant_var& q : x->qvars) {
        out.insert(q.name);
        names_in(q.lo, out);
        names_in(q.hi, out);
      }
    }
    return true;
  });
}

expr guarded(const expr& g, const expr& e) { return g.defined() ? implies(g, e) : e; }

// Annotations of one stage on their way out of its loops.
struct stage_state {
  std::vector<expr> context, requires_, ensures;
  bool reduction = false;
  expr inv;          // current reduction invariant, undefined when the user gave none
  std::string prev;  // loop var of the last reduction loop passed
  expr prev_min, prev_end;
};

struct summary {
  std::set<std::string> reads, produces;
};

class annotator {
public:
  explicit annotator(lowered_program& prog) : prog_(prog), p_(prog.sp.p) {}

  void run() {
    prog_.abstract_inputs.clear();
    prog_.contract = {};
    for (size_t i = 0; i < prog_.inputs.size(); ++i) {
      std::string n = abstract_input_name(i, prog_.inputs.size());
      prog_.abstract_inputs.push_back(n);
      pname_[prog_.inputs[i].func] = n;
      allocs_[prog_.inputs[i].func] = prog_.inputs[i];
      reserved_.insert(n);
    }
    allocs_[prog_.output.func] = prog_.output;
    walk(prog_.root, [&](const lnode& n) {
      if (n.kind == node_kind::allocate) allocs_[n.func] = n.alloc;
    });
    for (const func& f : p_.funcs) reserved_.insert(f.name);
    for (const buffer& b : p_.inputs) reserved_.insert(b.name);
    walk_mut(prog_.root, [](lnode& n) { n.anns = {}; });

    summarize(prog_.root);
    contract();
    std::vector<lnode*> path;
    visit_node(prog_.root, path);
    walk_mut(prog_.root, [&](lnode& n) {
      auto it = stage_anns_.find(&n);
      if (it == stage_anns_.end()) return;
      const ann_set& s = it->second;
      n.anns.requires_.insert(n.anns.requires_.end(), s.requires_.begin(), s.requires_.end());
      n.anns.ensures.insert(n.anns.ensures.end(), s.ensures.begin(), s.ensures.end());
      n.anns.context.insert(n.anns.context.end(), s.context.begin(), s.context.end());
      n.anns.invariants.insert(n.anns.invariants.end(), s.invariants.begin(), s.invariants.end());
    });
  }

private:
  lowered_program& prog_;
  const pipeline& p_;
  std::map<std::string, alloc_info> allocs_;
  std::map<std::string, std::string> pname_;
  std::set<std::string> reserved_;
  std::map<const lnode*, summary> sum_;
  std::map<const lnode*, ann_set> stage_anns_;

  const summary& summarize(const lnode& n) {
    summary s;
    if (n.kind == node_kind::store) {
      auto scan = [&](const expr& e) {
        if (!e.defined()) return;
        visit(e, [&](const expr& x) {
          if (x->kind == expr_kind::load) s.reads.insert(x->name);
          return true;
        });
      };
      scan(n.stmt.flat_value);
      scan(n.stmt.flat_cond);
    }
    if (n.kind == node_kind::produce) s.produces.insert(n.func);
    for (const lnode& c : n.body) {
      const summary& cs = summarize(c);
      s.reads.insert(cs.reads.begin(), cs.reads.end());
      s.produces.insert(cs.produces.begin(), cs.produces.end());
    }
    return sum_[&n] = std::move(s);
  }

  // Names ------------------------------------------------------------------

  std::string fresh(const std::string& base, const std::set<std::string>& used) const {
    if (!used.count(base) && !reserved_.count(base)) return base;
    for (int k = 1;; ++k) {
      std::string n = base + std::to_string(k);
      if (!used.count(n) && !reserved_.count(n)) return n;
    }
  }

  static std::set<std::string> scope_names(const std::vector<lnode*>& path, const lnode* self) {
    std::set<std::string> s;
    for (const lnode* n : path) {
      if (n->kind == node_kind::loop) s.insert(n->var);
    }
    if (self && self->kind == node_kind::loop) s.insert(self->var);
    return s;
  }

  // Quantifies `e` over loop var v in [lo, hi), renaming v to a fresh vf.
  expr quantify(const expr& e, const std::string& v, const expr& lo, const expr& hi) const {
    if (!mentions_var(e, v)) return e;
    std::set<std::string> used;
    names_in(e, used);
    names_in(lo, used);
    names_in(hi, used);
    std::string f = fresh(v + "f", used);
    expr body = substitute(e, v, make_var(f));
    bool star = has_perm(e);
    std::vector<quant_var> qv{{f, lo, hi}};
    if (body->kind == expr_kind::forall && body->star == star) {
      for (const quant_var& q : body->qvars) qv.push_back(q);
      body = body->args[0];
    }
    return make_forall(qv, body, star);
  }

  expr quantify_or(const expr& e, const std::string& v, const expr& lo, const expr& hi, const expr& cond) const {
    if (mentions_var(e, v)) return quantify(e, v, lo, hi);
    return implies(cond, e);
  }

  // Flattening ---------------------------------------------------------------

  expr inline_funcs(const expr& e) const {
    return mutate(e, [&](const expr& x) -> expr {
      if (x->kind != expr_kind::func_call) return expr();
      if (prog_.sp.of(x->name).where != placement::inlined) return expr();
      const func& g = *p_.find_func(x->name);
      std::map<std::string, expr> sub;
      for (size_t i = 0; i < g.dims.size(); ++i) sub[g.dims[i].name] = inline_funcs(x->args[i]);
      return inline_funcs(substitute(g.stages[0].rhs, sub));
    });
  }

  // Func reads become loads of their allocation, input reads calls of the
  // abstract input functions.
  expr flat(const expr& e, const std::map<std::string, expr>& defs, bool resolve = true) const {
    expr r = resolve ? resolve_bound_refs(e, p_) : e;
    r = substitute(inline_funcs(r), defs);
    return mutate(r, [&](const expr& x) -> expr {
      if (x->kind != expr_kind::func_call && x->kind != expr_kind::buf_call) return expr();
      std::vector<expr> args;
      for (const expr& a : x->args) args.push_back(flat(a, {}, resolve));
      auto it = allocs_.find(x->name);
      if (it == allocs_.end()) throw error("InternalError", "'" + x->name + "' has no allocation");
      expr idx = it->second.index_of(args);
      if (x->kind == expr_kind::buf_call) return make_call(pname_.at(x->name), {idx});
      return make_load(x->name, idx);
    });
  }

  // Regions ------------------------------------------------------------------

  func_region domain_of(const std::vector<dim>& dims) const {
    func_region r;
    for (const dim& d : dims) {
      r.min.push_back(make_const(d.range.min));
      r.extent.push_back(d.range.extent);
    }
    return r;
  }

  func_region computed_region(const func& f) const {
    auto it = prog_.regions.find(f.name);
    return it == prog_.regions.end() ? domain_of(f.dims) : it->second;
  }

  static func_region alloc_region(const alloc_info& a) { return {a.base, a.extent}; }

  static std::map<std::string, const_range> ranges(const std::vector<lnode*>& path) {
    std::map<std::string, const_range> m;
    for (const lnode* n : path) {
      if (n->kind != node_kind::loop) continue;
      auto r = range_of(n->min, m);
      if (!r) continue;
      m[n->var] = {r->lo, r->hi + n->extent - 1};
    }
    return m;
  }

  // Conditions keeping quantified points of `f` inside its domain where the
  // region may reach past it.
  std::vector<expr> domain_guards(const func& f, const func_region& reg, const std::vector<expr>& point,
                                  const std::vector<lnode*>& path) const {
    auto m = ranges(path);
    std::vector<expr> out;
    for (size_t i = 0; i < f.dims.size(); ++i) {
      const interval& dom = f.dims[i].range;
      auto lo = range_of(reg.min[i], m);
      if (lo && lo->lo >= dom.min && lo->hi + reg.extent[i] <= dom.max()) continue;
      out.push_back(make_const(dom.min) <= point[i] && point[i] < make_const(dom.max()));
    }
    return out;
  }

  struct quant {
    std::vector<quant_var> vars;
    std::vector<expr> point;
  };

  quant over(const std::vector<std::string>& dims, const func_region& reg, const std::set<std::string>& scope,
             const std::vector<bool>& which = {}) const {
    quant q;
    std::set<std::string> used = scope;
    for (size_t i = 0; i < dims.size(); ++i) {
      if (!which.empty() && !which[i]) {
        q.point.push_back(expr());
        continue;
      }
      std::string base = dims[i];
      for (char& c : base) {
        if (c == '.') c = '_';
      }
      std::string n = fresh(base, used);
      used.insert(n);
      q.vars.push_back({n, reg.min[i], canon(reg.min[i] + make_const(reg.extent[i]))});
      q.point.push_back(make_var(n));
    }
    return q;
  }

  static expr canon(const expr& e) {
    if (auto a = to_affine(e)) return from_affine(*a);
    return simplify(e);
  }

  expr perm_region(const std::string& name, const std::vector<std::string>& dims, const func_region& reg,
                   std::vector<int64_t> dens, const std::set<std::string>& scope) const {
    quant q = over(dims, reg, scope);
    expr loc = make_load(name, allocs_.at(name).index_of(q.point));
    return make_forall(q.vars, make_perm(loc, 1, std::move(dens)), true);
  }

  expr input_equality(const buffer& b, const std::set<std::string>& scope) const {
    const alloc_info& a = allocs_.at(b.name);
    quant q = over(b.dim_names(), {a.base, a.extent}, scope);
    expr idx = a.index_of(q.point);
    return make_forall(q.vars, eq(make_load(b.name, idx), make_call(pname_.at(b.name), {idx})));
  }

  // Post-state ------------------------------------------------------------

  // Points a stage writes, as equalities over the func's dim names. Empty
  // means every point; nullopt means it depends on reduction variables.
  std::optional<std::vector<expr>> membership(const func& f, size_t si) const {
    const stage& s = f.stages[si];
    std::vector<expr> out;
    for (size_t i = 0; i < f.dims.size(); ++i) {
      expr a = resolve_bound_refs(s.lhs[i], p_);
      if (is_var(a, f.dims[i].name)) continue;
      if (!free_vars(a).empty()) return std::nullopt;
      out.push_back(eq(make_var(f.dims[i].name), a));
    }
    return out;
  }

  // What is known about f(dims) once stages 0..upto ran.
  expr post_state(const func& f, size_t upto) const {
    std::vector<expr> parts;
    for (size_t s = 0; s <= upto && s < f.stages.size(); ++s) {
      std::vector<expr> es;
      for (const annotation& a : f.stages[s].anns) {
        if (a.kind == ann_kind::ensures || a.kind == ann_kind::context) es.push_back(a.body);
      }
      if (es.empty()) continue;
      auto m = membership(f, s);
      if (!m) continue;
      std::vector<expr> cond = *m;
      bool live = true;
      for (size_t t = s + 1; t <= upto; ++t) {
        auto mt = membership(f, t);
        if (!mt || mt->empty()) {
          live = false;
          break;
        }
        cond.push_back(!conjunction(*mt));
      }
      if (!live) continue;
      expr body = conjunction(es);
      parts.push_back(cond.empty() ? body : implies(conjunction(cond), body));
    }
    return parts.empty() ? expr() : conjunction(parts);
  }

  // Contract ----------------------------------------------------------------

  expr flat_result(const expr& e, const std::string& buf, const expr& value) const {
    return mutate(e, [&](const expr& x) -> expr {
      if (x->kind == expr_kind::result) return value;
      (void)buf;
      return expr();
    });
  }

  void contract() {
    ann_set& c = prog_.contract;
    std::set<std::string> none;
    for (const buffer& b : p_.inputs) {
      c.context.push_back(perm_region(b.name, b.dim_names(), alloc_region(allocs_.at(b.name)), {2}, none));
      c.context.push_back(input_equality(b, none));
    }
    for (const buffer& b : p_.inputs) {
      for (const annotation& a : b.anns) {
        const alloc_info& al = allocs_.at(b.name);
        quant q = over(b.dim_names(), {al.base, al.extent}, none);
        expr v = make_call(pname_.at(b.name), {al.index_of(q.point)});
        c.requires_.push_back(make_forall(q.vars, flat(flat_result(a.body, b.name, v), {})));
      }
    }
    const func& out = p_.output_func();
    c.context.push_back(perm_region(out.name, out.dim_names(), alloc_region(prog_.output), {1}, none));
    for (const annotation& a : p_.pre) c.requires_.push_back(flat(a.body, {}, false));
    std::vector<annotation> posts = p_.post;
    if (posts.empty()) {
      try {
        posts.push_back(autogen_pipeline_postcondition(p_));
      } catch (const error&) {
        // No intermediate annotation on the output: memory safety only.
      }
    }
    for (const annotation& a : posts) c.ensures.push_back(flat(a.body, {}, false));
  }

  // Per-loop families -------------------------------------------------------

  void visit_node(lnode& n, std::vector<lnode*>& path) {
    if (n.kind == node_kind::loop) loop_families(n, path);
    if (n.kind == node_kind::store) stage_families(n, path);
    path.push_back(&n);
    for (lnode& c : n.body) visit_node(c, path);
    path.pop_back();
  }

  void loop_families(lnode& l, const std::vector<lnode*>& path) {
    if (l.lkind == loop_kind::unrolled) return;
    bool serial = l.lkind == loop_kind::serial;
    ann_set& a = l.anns;
    auto add = [&](const expr& e) { (serial ? a.invariants : a.context).push_back(e); };
    expr v = make_var(l.var);
    expr end = canon(l.min + make_const(l.extent));
    add(serial ? (l.min <= v && v <= end) : (l.min <= v && v < end));

    const summary& s = sum_.at(&l);
    std::set<std::string> scope = scope_names(path, &l);
    auto parallel_below = [&](size_t from) {
      std::vector<int64_t> out;
      for (size_t j = from; j < path.size(); ++j) {
        if (path[j]->kind == node_kind::loop && path[j]->lkind == loop_kind::parallel) out.push_back(path[j]->extent);
      }
      if (!serial) out.push_back(l.extent);
      return out;
    };

    for (const buffer& b : p_.inputs) {
      if (!s.reads.count(b.name)) continue;
      std::vector<int64_t> dens{2};
      for (int64_t e : parallel_below(0)) dens.push_back(e);
      add(perm_region(b.name, b.dim_names(), alloc_region(allocs_.at(b.name)), dens, scope));
      add(input_equality(b, scope));
    }

    // Allocations whose producer runs inside this loop.
    for (size_t k = 0; k < path.size(); ++k) {
      const lnode* al = path[k];
      if (al->kind != node_kind::allocate || !s.produces.count(al->func)) continue;
      const lnode* q = serial ? nullptr : &l;
      if (!q) {
        for (size_t j = path.size(); j-- > k + 1;) {
          if (path[j]->kind == node_kind::loop && path[j]->lkind == loop_kind::parallel) {
            q = path[j];
            break;
          }
        }
      }
      const func& g = *p_.find_func(al->func);
      func_region reg = q ? footprint(prog_, g.name, q->var) : alloc_region(al->alloc);
      add(perm_region(g.name, g.dim_names(), reg, {1}, scope));
    }

    // Funcs consumed here.
    for (size_t k = 0; k < path.size(); ++k) {
      const lnode* cn = path[k];
      if (cn->kind != node_kind::consume || !s.reads.count(cn->func)) continue;
      const func& g = *p_.find_func(cn->func);
      size_t ka = 0;
      for (size_t j = 0; j < k; ++j) {
        if (path[j]->kind == node_kind::allocate && path[j]->func == g.name) ka = j;
      }
      std::vector<int64_t> dens{2};
      for (int64_t e : parallel_below(ka)) dens.push_back(e);
      add(perm_region(g.name, g.dim_names(), alloc_region(allocs_.at(g.name)), dens, scope));
      expr post = post_state(g, g.stages.size() - 1);
      if (!post.defined()) continue;
      func_region reg = computed_region(g);
      quant q = over(g.dim_names(), reg, scope);
      std::map<std::string, expr> sub;
      for (size_t i = 0; i < g.dims.size(); ++i) sub[g.dims[i].name] = q.point[i];
      expr body = flat(substitute(post, sub), {});
      std::vector<lnode*> at(path.begin(), path.begin() + static_cast<long>(k));
      std::vector<expr> dg = domain_guards(g, reg, q.point, at);
      add(make_forall(q.vars, dg.empty() ? body : implies(conjunction(dg), body)));
    }
  }

  // Stage annotations --------------------------------------------------------

  void stage_families(const lnode& st_node, const std::vector<lnode*>& path) {
    const store_stmt& st = st_node.stmt;
    const func& f = *p_.find_func(st.func);
    const stage& sg = f.stages[static_cast<size_t>(st.stage)];
    const std::map<std::string, expr>& defs = st.defs;
    expr g = st.guards.empty() ? expr() : conjunction(st.guards);
    func_region reg = computed_region(f);
    const alloc_info& al = allocs_.at(f.name);
    std::set<std::string> scope = scope_names(path, nullptr);
    size_t nd = f.dims.size();

    enum cls_t { pure, fixed, other };
    std::vector<cls_t> cls(nd);
    std::vector<expr> lhs;
    bool any_other = false;
    for (size_t i = 0; i < nd; ++i) {
      expr a = resolve_bound_refs(st.args[i], p_);
      if (is_var(a, f.dims[i].name)) {
        cls[i] = pure;
      } else if (free_vars(a).empty()) {
        cls[i] = fixed;
      } else {
        cls[i] = other;
        any_other = true;
      }
      lhs.push_back(canon(substitute(a, defs)));
    }

    stage_state ss;
    if (!any_other) {
      ss.context.push_back(guarded(g, make_perm(make_load(f.name, al.index_of(lhs)), 1, {1})));
    } else {
      // The written point moves with the reduction: claim the whole slice.
      std::vector<bool> which(nd);
      for (size_t i = 0; i < nd; ++i) which[i] = cls[i] == other;
      quant q = over(f.dim_names(), reg, scope, which);
      std::vector<expr> pt = lhs;
      for (size_t i = 0; i < nd; ++i) {
        if (which[i]) pt[i] = q.point[i];
      }
      ss.context.push_back(guarded(g, make_forall(q.vars, make_perm(make_load(f.name, al.index_of(pt)), 1, {1}), true)));
    }

    if (st.stage > 0 && !any_other) {
      std::vector<bool> which(nd);
      bool any_fixed = false;
      for (size_t i = 0; i < nd; ++i) {
        which[i] = cls[i] == fixed;
        any_fixed = any_fixed || which[i];
      }
      quant q = over(f.dim_names(), reg, scope, which);
      std::vector<expr> pt = lhs;
      std::vector<expr> same;
      for (size_t i = 0; i < nd; ++i) {
        if (!which[i]) continue;
        pt[i] = q.point[i];
        same.push_back(eq(q.point[i], lhs[i]));
      }
      if (any_fixed) {
        expr body = implies(!conjunction(same), make_perm(make_load(f.name, al.index_of(pt)), 1, {2}));
        ss.context.push_back(guarded(g, make_forall(q.vars, body, true)));
      }
      if (!sg.rd) {
        expr pre = post_state(f, static_cast<size_t>(st.stage) - 1);
        if (pre.defined()) {
          std::map<std::string, expr> sub;
          for (size_t i = 0; i < nd; ++i) sub[f.dims[i].name] = pt[i];
          expr body = flat(substitute(pre, sub), {});
          if (any_fixed) {
            std::vector<expr> dg;
            std::vector<expr> all = domain_guards(f, reg, pt, path);
            for (const expr& d : all) {
              bool on_q = false;
              for (const quant_var& v : q.vars) on_q = on_q || mentions_var(d, v.name);
              if (on_q) dg.push_back(d);
            }
            body = make_forall(q.vars, dg.empty() ? body : implies(conjunction(dg), body));
          }
          ss.requires_.push_back(guarded(g, body));
        }
      }
    }

    if (sg.rd) {
      ss.reduction = true;
      int first = -1;
      for (size_t k = path.size(); k-- > 0;) {
        const lnode* n = path[k];
        if (n->kind == node_kind::produce && n->func == f.name) break;
        if (n->kind == node_kind::loop && !n->rvars.empty()) {
          first = *std::min_element(n->rvars.begin(), n->rvars.end());
          break;
        }
      }
      if (first >= 0) {
        if (const annotation* a = sg.invariant_for(sg.rd->vars[static_cast<size_t>(first)].name)) {
          ss.inv = guarded(g, flat(a->body, defs));
        }
      }
    } else {
      for (const annotation& a : sg.anns) {
        expr e = guarded(g, flat(a.body, defs));
        switch (a.kind) {
        case ann_kind::ensures: ss.ensures.push_back(e); break;
        case ann_kind::requires_: ss.requires_.push_back(e); break;
        case ann_kind::context: ss.context.push_back(e); break;
        case ann_kind::invariant: break;
        }
      }
    }

    for (size_t k = path.size(); k-- > 0;) {
      lnode* l = path[k];
      if (l->kind == node_kind::produce && l->func == f.name) break;
      if (l->kind != node_kind::loop || l->func != f.name || l->stage != st.stage) continue;
      pass_loop(*l, ss, path, k);
    }
  }

  void pass_loop(const lnode& l, stage_state& ss, const std::vector<lnode*>& path, size_t k) {
    ann_set& out = stage_anns_[&l];
    const std::string& v = l.var;
    expr vv = make_var(v);
    expr lo = l.min;
    expr hi = canon(l.min + make_const(l.extent));
    bool serial = l.lkind == loop_kind::serial;
    bool parallel = l.lkind == loop_kind::parallel;

    if (parallel) {
      // Every iteration reads the same locations: split the fraction.
      for (expr& c : ss.context) {
        c = mutate(c, [&](const expr& x) {
          if (x->kind != expr_kind::perm || !(perm_fraction(x) < rational(1)) || mentions_var(x, v)) return expr();
          std::vector<int64_t> dens = x->dens;
          dens.push_back(l.extent);
          return make_perm(x->args[0], x->value, dens);
        });
      }
    }
    for (const expr& c : ss.context) {
      if (serial) out.invariants.push_back(quantify(c, v, lo, hi));
      if (parallel) out.context.push_back(c);
    }
    for (const expr& r : ss.requires_) {
      if (serial) out.invariants.push_back(quantify_or(r, v, vv, hi, vv < hi));
      if (parallel) out.requires_.push_back(r);
    }
    for (const expr& e : ss.ensures) {
      if (serial) out.invariants.push_back(quantify_or(e, v, lo, vv, lo < vv));
      if (parallel) out.ensures.push_back(e);
    }
    for (auto* list : {&ss.context, &ss.requires_, &ss.ensures}) {
      for (expr& e : *list) e = quantify(e, v, lo, hi);
    }

    if (!ss.reduction || !ss.inv.defined()) return;
    if (!l.rvars.empty()) {
      if (!ss.prev.empty()) ss.inv = simplify(substitute(ss.inv, ss.prev, ss.prev_min));
      if (serial) out.invariants.push_back(ss.inv);
      if (parallel) {
        out.requires_.push_back(ss.inv);
        out.ensures.push_back(simplify(substitute(ss.inv, v, canon(vv + make_const(1)))));
      }
      ss.prev = v;
      ss.prev_min = lo;
      ss.prev_end = hi;
      return;
    }
    expr pre, post;
    if (ss.prev.empty()) {
      std::string next;
      for (size_t j = k; j-- > 0;) {
        const lnode* n = path[j];
        if (n->kind == node_kind::produce) break;
        if (n->kind == node_kind::loop && n->func == l.func && n->stage == l.stage && !n->rvars.empty()) {
          next = n->var;
          break;
        }
      }
      pre = ss.inv;
      post = next.empty() ? ss.inv : simplify(substitute(ss.inv, next, canon(make_var(next) + make_const(1))));
    } else {
      pre = simplify(substitute(ss.inv, ss.prev, ss.prev_min));
      post = simplify(substitute(ss.inv, ss.prev, ss.prev_end));
    }
    if (serial) {
      out.invariants.push_back(quantify_or(pre, v, vv, hi, vv < hi));
      out.invariants.push_back(quantify_or(post, v, lo, vv, lo < vv));
    }
    if (parallel) {
      out.requires_.push_back(pre);
      out.ensures.push_back(post);
    }
    ss.inv = quantify(ss.inv, v, lo, hi);
  }
};

}  // namespace

void annotate(lowered_program& prog) { annotator(prog).run(); }

}  // namespace minisched

#include "minisched/encoder.h"

#include <functional>
#include <set>
#include <sstream>

#include "minisched/error.h"

namespace minisched {

const pvl_function* encoded_program::find(const std::string& name) const {
  for (const pvl_function& f : decls) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

namespace {

std::string flat(const std::string& name) {
  std::string out;
  for (char c : name) {
    if (c != '.') out.push_back(c);
  }
  return out;
}

bool logical_top(const expr& e) {
  return e->kind == expr_kind::binary &&
         (e->bop == binop::and_ || e->bop == binop::or_ || e->bop == binop::implies);
}

std::vector<expr> dim_vars(const func& f) {
  std::vector<expr> out;
  for (const dim& d : f.dims) out.push_back(make_var(d.name));
  return out;
}

bool is_self_point(const expr& call, const func& f, const stage& s) {
  if (call->kind != expr_kind::func_call || call->name != f.name) return false;
  bool canonical = true;
  for (size_t i = 0; i < call->args.size(); ++i) canonical = canonical && is_var(call->args[i], f.dims[i].name);
  if (canonical) return true;
  for (size_t i = 0; i < call->args.size(); ++i) {
    if (!equal(call->args[i], s.lhs[i])) return false;
  }
  return true;
}

// Terms selecting the points an update writes: x_k == lhs_k where the lhs is not
// the pure variable itself.
std::vector<expr> lhs_terms(const func& f, const stage& s) {
  std::vector<expr> out;
  for (size_t i = 0; i < f.dims.size(); ++i) {
    if (!is_var(s.lhs[i], f.dims[i].name)) out.push_back(eq(make_var(f.dims[i].name), s.lhs[i]));
  }
  return out;
}

// A stage annotation as a contract clause of the stage's function.
pvl_clause stage_clause(const func& f, const stage& s, const expr& body, const std::map<std::string, expr>& rename) {
  bool mentions_self = mentions_call(body, f.name);
  expr e = mutate(body, [&](const expr& x) -> expr {
    if (is_self_point(x, f, s)) return make_result();
    return expr();
  });
  e = substitute(e, rename);
  pvl_clause c{e, logical_top(body), {}};
  std::vector<expr> terms = lhs_terms(f, s);
  if (mentions_self && !terms.empty()) {
    c.e = implies(conjunction(terms), e);
    c.wrap = true;
  }
  return c;
}

void add_contract(pvl_function& fn, const func& f, const stage& s, const std::map<std::string, expr>& rename) {
  for (const annotation& a : s.anns) {
    pvl_clause c = stage_clause(f, s, a.body, rename);
    c.span = a.span;
    if (a.kind == ann_kind::requires_ || a.kind == ann_kind::context) fn.requires_.push_back(c);
    if (a.kind == ann_kind::ensures || a.kind == ann_kind::context) fn.ensures.push_back(c);
  }
}

// Replaces calls to f by calls to `target` with extra trailing arguments.
expr redirect_self(const expr& e, const std::string& fname, const std::string& target, const std::vector<expr>& extra) {
  std::function<expr(const expr&)> go = [&](const expr& x) -> expr {
    return mutate(x, [&](const expr& y) -> expr {
      if (y->kind == expr_kind::func_call && y->name == fname) {
        std::vector<expr> args;
        for (const expr& a : y->args) args.push_back(go(a));
        for (const expr& a : extra) args.push_back(a);
        return make_call(target, args);
      }
      return expr();
    });
  };
  return go(e);
}

std::vector<std::string> params_of(const func& f) { return f.dim_names(); }

std::vector<std::pair<int64_t, int64_t>> dims_domain(const func& f) {
  std::vector<std::pair<int64_t, int64_t>> out;
  for (const dim& d : f.dims) out.emplace_back(d.range.min, d.range.max() - 1);
  return out;
}

}  // namespace

std::string stage_function_name(const func& f, size_t stage_index) {
  if (stage_index + 1 == f.stages.size()) return f.name;
  return f.name + std::to_string(stage_index);
}

std::vector<pvl_function> encode_buffer(const buffer& b, int line_group) {
  std::vector<pvl_function> out;
  pvl_function fn;
  fn.name = b.name;
  fn.params = b.dim_names();
  for (const annotation& a : b.anns) fn.ensures.push_back({a.body, logical_top(a.body), a.span});
  out.push_back(fn);
  for (const dim& d : b.dims) {
    for (bool is_max : {false, true}) {
      pvl_function bf;
      bf.name = b.name + "_" + d.name + (is_max ? "_max" : "_min");
      if (d.declared) bf.body = make_const(is_max ? d.range.max() : d.range.min);
      bf.line_group = line_group;
      out.push_back(bf);
    }
  }
  return out;
}

std::vector<pvl_function> encode_stage(const pipeline& p, const func& f, size_t si) {
  (void)p;
  const stage& s = f.stages[si];
  std::string name = stage_function_name(f, si);
  std::vector<pvl_function> out;
  if (s.kind == stage_kind::pure) {
    pvl_function fn;
    fn.name = name;
    fn.params = params_of(f);
    fn.body = s.rhs;
    fn.domain = dims_domain(f);
    add_contract(fn, f, s, {});
    out.push_back(fn);
    return out;
  }
  std::string prev = stage_function_name(f, si - 1);
  std::vector<expr> xs = dim_vars(f);
  std::vector<expr> terms = lhs_terms(f, s);
  if (s.kind == stage_kind::update) {
    pvl_function fn;
    fn.name = name;
    fn.params = params_of(f);
    expr rhs = redirect_self(s.rhs, f.name, prev, {});
    if (s.guard.defined()) terms.push_back(redirect_self(s.guard, f.name, prev, {}));
    fn.body = terms.empty() ? rhs : make_select(conjunction(terms), rhs, make_call(prev, xs));
    fn.domain = dims_domain(f);
    add_contract(fn, f, s, {});
    out.push_back(fn);
    return out;
  }

  // Reduction: one recursive function per reduction variable, innermost first.
  const rdom& rd = *s.rd;
  size_t k = rd.vars.size();
  std::vector<std::string> fr;
  std::map<std::string, expr> rename;
  for (const rdom_var& v : rd.vars) {
    fr.push_back(flat(v.name));
    rename[v.name] = make_var(flat(v.name));
  }
  auto rec_name = [&](size_t j) {
    if (k == 1) return f.name + std::to_string(si) + fr[0];
    return f.name + std::to_string(si) + "_" + fr[j];
  };
  auto mn = [&](size_t j) { return rd.vars[j].range.min; };
  auto mx = [&](size_t j) { return rd.vars[j].range.max(); };
  auto rv = [&](size_t j) { return make_var(fr[j]); };
  // R_1 at the state where vars 0..l-1 are exhausted in the iteration before
  // r_l's current value: r_0 = max, r_1..r_{l-1} = last, r_l - 1, rest as is.
  auto carry = [&](size_t l) {
    std::vector<expr> args = xs;
    args.push_back(make_const(mx(0)));
    for (size_t j = 1; j < l; ++j) args.push_back(make_const(mx(j) - 1));
    args.push_back(rv(l) - 1);
    for (size_t j = l + 1; j < k; ++j) args.push_back(rv(j));
    return make_call(rec_name(0), args);
  };
  std::function<expr(size_t)> cascade = [&](size_t l) -> expr {
    if (l >= k) return make_call(prev, xs);
    return make_select(eq(rv(l), make_const(mn(l))), cascade(l + 1), carry(l));
  };
  auto range_requires = [&](size_t j) {
    std::vector<expr> rq{make_const(mn(j)) <= rv(j), rv(j) <= make_const(mx(j))};
    for (size_t i = j + 1; i < k; ++i) {
      rq.push_back(make_const(mn(i)) <= rv(i));
      rq.push_back(rv(i) < make_const(mx(i)));
    }
    return pvl_clause{conjunction(rq), false, {}};
  };
  auto rec_domain = [&](size_t j) {
    std::vector<std::pair<int64_t, int64_t>> d = dims_domain(f);
    d.emplace_back(mn(j), mx(j));
    for (size_t i = j + 1; i < k; ++i) d.emplace_back(mn(i), mx(i) - 1);
    return d;
  };
  auto invariant_clause = [&](size_t j) {
    const annotation* inv = s.invariant_for(rd.vars[j].name);
    if (!inv) {
      throw error("MissingReductionInvariant",
                  "reduction variable '" + rd.vars[j].name + "' of '" + f.name + "' has no invariant", s.span);
    }
    std::map<std::string, expr> m = rename;
    for (size_t i = 0; i < j; ++i) m[rd.vars[i].name] = make_const(mn(i));
    pvl_clause c = stage_clause(f, s, inv->body, m);
    c.span = inv->span;
    return c;
  };
  auto measure = [&](size_t j) {
    std::vector<std::string> d;
    for (size_t i = k; i-- > j;) d.push_back(fr[i]);
    return d;
  };

  // Innermost: base cascade or one step.
  {
    pvl_function fn;
    fn.name = rec_name(0);
    fn.params = params_of(f);
    for (size_t j = 0; j < k; ++j) fn.params.push_back(fr[j]);
    std::map<std::string, expr> step_sub = rename;
    step_sub[rd.vars[0].name] = rv(0) - 1;
    std::vector<expr> self_extra{rv(0) - 1};
    for (size_t j = 1; j < k; ++j) self_extra.push_back(rv(j));
    expr rhs = redirect_self(substitute(s.rhs, step_sub), f.name, fn.name, self_extra);
    std::vector<expr> cond = terms;
    if (s.guard.defined()) cond.push_back(redirect_self(substitute(s.guard, step_sub), f.name, fn.name, self_extra));
    std::vector<expr> keep_args = xs;
    for (const expr& a : self_extra) keep_args.push_back(a);
    expr step = cond.empty() ? rhs : make_select(conjunction(cond), rhs, make_call(fn.name, keep_args));
    fn.body = make_select(eq(rv(0), make_const(mn(0))), cascade(1), step);
    fn.break_body = true;
    fn.recursive = true;
    fn.requires_.push_back(range_requires(0));
    fn.domain = rec_domain(0);
    fn.ensures.push_back(invariant_clause(0));
    fn.decreases = measure(0);
    out.push_back(fn);
  }
  for (size_t j = 1; j < k; ++j) {
    pvl_function fn;
    fn.name = rec_name(j);
    fn.params = params_of(f);
    for (size_t i = j; i < k; ++i) fn.params.push_back(fr[i]);
    fn.body = make_select(eq(rv(j), make_const(mn(j))), cascade(j + 1), carry(j));
    fn.break_body = true;
    fn.requires_.push_back(range_requires(j));
    fn.domain = rec_domain(j);
    fn.ensures.push_back(invariant_clause(j));
    fn.decreases = measure(j);
    out.push_back(fn);
  }
  bool empty = false;
  for (const rdom_var& v : rd.vars) empty = empty || v.range.extent == 0;
  pvl_function entry;
  entry.name = name;
  entry.params = params_of(f);
  std::vector<expr> args = xs;
  args.push_back(make_const(empty ? mn(k - 1) : mx(k - 1)));
  entry.body = make_call(rec_name(k - 1), args);
  entry.domain = dims_domain(f);
  for (const annotation& a : s.anns) {
    pvl_clause c = stage_clause(f, s, a.body, {});
    c.span = a.span;
    if (a.kind == ann_kind::requires_ || a.kind == ann_kind::context) entry.requires_.push_back(c);
    if (a.kind == ann_kind::ensures || a.kind == ann_kind::context) entry.ensures.push_back(c);
  }
  out.push_back(entry);
  return out;
}

annotation autogen_pipeline_postcondition(const pipeline& p) {
  const func& f = p.output_func();
  for (size_t si = f.stages.size(); si-- > 0;) {
    const stage& s = f.stages[si];
    std::vector<expr> parts;
    for (const annotation& a : s.anns) {
      if (a.kind != ann_kind::ensures && a.kind != ann_kind::context) continue;
      std::vector<expr> terms = lhs_terms(f, s);
      bool self = mentions_call(a.body, f.name);
      // References at the written point become the canonical point.
      expr body = mutate(a.body, [&](const expr& x) -> expr {
        if (is_self_point(x, f, s)) return func_call(f.name, dim_vars(f));
        return expr();
      });
      parts.push_back(self && !terms.empty() ? implies(conjunction(terms), body) : body);
    }
    if (parts.empty()) continue;
    std::vector<quant_var> qv;
    for (const dim& d : f.dims) qv.push_back({d.name, make_const(d.range.min), make_const(d.range.max())});
    annotation out;
    out.kind = ann_kind::ensures;
    out.body = make_forall(qv, conjunction(parts));
    out.span = s.span;
    return out;
  }
  throw error("NoIntermediateAnnotation", "'" + f.name + "' has no intermediate ensures to lift", f.span);
}

pvl_lemma encode_pipeline_lemma(const pipeline& p) {
  pvl_lemma l;
  for (const annotation& a : p.pre) l.requires_.push_back({a.body, logical_top(a.body), a.span});
  for (const annotation& a : p.post) l.ensures.push_back({a.body, logical_top(a.body), a.span});
  if (p.post.empty()) {
    try {
      annotation a = autogen_pipeline_postcondition(p);
      l.ensures.push_back({a.body, logical_top(a.body), a.span});
    } catch (const error&) {
      // Nothing to lift: the lemma stays vacuous.
    }
  }
  return l;
}

encoded_program encode(const pipeline& p) {
  encoded_program prog;
  int group = 1;
  for (const buffer& b : p.inputs) {
    for (pvl_function& fn : encode_buffer(b, group)) prog.decls.push_back(fn);
    ++group;
  }
  // Bound functions of funcs, when an annotation mentions them.
  std::set<std::string> referenced;
  auto scan = [&](const expr& e) {
    visit(e, [&](const expr& x) {
      if (x->kind == expr_kind::bound_ref && p.find_func(x->name)) referenced.insert(x->name);
      return true;
    });
  };
  for (const annotation& a : p.pre) scan(a.body);
  for (const annotation& a : p.post) scan(a.body);
  for (const func& f : p.funcs) {
    for (const stage& s : f.stages) {
      for (const annotation& a : s.anns) scan(a.body);
      scan(s.rhs);
    }
  }
  for (const func& f : p.funcs) {
    if (!referenced.count(f.name)) continue;
    for (const dim& d : f.dims) {
      for (bool is_max : {false, true}) {
        pvl_function bf;
        bf.name = f.name + "_" + d.name + (is_max ? "_max" : "_min");
        bf.body = make_const(is_max ? d.range.max() : d.range.min);
        bf.line_group = group;
        prog.decls.push_back(bf);
      }
      ++group;
    }
  }
  for (const func& f : p.funcs) {
    for (size_t si = 0; si < f.stages.size(); ++si) {
      for (pvl_function& fn : encode_stage(p, f, si)) prog.decls.push_back(fn);
    }
  }
  prog.lemma = encode_pipeline_lemma(p);
  return prog;
}

namespace {

std::string clause_text(const pvl_clause& c) {
  std::string s = print(c.e, dialect::pvl);
  return c.wrap ? "(" + s + ")" : s;
}

bool prec_below_select(const expr& e) {
  return e->kind == expr_kind::binary && e->bop == binop::implies;
}

std::string body_text(const pvl_function& fn) {
  const expr& b = fn.body;
  if (!fn.break_body || b->kind != expr_kind::select) return print(b, dialect::pvl);
  auto part = [](const expr& e, bool paren) {
    std::string s = print(e, dialect::pvl);
    return paren ? "(" + s + ")" : s;
  };
  const expr& c = b->args[0];
  return part(c, c->kind == expr_kind::select || prec_below_select(c)) + " ? " +
         part(b->args[1], b->args[1]->kind == expr_kind::select || prec_below_select(b->args[1])) + "\n  : " +
         part(b->args[2], prec_below_select(b->args[2]));
}

std::string signature(const pvl_function& fn) {
  std::string s = "pure int " + fn.name + "(";
  for (size_t i = 0; i < fn.params.size(); ++i) s += (i ? ", int " : "int ") + fn.params[i];
  s += ")";
  if (fn.body.defined()) s += " = " + body_text(fn);
  return s + ";";
}

}  // namespace

std::string print_pvl(const encoded_program& prog) {
  std::ostringstream os;
  size_t i = 0;
  while (i < prog.decls.size()) {
    const pvl_function& fn = prog.decls[i];
    if (fn.line_group != 0) {
      // A line of bound functions sharing one contract.
      os << "  decreases;\n";
      size_t j = i;
      while (j < prog.decls.size() && prog.decls[j].line_group == fn.line_group) {
        os << (j > i ? " " : "") << signature(prog.decls[j]);
        ++j;
      }
      os << "\n";
      i = j;
      continue;
    }
    bool abstract = !fn.body.defined();
    if (!abstract && i > 0) os << "\n";
    for (const pvl_clause& c : fn.requires_) os << " requires " << clause_text(c) << ";\n";
    for (const pvl_clause& c : fn.ensures) os << " ensures " << clause_text(c) << ";\n";
    if (abstract) {
      os << "  decreases;\n";
    } else {
      os << " decreases";
      for (size_t k = 0; k < fn.decreases.size(); ++k) os << (k ? ", " : " ") << fn.decreases[k];
      os << ";\n";
    }
    os << signature(fn) << "\n";
    ++i;
  }
  os << "\n";
  for (const pvl_clause& c : prog.lemma.requires_) os << " requires " << clause_text(c) << ";\n";
  for (const pvl_clause& c : prog.lemma.ensures) os << " ensures " << clause_text(c) << ";\n";
  os << "void pipeline() { }\n";
  return os.str();
}

std::vector<std::string> check_decreases(const encoded_program& prog) {
  std::vector<std::string> bad;
  std::map<std::string, std::set<std::string>> graph;
  for (const pvl_function& fn : prog.decls) {
    if (!fn.body.defined()) continue;
    bool ok = true;
    visit(fn.body, [&](const expr& x) {
      if (x->kind != expr_kind::call || !prog.find(x->name)) return true;
      if (x->name != fn.name) {
        graph[fn.name].insert(x->name);
        return true;
      }
      if (fn.decreases.empty()) {
        ok = false;
        return true;
      }
      bool decreased = false;
      for (const std::string& m : fn.decreases) {
        auto it = std::find(fn.params.begin(), fn.params.end(), m);
        if (it == fn.params.end()) {
          ok = false;
          break;
        }
        const expr& a = x->args[it - fn.params.begin()];
        if (is_var(a, m)) continue;
        int64_t c = 0;
        if (a->kind == expr_kind::binary && a->bop == binop::sub && is_var(a->args[0], m) && is_const(a->args[1], &c) &&
            c >= 1) {
          decreased = true;
        }
        break;
      }
      ok = ok && decreased;
      return true;
    });
    if (!ok) bad.push_back(fn.name);
  }
  // No cycles through more than one function.
  std::map<std::string, int> state;
  std::function<void(const std::string&)> dfs = [&](const std::string& n) {
    state[n] = 1;
    for (const std::string& m : graph[n]) {
      if (state[m] == 1) bad.push_back(m);
      else if (state[m] == 0) dfs(m);
    }
    state[n] = 2;
  };
  for (const pvl_function& fn : prog.decls) {
    if (state[fn.name] == 0) dfs(fn.name);
  }
  return bad;
}

}  // namespace minisched

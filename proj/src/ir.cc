#include "minisched/ir.h"

#include <algorithm>
#include <functional>
#include <set>
#include <sstream>

namespace minisched {

std::string source_span::str() const {
  std::ostringstream os;
  if (!file.empty()) os << file << ":";
  os << line << ":" << column;
  return os.str();
}

const char* ann_kind_name(ann_kind k) {
  switch (k) {
  case ann_kind::requires_: return "requires";
  case ann_kind::ensures: return "ensures";
  case ann_kind::context: return "context";
  case ann_kind::invariant: return "invariant";
  }
  return "?";
}

bool stage::operator==(const stage& o) const {
  if (kind != o.kind || lhs.size() != o.lhs.size()) return false;
  for (size_t i = 0; i < lhs.size(); ++i) {
    if (!equal(lhs[i], o.lhs[i])) return false;
  }
  if (!equal(rhs, o.rhs)) return false;
  if (guard.defined() != o.guard.defined() || (guard.defined() && !equal(guard, o.guard))) return false;
  return rd == o.rd && anns == o.anns;
}

std::vector<const annotation*> stage::of_kind(ann_kind k) const {
  std::vector<const annotation*> out;
  for (const annotation& a : anns) {
    if (a.kind == k) out.push_back(&a);
  }
  return out;
}

const annotation* stage::invariant_for(const std::string& rvar) const {
  for (const annotation& a : anns) {
    if (a.kind == ann_kind::invariant && a.rvar == rvar) return &a;
  }
  return nullptr;
}

std::vector<std::string> func::dim_names() const {
  std::vector<std::string> out;
  for (const dim& d : dims) out.push_back(d.name);
  return out;
}

std::vector<std::string> buffer::dim_names() const {
  std::vector<std::string> out;
  for (const dim& d : dims) out.push_back(d.name);
  return out;
}

const func* pipeline::find_func(const std::string& n) const {
  for (const func& f : funcs) {
    if (f.name == n) return &f;
  }
  return nullptr;
}

func* pipeline::find_func(const std::string& n) {
  for (func& f : funcs) {
    if (f.name == n) return &f;
  }
  return nullptr;
}

const buffer* pipeline::find_buffer(const std::string& n) const {
  for (const buffer& b : inputs) {
    if (b.name == n) return &b;
  }
  return nullptr;
}

int pipeline::func_index(const std::string& n) const {
  for (size_t i = 0; i < funcs.size(); ++i) {
    if (funcs[i].name == n) return static_cast<int>(i);
  }
  return -1;
}

const func& pipeline::output_func() const { return *find_func(output); }

std::optional<int64_t> pipeline::param_value(const std::string& n) const {
  for (const param& q : params) {
    if (q.name == n) return q.value;
  }
  return std::nullopt;
}

std::optional<int64_t> pipeline::bound_value(const std::string& entity, const std::string& d, bool is_max) const {
  const std::vector<dim>* dims = nullptr;
  if (const func* f = find_func(entity)) dims = &f->dims;
  if (const buffer* b = find_buffer(entity)) dims = &b->dims;
  if (!dims) return std::nullopt;
  for (const dim& x : *dims) {
    if (x.name == d) return is_max ? x.range.max() : x.range.min;
  }
  return std::nullopt;
}

int pipeline::user_annotation_lines() const {
  int n = 0;
  for (const annotation& a : pre) n += a.lines;
  for (const annotation& a : post) n += a.lines;
  for (const buffer& b : inputs) {
    for (const annotation& a : b.anns) n += a.lines;
  }
  for (const func& f : funcs) {
    for (const stage& s : f.stages) {
      for (const annotation& a : s.anns) n += a.lines;
    }
  }
  return n;
}

int pipeline::user_annotation_count() const {
  size_t n = pre.size() + post.size();
  for (const buffer& b : inputs) n += b.anns.size();
  for (const func& f : funcs) {
    for (const stage& s : f.stages) n += s.anns.size();
  }
  return static_cast<int>(n);
}

bool pipeline::operator==(const pipeline& o) const {
  return name == o.name && inputs == o.inputs && params == o.params && rdoms == o.rdoms && funcs == o.funcs &&
         output == o.output && pre == o.pre && post == o.post;
}

std::vector<std::string> callees(const func& f) {
  std::vector<std::string> out;
  auto scan = [&](const expr& e) {
    visit(e, [&](const expr& x) {
      if (x->kind == expr_kind::func_call && x->name != f.name &&
          std::find(out.begin(), out.end(), x->name) == out.end()) {
        out.push_back(x->name);
      }
      return true;
    });
  };
  for (const stage& s : f.stages) {
    for (const expr& a : s.lhs) scan(a);
    scan(s.rhs);
    if (s.guard.defined()) scan(s.guard);
  }
  return out;
}

namespace {

struct validator {
  const pipeline& p;
  std::vector<diagnostic> out;

  void report(const std::string& rule, const std::string& msg, const source_span& span) {
    out.push_back({rule, msg, span});
  }

  // Checks arity and that referenced funcs exist and precede `limit` (index of the
  // func being defined; references to itself are allowed when allow_self).
  void check_calls(const expr& e, int limit, bool allow_self, const source_span& span) {
    visit(e, [&](const expr& x) {
      if (x->kind == expr_kind::func_call) {
        int idx = p.func_index(x->name);
        if (idx < 0) {
          report("UnknownFunc", "unknown function '" + x->name + "'", span);
        } else {
          const func& g = p.funcs[idx];
          if (x->args.size() != g.dims.size()) {
            report("ArityMismatch",
                   "'" + x->name + "' takes " + std::to_string(g.dims.size()) + " arguments, got " +
                       std::to_string(x->args.size()),
                   span);
          }
          if (idx > limit || (idx == limit && !allow_self)) {
            report("CyclicReference", "'" + x->name + "' is referenced before it is fully defined", span);
          }
        }
      } else if (x->kind == expr_kind::buf_call) {
        const buffer* b = p.find_buffer(x->name);
        if (!b) {
          report("UnknownFunc", "unknown buffer '" + x->name + "'", span);
        } else if (x->args.size() != b->dims.size()) {
          report("ArityMismatch",
                 "'" + x->name + "' takes " + std::to_string(b->dims.size()) + " arguments, got " +
                     std::to_string(x->args.size()),
                 span);
        }
      } else if (x->kind == expr_kind::bound_ref) {
        if (!p.bound_value(x->name, x->dim, x->is_max) && !p.find_func(x->name) && !p.find_buffer(x->name)) {
          report("UnknownFunc", "bound of unknown entity '" + x->name + "'", span);
        } else {
          bool found = false;
          if (const func* f = p.find_func(x->name)) {
            for (const dim& d : f->dims) found = found || d.name == x->dim;
          }
          if (const buffer* b = p.find_buffer(x->name)) {
            for (const dim& d : b->dims) found = found || d.name == x->dim;
          }
          if (!found) report("UnknownDim", "'" + x->name + "' has no dimension '" + x->dim + "'", span);
        }
      }
      return true;
    });
  }

  void check_bound(const expr& e, const std::set<std::string>& bound, const source_span& span) {
    for (const std::string& v : free_vars(e)) {
      if (!bound.count(v) && !p.param_value(v)) {
        report("UnboundVariable", "variable '" + v + "' is not bound", span);
      }
    }
  }

  bool is_canonical_self(const expr& call, const func& f, const stage& s) {
    bool canonical = true;
    for (size_t i = 0; i < call->args.size() && i < f.dims.size(); ++i) {
      canonical = canonical && is_var(call->args[i], f.dims[i].name);
    }
    if (canonical) return true;
    if (s.lhs.size() != call->args.size()) return false;
    for (size_t i = 0; i < s.lhs.size(); ++i) {
      if (!equal(s.lhs[i], call->args[i])) return false;
    }
    return true;
  }

  void check_func(const func& f, int idx) {
    if (f.dims.empty()) report("EmptyDims", "function '" + f.name + "' has no dimensions", f.span);
    if (f.stages.empty()) {
      report("MissingDefinition", "function '" + f.name + "' has no definition", f.span);
      return;
    }
    std::set<std::string> pure;
    for (const dim& d : f.dims) pure.insert(d.name);
    for (size_t si = 0; si < f.stages.size(); ++si) {
      const stage& s = f.stages[si];
      if ((si == 0) != (s.kind == stage_kind::pure)) {
        report("StageOrder", "stage " + std::to_string(si) + " of '" + f.name + "' has the wrong kind", s.span);
      }
      if (s.lhs.size() != f.dims.size()) {
        report("ArityMismatch", "definition of '" + f.name + "' has the wrong number of arguments", s.span);
        continue;
      }
      std::set<std::string> bound = pure;
      if (s.rd) {
        std::set<std::string> seen;
        for (const rdom_var& r : s.rd->vars) {
          if (!seen.insert(r.name).second || pure.count(r.name)) {
            report("DuplicateDim", "reduction variable '" + r.name + "' is not unique", s.span);
          }
          bound.insert(r.name);
        }
      }
      if (si == 0) {
        for (size_t i = 0; i < s.lhs.size(); ++i) {
          if (!is_var(s.lhs[i], f.dims[i].name)) {
            report("NonCanonicalPureStage", "pure definition of '" + f.name + "' must use its variables", s.span);
          }
        }
        if (s.guard.defined()) {
          report("NonCanonicalPureStage", "pure definition of '" + f.name + "' cannot be guarded", s.span);
        }
        if (mentions_call(s.rhs, f.name)) {
          report("SelfReferenceInPureStage", "pure definition of '" + f.name + "' refers to itself", s.span);
        }
      } else {
        for (size_t i = 0; i < s.lhs.size(); ++i) {
          if (is_var(s.lhs[i], f.dims[i].name)) continue;
          for (const dim& d : f.dims) {
            if (mentions_var(s.lhs[i], d.name)) {
              report("UpdateNotPointwise",
                     "argument " + std::to_string(i) + " of an update of '" + f.name + "' uses pure variable '" +
                         d.name + "' at the wrong position",
                     s.span);
            }
          }
        }
        // Self references must keep pure variables in place.
        visit(s.rhs, [&](const expr& x) {
          if (x->kind == expr_kind::func_call && x->name == f.name && x->args.size() == s.lhs.size()) {
            for (size_t i = 0; i < s.lhs.size(); ++i) {
              if (is_var(s.lhs[i], f.dims[i].name) && !is_var(x->args[i], f.dims[i].name)) {
                report("UpdateNotPointwise",
                       "self reference of '" + f.name + "' must use '" + f.dims[i].name + "' at position " +
                           std::to_string(i),
                       s.span);
              }
            }
          }
          return true;
        });
        // Pure variables used in the rhs must appear in the lhs.
        for (const dim& d : f.dims) {
          bool in_lhs = false;
          for (size_t i = 0; i < s.lhs.size(); ++i) in_lhs = in_lhs || is_var(s.lhs[i], d.name);
          if (!in_lhs && (mentions_var(s.rhs, d.name) || (s.guard.defined() && mentions_var(s.guard, d.name)))) {
            report("UnboundVariable", "pure variable '" + d.name + "' is not bound by the update's left side",
                   s.span);
          }
        }
      }
      for (const expr& a : s.lhs) {
        check_calls(a, idx, false, s.span);
        check_bound(a, bound, s.span);
      }
      check_calls(s.rhs, idx, si > 0, s.span);
      check_bound(s.rhs, bound, s.span);
      if (s.guard.defined()) {
        check_calls(s.guard, idx, si > 0, s.span);
        check_bound(s.guard, bound, s.span);
      }
      for (const annotation& a : s.anns) {
        if (a.kind == ann_kind::invariant) {
          if (!s.rd) {
            report("InvariantWithoutReduction", "invariant attached to a stage without a reduction domain", a.span);
          } else {
            bool known = false;
            for (const rdom_var& r : s.rd->vars) known = known || r.name == a.rvar;
            if (!known) report("UnknownDim", "'" + a.rvar + "' is not a reduction variable of this stage", a.span);
          }
        }
        check_calls(a.body, idx, true, a.span);
        std::set<std::string> abound = pure;
        if (s.rd && a.kind == ann_kind::invariant) {
          for (const rdom_var& r : s.rd->vars) abound.insert(r.name);
        }
        check_bound(a.body, abound, a.span);
        visit(a.body, [&](const expr& x) {
          if (x->kind == expr_kind::func_call && x->name == f.name && !is_canonical_self(x, f, s)) {
            report("SelfReferenceNotCanonical",
                   "annotation refers to '" + f.name + "' at a point other than its own: " + print(x), a.span);
          }
          return true;
        });
      }
    }
  }

  void check_pipeline_ann(const annotation& a) {
    visit(a.body, [&](const expr& x) {
      if (x->kind == expr_kind::func_call && x->name != p.output) {
        report("PipelineAnnotationScope", "pipeline annotations may only refer to inputs and the output", a.span);
      }
      if (x->kind == expr_kind::bound_ref && x->name != p.output && !p.find_buffer(x->name)) {
        report("PipelineAnnotationScope", "pipeline annotations may only refer to inputs and the output", a.span);
      }
      return true;
    });
    check_calls(a.body, static_cast<int>(p.funcs.size()), true, a.span);
    check_bound(a.body, {}, a.span);
  }

  void run() {
    std::set<std::string> names;
    for (const buffer& b : p.inputs) {
      if (!names.insert(b.name).second) report("DuplicateName", "'" + b.name + "' is defined twice", b.span);
      for (const annotation& a : b.anns) {
        visit(a.body, [&](const expr& x) {
          if (x->kind == expr_kind::func_call) {
            report("PipelineAnnotationScope", "buffer annotations may not refer to functions", a.span);
          }
          return true;
        });
        std::set<std::string> bound;
        for (const dim& d : b.dims) bound.insert(d.name);
        check_bound(a.body, bound, a.span);
      }
    }
    for (const func& f : p.funcs) {
      if (!names.insert(f.name).second) report("DuplicateName", "'" + f.name + "' is defined twice", f.span);
    }
    if (p.funcs.empty()) {
      report("MissingOutput", "pipeline defines no functions", p.span);
      return;
    }
    if (!p.find_func(p.output)) {
      report("MissingOutput", "output '" + p.output + "' is not defined", p.span);
    } else if (p.funcs.back().name != p.output) {
      report("OutputNotLast", "output '" + p.output + "' must be the last function", p.span);
    }
    for (size_t i = 0; i < p.funcs.size(); ++i) check_func(p.funcs[i], static_cast<int>(i));
    for (const annotation& a : p.pre) check_pipeline_ann(a);
    for (const annotation& a : p.post) check_pipeline_ann(a);
  }
};

}  // namespace

std::vector<diagnostic> validate_pipeline(const pipeline& p) {
  validator v{p, {}};
  v.run();
  return v.out;
}

std::optional<const_range> range_of(const expr& e, const std::map<std::string, const_range>& scope) {
  switch (e->kind) {
  case expr_kind::constant: return const_range{e->value, e->value};
  case expr_kind::var: {
    auto it = scope.find(e->name);
    if (it == scope.end()) return std::nullopt;
    return it->second;
  }
  case expr_kind::unary: {
    if (e->uop != unop::neg) return std::nullopt;
    auto a = range_of(e->args[0], scope);
    if (!a) return std::nullopt;
    return const_range{-a->hi, -a->lo};
  }
  case expr_kind::select: {
    auto a = range_of(e->args[1], scope);
    auto b = range_of(e->args[2], scope);
    if (!a || !b) return std::nullopt;
    return const_range{std::min(a->lo, b->lo), std::max(a->hi, b->hi)};
  }
  case expr_kind::binary: {
    auto a = range_of(e->args[0], scope);
    auto b = range_of(e->args[1], scope);
    if (!a || !b) return std::nullopt;
    switch (e->bop) {
    case binop::add: return const_range{a->lo + b->lo, a->hi + b->hi};
    case binop::sub: return const_range{a->lo - b->hi, a->hi - b->lo};
    case binop::mul: {
      int64_t c[4] = {a->lo * b->lo, a->lo * b->hi, a->hi * b->lo, a->hi * b->hi};
      return const_range{*std::min_element(c, c + 4), *std::max_element(c, c + 4)};
    }
    case binop::div:
      if (b->lo == b->hi && b->lo > 0) return const_range{hdiv(a->lo, b->lo), hdiv(a->hi, b->lo)};
      if (b->lo == b->hi && b->lo < 0) return const_range{hdiv(a->hi, b->lo), hdiv(a->lo, b->lo)};
      return std::nullopt;
    case binop::mod:
      if (b->lo == b->hi && b->lo != 0) {
        int64_t m = b->lo < 0 ? -b->lo : b->lo;
        if (a->hi - a->lo + 1 < m && hmod(a->lo, m) <= hmod(a->hi, m)) {
          return const_range{hmod(a->lo, m), hmod(a->hi, m)};
        }
        return const_range{0, m - 1};
      }
      return std::nullopt;
    case binop::min: return const_range{std::min(a->lo, b->lo), std::min(a->hi, b->hi)};
    case binop::max: return const_range{std::max(a->lo, b->lo), std::max(a->hi, b->hi)};
    default: return const_range{0, 1};
    }
  }
  default: return std::nullopt;
  }
}

namespace {

struct region {
  std::vector<std::optional<const_range>> dims;
  bool unknown = false;
};

void widen(region& r, const std::vector<expr>& args, const std::map<std::string, const_range>& scope) {
  if (r.dims.size() < args.size()) r.dims.resize(args.size());
  for (size_t i = 0; i < args.size(); ++i) {
    auto b = range_of(args[i], scope);
    if (!b) {
      r.unknown = true;
      continue;
    }
    if (!r.dims[i]) {
      r.dims[i] = b;
    } else {
      r.dims[i]->lo = std::min(r.dims[i]->lo, b->lo);
      r.dims[i]->hi = std::max(r.dims[i]->hi, b->hi);
    }
  }
}

}  // namespace

std::vector<diagnostic> infer_domains(pipeline& p) {
  std::vector<diagnostic> out;
  std::map<std::string, region> need;
  std::map<std::string, const_range> params;
  for (const param& q : p.params) params[q.name] = {q.value, q.value};

  auto scan = [&](const expr& e, const std::map<std::string, const_range>& scope, const std::string& self) {
    visit(e, [&](const expr& x) {
      if ((x->kind == expr_kind::func_call && x->name != self) || x->kind == expr_kind::buf_call) {
        widen(need[x->name], x->args, scope);
      }
      return true;
    });
  };

  for (int i = static_cast<int>(p.funcs.size()) - 1; i >= 0; --i) {
    func& f = p.funcs[i];
    bool is_output = f.name == p.output;
    region& r = need[f.name];
    for (size_t d = 0; d < f.dims.size(); ++d) {
      if (f.dims[d].declared) continue;
      if (is_output) {
        out.push_back({"UndeclaredOutputBounds", "output dimension '" + f.dims[d].name + "' has no bounds", f.span});
        continue;
      }
      if (d < r.dims.size() && r.dims[d]) {
        f.dims[d].range = {r.dims[d]->lo, r.dims[d]->hi - r.dims[d]->lo + 1};
      } else {
        f.dims[d].range = {0, 0};
      }
    }
    if (r.unknown) {
      bool all_declared = true;
      for (const dim& d : f.dims) all_declared = all_declared && d.declared;
      if (!all_declared) {
        out.push_back({"NonAffineAccess", "bounds of '" + f.name + "' depend on data", f.span});
      }
    }
    // Updates may write outside the consumers' requirements.
    for (size_t si = 1; si < f.stages.size(); ++si) {
      const stage& s = f.stages[si];
      std::map<std::string, const_range> scope = params;
      for (const dim& d : f.dims) scope[d.name] = {d.range.min, d.range.max() - 1};
      if (s.rd) {
        for (const rdom_var& v : s.rd->vars) scope[v.name] = {v.range.min, v.range.max() - 1};
      }
      for (size_t d = 0; d < s.lhs.size() && d < f.dims.size(); ++d) {
        if (is_var(s.lhs[d], f.dims[d].name)) continue;
        auto b = range_of(s.lhs[d], scope);
        if (!b) continue;
        interval& iv = f.dims[d].range;
        if (b->lo < iv.min || b->hi >= iv.max()) {
          if (f.dims[d].declared || is_output) {
            out.push_back({"OutOfDomain", "update of '" + f.name + "' writes outside its bounds", s.span});
          } else {
            int64_t lo = std::min(iv.min, b->lo);
            int64_t hi = std::max(iv.max() - 1, b->hi);
            if (iv.extent == 0) lo = b->lo, hi = b->hi;
            iv = {lo, hi - lo + 1};
          }
        }
      }
    }
    for (const stage& s : f.stages) {
      std::map<std::string, const_range> scope = params;
      for (const dim& d : f.dims) scope[d.name] = {d.range.min, d.range.max() - 1};
      if (s.rd) {
        for (const rdom_var& v : s.rd->vars) scope[v.name] = {v.range.min, v.range.max() - 1};
      }
      if (f.dims.empty()) continue;
      bool empty = false;
      for (const dim& d : f.dims) empty = empty || d.range.extent <= 0;
      if (empty) continue;
      for (const expr& a : s.lhs) scan(a, scope, f.name);
      scan(s.rhs, scope, f.name);
      if (s.guard.defined()) scan(s.guard, scope, f.name);
    }
  }
  for (buffer& b : p.inputs) {
    region& r = need[b.name];
    for (size_t d = 0; d < b.dims.size(); ++d) {
      bool have = d < r.dims.size() && r.dims[d].has_value();
      if (b.dims[d].declared) {
        if (have && (r.dims[d]->lo < b.dims[d].range.min || r.dims[d]->hi >= b.dims[d].range.max())) {
          out.push_back({"OutOfDomain", "accesses to '" + b.name + "' exceed its declared bounds", b.span});
        }
        continue;
      }
      if (r.unknown) {
        out.push_back({"NonAffineAccess", "bounds of '" + b.name + "' depend on data", b.span});
      }
      b.dims[d].range = have ? interval{r.dims[d]->lo, r.dims[d]->hi - r.dims[d]->lo + 1} : interval{0, 0};
    }
  }
  return out;
}

expr resolve_bound_refs(const expr& e, const pipeline& p) {
  return mutate(e, [&](const expr& x) -> expr {
    if (x->kind == expr_kind::bound_ref) {
      auto v = p.bound_value(x->name, x->dim, x->is_max);
      if (v) return make_const(*v);
    }
    return expr();
  });
}

pipeline strip_annotations(const pipeline& p) {
  pipeline q = p;
  q.pre.clear();
  q.post.clear();
  for (buffer& b : q.inputs) b.anns.clear();
  for (func& f : q.funcs) {
    for (stage& s : f.stages) s.anns.clear();
  }
  return q;
}

}  // namespace minisched

#include "minisched/schedule.h"

#include <algorithm>
#include <functional>
#include <set>

#include "minisched/error.h"

namespace minisched {

const char* loop_kind_name(loop_kind k) {
  switch (k) {
  case loop_kind::serial: return "for";
  case loop_kind::parallel: return "parallel";
  case loop_kind::unrolled: return "unrolled";
  }
  return "?";
}

const sched_dim* stage_schedule::find(const std::string& name) const {
  for (const sched_dim& d : dims) {
    if (d.name == name) return &d;
  }
  return nullptr;
}

std::vector<std::string> default_stage_dims(const func& f, size_t si) {
  std::vector<std::string> out;
  const stage& s = f.stages[si];
  if (s.rd) {
    for (const rdom_var& r : s.rd->vars) out.push_back(r.name);
  }
  for (size_t i = 0; i < f.dims.size(); ++i) {
    if (si == 0 || is_var(s.lhs[i], f.dims[i].name)) out.push_back(f.dims[i].name);
  }
  return out;
}

namespace {

std::set<std::string> direct_callees(const stage& s, const pipeline& p) {
  std::set<std::string> out;
  auto scan = [&](const expr& e) {
    if (!e.defined()) return;
    visit(e, [&](const expr& x) {
      if (x->kind == expr_kind::func_call && p.find_func(x->name)) out.insert(x->name);
      return true;
    });
  };
  scan(s.rhs);
  scan(s.guard);
  for (const expr& a : s.lhs) scan(a);
  return out;
}

std::set<std::string> stage_uses(const scheduled_pipeline& sp, const func& f, size_t si) {
  std::set<std::string> out;
  std::function<void(const std::string&)> add = [&](const std::string& g) {
    if (!out.insert(g).second) return;
    if (sp.funcs.at(g).where != placement::inlined) return;
    const func& gf = *sp.p.find_func(g);
    for (const stage& s : gf.stages) {
      for (const std::string& h : direct_callees(s, sp.p)) add(h);
    }
  };
  for (const std::string& g : direct_callees(f.stages[si], sp.p)) {
    if (g != f.name) add(g);
  }
  return out;
}

int dim_index(const stage_schedule& ss, const std::string& name) {
  for (size_t i = 0; i < ss.dims.size(); ++i) {
    if (ss.dims[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

}  // namespace

std::vector<std::string> effective_callees(const scheduled_pipeline& sp, const std::string& f) {
  const func& fn = *sp.p.find_func(f);
  std::set<std::string> all;
  for (size_t si = 0; si < fn.stages.size(); ++si) {
    for (const std::string& g : stage_uses(sp, fn, si)) all.insert(g);
  }
  return {all.begin(), all.end()};
}

scheduled_pipeline apply_directives(const pipeline& p, const std::vector<directive>& ds) {
  scheduled_pipeline sp;
  sp.p = p;
  sp.directives = ds;
  std::set<std::string> touched;
  for (const func& f : p.funcs) {
    func_schedule fs;
    for (size_t si = 0; si < f.stages.size(); ++si) {
      stage_schedule ss;
      int ri = 0;
      const stage& s = f.stages[si];
      for (const std::string& n : default_stage_dims(f, si)) {
        sched_dim d;
        d.name = n;
        if (s.rd) {
          for (const rdom_var& rv : s.rd->vars) {
            if (rv.name == n) {
              d.rvar = true;
              d.order_key = {ri++};
            }
          }
        }
        ss.dims.push_back(d);
      }
      fs.stages.push_back(ss);
    }
    sp.funcs[f.name] = fs;
  }

  std::map<std::string, const directive*> compute_at, store_at;
  for (const directive& d : ds) {
    const func* f = p.find_func(d.func);
    if (!f) throw error("UnknownFunc", "unknown function '" + d.func + "'", d.span);
    touched.insert(d.func);
    func_schedule& fs = sp.funcs[d.func];
    if (d.stage < 0 || d.stage >= static_cast<int>(fs.stages.size())) {
      throw error("UnknownDim", "'" + d.func + "' has no such update", d.span);
    }
    stage_schedule& ss = fs.stages[d.stage];
    auto need = [&](const std::string& n) {
      int i = dim_index(ss, n);
      if (i < 0) throw error("UnknownDim", "'" + d.func + "' has no dimension '" + n + "'", d.span);
      return i;
    };
    auto fresh = [&](const std::string& n) {
      if (dim_index(ss, n) >= 0) throw error("DuplicateDim", "'" + d.func + "' already has '" + n + "'", d.span);
    };
    switch (d.kind) {
    case directive_kind::split: {
      if (d.factor <= 0) {
        throw error("SplitNonPositiveFactor", "split factor must be positive, got " + std::to_string(d.factor),
                    d.span);
      }
      int i = need(d.names[0]);
      sched_dim old = ss.dims[i];
      ss.dims.erase(ss.dims.begin() + i);
      fresh(d.names[1]);
      fresh(d.names[2]);
      sched_dim outer = old, inner = old;
      outer.name = d.names[1];
      inner.name = d.names[2];
      outer.kind = inner.kind = loop_kind::serial;
      if (old.rvar) {
        outer.order_key.push_back(1);
        inner.order_key.push_back(0);
      }
      ss.dims.insert(ss.dims.begin() + i, outer);
      ss.dims.insert(ss.dims.begin() + i, inner);
      ss.relations.push_back({dim_relation::split, d.names[0], d.names[1], d.names[2], d.factor});
      break;
    }
    case directive_kind::fuse: {
      int ia = need(d.names[0]);
      int ib = need(d.names[1]);
      sched_dim a = ss.dims[ia], b = ss.dims[ib];
      if (a.kind != b.kind || a.rvar != b.rvar) {
        throw error("FuseKindMismatch",
                    "cannot fuse " + std::string(loop_kind_name(a.kind)) + (a.rvar ? " reduction" : "") + " '" +
                        a.name + "' with " + loop_kind_name(b.kind) + (b.rvar ? " reduction" : "") + " '" + b.name +
                        "'",
                    d.span);
      }
      ss.dims.erase(ss.dims.begin() + ia);
      ib = dim_index(ss, d.names[1]);
      ss.dims.erase(ss.dims.begin() + ib);
      fresh(d.names[2]);
      sched_dim fused = b;
      fused.name = d.names[2];
      ss.dims.insert(ss.dims.begin() + std::min<size_t>(ib, ss.dims.size()), fused);
      ss.relations.push_back({dim_relation::fuse, d.names[0], d.names[1], d.names[2], 0});
      break;
    }
    case directive_kind::reorder: {
      std::vector<int> slots;
      for (const std::string& n : d.names) slots.push_back(need(n));
      std::vector<sched_dim> moved;
      for (int s : slots) moved.push_back(ss.dims[s]);
      std::sort(slots.begin(), slots.end());
      for (size_t k = 0; k < slots.size(); ++k) ss.dims[slots[k]] = moved[k];
      break;
    }
    case directive_kind::parallel:
      ss.dims[need(d.names[0])].kind = loop_kind::parallel;
      break;
    case directive_kind::unroll:
      ss.dims[need(d.names[0])].kind = loop_kind::unrolled;
      break;
    case directive_kind::compute_at:
      compute_at[d.func] = &d;
      touched.insert(d.names[0]);
      break;
    case directive_kind::store_at:
      store_at[d.func] = &d;
      touched.insert(d.names[0]);
      break;
    }
  }

  // Reduction dims must keep their lexicographic order, outermost first.
  for (const func& f : p.funcs) {
    const func_schedule& fs = sp.funcs[f.name];
    for (size_t si = 0; si < fs.stages.size(); ++si) {
      const std::vector<int>* prev = nullptr;
      std::string prev_name;
      for (const sched_dim& d : fs.stages[si].dims) {
        if (!d.rvar) continue;
        if (prev && !(*prev < d.order_key)) {
          throw error("ReorderUnsafe",
                      "reordering '" + prev_name + "' outside '" + d.name + "' in '" + f.name +
                          "' changes the order in which the reduction runs",
                      f.stages[si].span);
        }
        prev = &d.order_key;
        prev_name = d.name;
      }
    }
  }

  // Placements.
  for (const func& f : p.funcs) {
    func_schedule& fs = sp.funcs[f.name];
    const directive* c = compute_at.count(f.name) ? compute_at[f.name] : nullptr;
    const directive* s = store_at.count(f.name) ? store_at[f.name] : nullptr;
    if (f.name == p.output) {
      if (c || s) throw error("InvalidPlacement", "the output '" + f.name + "' is always computed at the root",
                              (c ? c : s)->span);
      fs.where = placement::root;
      continue;
    }
    if (c || s) {
      fs.where = placement::at;
      const directive* cd = c ? c : s;
      fs.compute = {cd->names[0], -1, cd->names[1]};
      fs.store = s ? loop_level{s->names[0], -1, s->names[1]} : fs.compute;
      continue;
    }
    bool pure_single = f.stages.size() == 1;
    fs.where = pure_single && !touched.count(f.name) ? placement::inlined : placement::root;
  }

  // Cycles among placements.
  for (const func& f : p.funcs) {
    std::set<std::string> seen{f.name};
    std::string cur = f.name;
    while (sp.funcs[cur].where == placement::at) {
      std::string next = sp.funcs[cur].compute.func;
      if (!seen.insert(next).second) {
        throw error("PlacementCycle", "placement of '" + f.name + "' is cyclic", f.span);
      }
      cur = next;
    }
  }

  // Every placed func must be consumed (transitively) by its host.
  std::function<bool(const std::string&, const std::string&, std::set<std::string>&)> consumes =
      [&](const std::string& g, const std::string& f, std::set<std::string>& seen) {
        if (!seen.insert(g).second) return false;
        for (const std::string& h : effective_callees(sp, g)) {
          if (h == f || consumes(h, f, seen)) return true;
        }
        return false;
      };

  // Stage of the host each placement refers to.
  std::function<void(const std::string&)> resolve = [&](const std::string& fname) {
    func_schedule& fs = sp.funcs[fname];
    if (fs.where != placement::at || fs.compute.stage >= 0) return;
    const func& g = *p.find_func(fs.compute.func);
    std::set<std::string> seen;
    if (!consumes(g.name, fname, seen)) {
      throw error("InvalidPlacement", "'" + g.name + "' does not use '" + fname + "'", g.span);
    }
    const func_schedule& gs = sp.funcs[g.name];
    std::vector<int> with_var;
    for (size_t si = 0; si < gs.stages.size(); ++si) {
      if (gs.stages[si].find(fs.compute.var)) with_var.push_back(static_cast<int>(si));
    }
    if (with_var.empty()) {
      throw error("UnknownDim", "'" + g.name + "' has no dimension '" + fs.compute.var + "'", g.span);
    }
    // The first stage that reads fname, directly or through a func placed in it.
    std::function<bool(int, std::set<std::string>&)> needs = [&](int si, std::set<std::string>& seen2) {
      std::set<std::string> uses = stage_uses(sp, g, si);
      if (uses.count(fname)) return true;
      for (const auto& [h, hs] : sp.funcs) {
        if (hs.where != placement::at || hs.compute.func != g.name || h == fname) continue;
        if (!seen2.insert(h).second) continue;
        resolve(h);
        if (hs.compute.stage == si) {
          std::set<std::string> s3;
          if (consumes(h, fname, s3)) return true;
        }
      }
      return false;
    };
    int chosen = with_var.front();
    for (int si : with_var) {
      std::set<std::string> seen2{fname};
      if (needs(si, seen2)) {
        chosen = si;
        break;
      }
    }
    fs.compute.stage = chosen;
    if (fs.store.func != fs.compute.func) {
      throw error("InvalidPlacement", "'" + fname + "' must be stored and computed within the same function",
                  g.span);
    }
    const stage_schedule& ss = gs.stages[chosen];
    int ci = dim_index(ss, fs.compute.var);
    int st = dim_index(ss, fs.store.var);
    if (st < 0) {
      throw error("InvalidPlacement", "'" + fs.store.var + "' is not a loop of the stage '" + fname +
                                          "' is computed in", g.span);
    }
    if (st < ci) {
      throw error("InvalidPlacement", "'" + fname + "' is stored inside the loop it is computed at", g.span);
    }
    fs.store.stage = chosen;
  };
  for (const func& f : p.funcs) resolve(f.name);
  return sp;
}

}  // namespace minisched

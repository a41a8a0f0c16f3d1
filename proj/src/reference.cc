#include <algorithm>
#include <functional>
#include <limits>
#include <random>
#include <set>

#include "minisched/checker.h"
#include "minisched/error.h"
#include "minisched/eval.h"

namespace minisched {

array_value::array_value(std::string n, std::vector<interval> d) : name(std::move(n)), dims(std::move(d)) {
  size_t total = 1;
  for (const interval& i : dims) total *= static_cast<size_t>(std::max<int64_t>(i.extent, 0));
  data.assign(total, 0);
}

bool array_value::contains(const int64_t* args, size_t n) const {
  if (n != dims.size()) return false;
  for (size_t i = 0; i < n; ++i) {
    if (!dims[i].contains(args[i])) return false;
  }
  return true;
}

size_t array_value::offset(const int64_t* args) const {
  size_t off = 0;
  for (size_t i = dims.size(); i-- > 0;) off = off * dims[i].extent + (args[i] - dims[i].min);
  return off;
}

namespace {

std::vector<interval> ranges_of(const std::vector<dim>& dims) {
  std::vector<interval> out;
  for (const dim& d : dims) out.push_back(d.range);
  return out;
}

// Calls `body` for every point of the box, first coordinate fastest.
void for_each_point(const std::vector<interval>& box, const std::function<void(const std::vector<int64_t>&)>& body) {
  for (const interval& i : box) {
    if (i.extent <= 0) return;
  }
  std::vector<int64_t> pt;
  for (const interval& i : box) pt.push_back(i.min);
  while (true) {
    body(pt);
    size_t k = 0;
    while (k < pt.size()) {
      if (++pt[k] < box[k].max()) break;
      pt[k] = box[k].min;
      ++k;
    }
    if (k == pt.size()) return;
  }
}

std::string point_text(const int64_t* a, size_t n) {
  std::string s = "(";
  for (size_t i = 0; i < n; ++i) s += (i ? ", " : "") + std::to_string(a[i]);
  return s + ")";
}

class array_ctx : public eval_context {
public:
  std::vector<const array_value*> arrays;

  int64_t invoke(int id, const int64_t* args, size_t n) override {
    const array_value& a = *arrays[id];
    if (!a.contains(args, n)) {
      throw eval_error("outOfBounds", "read of " + a.name + point_text(args, n) + " outside its domain");
    }
    return a.data[a.offset(args)];
  }
};

void check_int32(int64_t v, const std::string& what) {
  if (v < std::numeric_limits<int32_t>::min() || v > std::numeric_limits<int32_t>::max()) {
    throw eval_error("overflow", "value " + std::to_string(v) + " of " + what + " does not fit in 32 bits");
  }
}

std::vector<const func*> topo_order(const pipeline& p) {
  std::vector<const func*> out;
  std::set<std::string> done;
  std::function<void(const func&)> visit_f = [&](const func& f) {
    if (done.count(f.name)) return;
    done.insert(f.name);
    for (const std::string& c : callees(f)) {
      if (c == f.name) continue;
      if (const func* g = p.find_func(c)) visit_f(*g);
    }
    out.push_back(&f);
  };
  for (const func& f : p.funcs) visit_f(f);
  return out;
}

}  // namespace

valuation random_valuation(const pipeline& p, uint64_t seed, int64_t lo, int64_t hi) {
  valuation v;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int64_t> dist(lo, hi);
  for (const buffer& b : p.inputs) {
    array_value a(b.name, ranges_of(b.dims));
    std::vector<compiled_expr> reqs;
    compile_scope scope;
    scope.result_slot = 0;
    scope.bound = [&](const expr& e) { return p.bound_value(e->name, e->dim, e->is_max); };
    for (const annotation& r : b.anns) reqs.push_back(compiled_expr::compile(r.body, scope, 1));
    array_ctx ctx;
    for (int64_t& x : a.data) {
      int tries = 0;
      while (true) {
        int64_t frame[64] = {};
        frame[0] = dist(rng);
        bool ok = true;
        for (const compiled_expr& c : reqs) ok = ok && c.holds(ctx, frame);
        if (ok) {
          x = frame[0];
          break;
        }
        if (++tries > 1000) {
          throw error("UnsatisfiableInput", "no value in [" + std::to_string(lo) + ", " + std::to_string(hi) +
                                                "] satisfies the requires of '" + b.name + "'");
        }
      }
    }
    v.buffers[b.name] = std::move(a);
  }
  return v;
}

std::map<std::string, array_value> eval_reference(const pipeline& p, const valuation& v) {
  std::map<std::string, array_value> out;
  std::map<std::string, int> ids;
  array_ctx ctx;
  for (const auto& [name, a] : v.buffers) {
    ids[name] = static_cast<int>(ctx.arrays.size());
    ctx.arrays.push_back(&a);
  }
  for (const func* fp : topo_order(p)) {
    const func& f = *fp;
    array_value& arr = out[f.name] = array_value(f.name, ranges_of(f.dims));
    ids[f.name] = static_cast<int>(ctx.arrays.size());
    ctx.arrays.push_back(&arr);
    for (const stage& s : f.stages) {
      std::map<std::string, int> slots;
      for (size_t i = 0; i < f.dims.size(); ++i) slots[f.dims[i].name] = static_cast<int>(i);
      std::vector<interval> rbox;
      if (s.rd) {
        for (const rdom_var& rv : s.rd->vars) {
          slots[rv.name] = static_cast<int>(slots.size());
          rbox.push_back(rv.range);
        }
      }
      int nslots = static_cast<int>(slots.size());
      compile_scope scope;
      scope.slot = [&](const std::string& n) {
        auto it = slots.find(n);
        return it == slots.end() ? -1 : it->second;
      };
      scope.callee = [&](const expr& e) {
        auto it = ids.find(e->name);
        return it == ids.end() ? -1 : it->second;
      };
      scope.bound = [&](const expr& e) { return p.bound_value(e->name, e->dim, e->is_max); };
      compiled_expr rhs = compiled_expr::compile(s.rhs, scope, nslots);
      compiled_expr guard;
      if (s.guard.defined()) guard = compiled_expr::compile(s.guard, scope, nslots);
      std::vector<compiled_expr> lhs;
      std::vector<interval> pbox;
      for (size_t i = 0; i < f.dims.size(); ++i) {
        lhs.push_back(compiled_expr::compile(s.lhs[i], scope, nslots));
        // Dimensions pinned by the left-hand side are visited once.
        pbox.push_back(is_var(s.lhs[i], f.dims[i].name) ? f.dims[i].range : interval{0, 1});
      }
      int fs = nslots;
      fs = std::max(fs, rhs.frame_size());
      if (guard.defined()) fs = std::max(fs, guard.frame_size());
      for (const compiled_expr& c : lhs) fs = std::max(fs, c.frame_size());
      std::vector<int64_t> frame(fs + 1);
      std::vector<int64_t> at(f.dims.size());
      auto run = [&]() {
        if (guard.defined() && !guard.holds(ctx, frame.data())) return;
        int64_t val = rhs.eval(ctx, frame.data());
        for (size_t i = 0; i < lhs.size(); ++i) at[i] = lhs[i].eval(ctx, frame.data());
        if (!arr.contains(at.data(), at.size())) {
          throw eval_error("outOfBounds", "write of " + f.name + point_text(at.data(), at.size()) + " outside its domain");
        }
        check_int32(val, f.name + point_text(at.data(), at.size()));
        arr.data[arr.offset(at.data())] = val;
      };
      for_each_point(pbox, [&](const std::vector<int64_t>& pt) {
        for (size_t i = 0; i < pt.size(); ++i) frame[i] = pt[i];
        if (rbox.empty()) {
          run();
          return;
        }
        for_each_point(rbox, [&](const std::vector<int64_t>& r) {
          for (size_t j = 0; j < r.size(); ++j) frame[f.dims.size() + j] = r[j];
          run();
        });
      });
    }
  }
  return out;
}

}  // namespace minisched

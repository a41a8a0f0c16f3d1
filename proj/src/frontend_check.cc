#include <chrono>
#include <functional>
#include <set>
#include <unordered_map>

#include "minisched/checker.h"
#include "minisched/error.h"
#include "minisched/eval.h"

namespace minisched {

namespace {

struct vec_hash {
  size_t operator()(const std::vector<int64_t>& v) const {
    size_t h = 1469598103934665603ull;
    for (int64_t x : v) h = (h ^ static_cast<size_t>(x)) * 1099511628211ull;
    return h;
  }
};

struct contract_failure {
  std::string kind;
  std::string message;
  source_span span;
  std::string annotation;
  std::map<std::string, int64_t> state;
};

// Thrown to abandon the evaluation of one domain point.
struct abandon {};

class frontend_ctx : public eval_context {
public:
  frontend_ctx(const encoded_program& prog, const pipeline& p, const valuation& v) : prog_(prog), p_(p), v_(v) {
    for (size_t i = 0; i < prog.decls.size(); ++i) ids_[prog.decls[i].name] = static_cast<int>(i);
    // Abstract bound functions of buffers take the inferred bounds.
    for (const buffer& b : p.inputs) {
      for (const dim& d : b.dims) {
        bound_fns_[b.name + "_" + d.name + "_min"] = d.range.min;
        bound_fns_[b.name + "_" + d.name + "_max"] = d.range.max();
      }
    }
    infos_.resize(prog.decls.size());
    for (size_t i = 0; i < prog.decls.size(); ++i) prepare(static_cast<int>(i));
  }

  std::vector<contract_failure> failures;
  std::set<std::string> seen;
  int64_t points = 0;

  // Evaluates decl `id` at `args`. At the top level a point whose requires do
  // not hold is skipped (nullopt); for nested calls it is a failure.
  std::optional<int64_t> call(int id, const std::vector<int64_t>& args, bool top) {
    info& d = infos_[id];
    const pvl_function& fn = prog_.decls[id];
    if (d.buffer) return read_buffer(fn, d, args);
    if (d.has_bound) return d.bound;
    auto it = d.memo.find(args);
    if (it != d.memo.end()) return it->second;

    std::vector<int64_t> frame(d.frame_size + 1, 0);
    for (size_t i = 0; i < args.size(); ++i) frame[i] = args[i];
    for (size_t c = 0; c < d.req.size(); ++c) {
      if (d.req[c].holds(*this, frame.data())) continue;
      if (top) return std::nullopt;
      fail("invariantViolation", "requires of " + fn.name + " does not hold at a call", fn.requires_[c], fn, args);
      throw abandon{};
    }
    if (!stack_.empty() && stack_.back().first == id) check_measure(id, stack_.back().second, args);
    ++points;
    stack_.emplace_back(id, args);
    int64_t result;
    try {
      result = d.body.eval(*this, frame.data());
    } catch (...) {
      stack_.pop_back();
      throw;
    }
    stack_.pop_back();
    frame[args.size()] = result;
    for (size_t c = 0; c < d.ens.size(); ++c) {
      if (!d.ens[c].holds(*this, frame.data())) {
        fail("invariantViolation", "ensures of " + fn.name + " does not hold", fn.ensures[c], fn, args);
      }
    }
    d.memo.emplace(args, result);
    return result;
  }

  int64_t invoke(int id, const int64_t* args, size_t n) override {
    auto r = call(id, std::vector<int64_t>(args, args + n), false);
    return *r;
  }

  int id_of(const std::string& name) const {
    auto it = ids_.find(name);
    return it == ids_.end() ? -1 : it->second;
  }

  compile_scope closed_scope() const {
    compile_scope s;
    s.callee = [this](const expr& e) { return id_of(e->name); };
    s.bound = [this](const expr& e) { return p_.bound_value(e->name, e->dim, e->is_max); };
    return s;
  }

  void fail(const std::string& kind, const std::string& msg, const pvl_clause& c, const pvl_function& fn,
            const std::vector<int64_t>& args) {
    std::string text = print(c.e, dialect::pvl);
    if (!seen.insert(kind + "|" + fn.name + "|" + text).second) return;
    contract_failure f{kind, msg, c.span, text, {}};
    for (size_t i = 0; i < args.size() && i < fn.params.size(); ++i) f.state[fn.params[i]] = args[i];
    failures.push_back(f);
  }

private:
  struct info {
    compiled_expr body;
    std::vector<compiled_expr> req, ens;
    int frame_size = 0;
    bool buffer = false;
    bool has_bound = false;
    int64_t bound = 0;
    std::vector<int> measure;  // parameter positions, outermost first
    std::unordered_map<std::vector<int64_t>, int64_t, vec_hash> memo;
  };

  const encoded_program& prog_;
  const pipeline& p_;
  const valuation& v_;
  std::map<std::string, int> ids_;
  std::map<std::string, int64_t> bound_fns_;
  std::vector<info> infos_;
  std::vector<std::pair<int, std::vector<int64_t>>> stack_;

  void prepare(int id) {
    const pvl_function& fn = prog_.decls[id];
    info& d = infos_[id];
    std::map<std::string, int> slots;
    for (size_t i = 0; i < fn.params.size(); ++i) slots[fn.params[i]] = static_cast<int>(i);
    compile_scope s = closed_scope();
    s.slot = [&](const std::string& n) {
      auto it = slots.find(n);
      return it == slots.end() ? -1 : it->second;
    };
    s.result_slot = static_cast<int>(fn.params.size());
    int first = s.result_slot + 1;
    d.frame_size = first;
    auto grow = [&](const compiled_expr& c) { d.frame_size = std::max(d.frame_size, c.frame_size()); };
    for (const pvl_clause& c : fn.requires_) grow(d.req.emplace_back(compiled_expr::compile(c.e, s, first)));
    for (const pvl_clause& c : fn.ensures) grow(d.ens.emplace_back(compiled_expr::compile(c.e, s, first)));
    if (fn.body.defined()) {
      d.body = compiled_expr::compile(fn.body, s, first);
      grow(d.body);
    } else if (v_.buffers.count(fn.name)) {
      d.buffer = true;
    } else if (bound_fns_.count(fn.name)) {
      d.has_bound = true;
      d.bound = bound_fns_.at(fn.name);
    } else {
      throw eval_error("error", "no interpretation for abstract function '" + fn.name + "'");
    }
    for (const std::string& m : fn.decreases) d.measure.push_back(slots.at(m));
  }

  int64_t read_buffer(const pvl_function& fn, info& d, const std::vector<int64_t>& args) {
    const array_value& a = v_.buffers.at(fn.name);
    if (!a.contains(args.data(), args.size())) {
      std::string pt;
      for (size_t i = 0; i < args.size(); ++i) pt += (i ? ", " : "") + std::to_string(args[i]);
      throw eval_error("outOfBounds", "read of " + fn.name + "(" + pt + ") outside its domain");
    }
    int64_t val = a.data[a.offset(args.data())];
    std::vector<int64_t> frame(d.frame_size + 1, 0);
    for (size_t i = 0; i < args.size(); ++i) frame[i] = args[i];
    frame[args.size()] = val;
    for (size_t c = 0; c < d.ens.size(); ++c) {
      if (!d.ens[c].holds(*this, frame.data())) {
        fail("error", "input value violates the requires of " + fn.name, fn.ensures[c], fn, args);
      }
    }
    return val;
  }

  void check_measure(int id, const std::vector<int64_t>& from, const std::vector<int64_t>& to) {
    const info& d = infos_[id];
    const pvl_function& fn = prog_.decls[id];
    bool decreased = false;
    for (int m : d.measure) {
      if (to[m] < from[m]) {
        decreased = true;
        break;
      }
      if (to[m] > from[m]) break;
    }
    bool bounded = true;
    for (int m : d.measure) bounded = bounded && to[m] >= fn.domain[m].first;
    if (decreased && bounded) return;
    std::string text;
    for (size_t i = 0; i < fn.decreases.size(); ++i) text += (i ? ", " : "") + fn.decreases[i];
    fail("invariantViolation", "recursive call of " + fn.name + " does not decrease its measure",
         pvl_clause{make_var("decreases " + text), false, {}}, fn, to);
  }
};

void for_each_point(const std::vector<std::pair<int64_t, int64_t>>& box,
                    const std::function<void(const std::vector<int64_t>&)>& body) {
  for (const auto& [lo, hi] : box) {
    if (hi < lo) return;
  }
  std::vector<int64_t> pt;
  for (const auto& r : box) pt.push_back(r.first);
  while (true) {
    body(pt);
    size_t k = 0;
    while (k < pt.size()) {
      if (++pt[k] <= box[k].second) break;
      pt[k] = box[k].first;
      ++k;
    }
    if (k == pt.size()) return;
  }
}

std::string kind_of(const eval_error& e) {
  return e.kind() == "quantifierLimit" ? "error" : e.kind();
}

}  // namespace

check_report check_frontend(const encoded_program& prog, const pipeline& p, const valuation& v,
                            const frontend_options& opts) {
  auto t0 = std::chrono::steady_clock::now();
  check_report rep;
  rep.pipeline = p.name;
  auto add = [&](finding f) {
    if (static_cast<int>(rep.findings.size()) < opts.max_findings) rep.findings.push_back(std::move(f));
  };

  std::map<std::string, array_value> ref;
  try {
    ref = eval_reference(p, v);
  } catch (const eval_error& e) {
    add({kind_of(e), "reference evaluation failed: " + std::string(e.what()), {}, "", {}, "", 0, 0, 0, {}, 0, 0});
  }

  frontend_ctx ctx(prog, p, v);
  ctx.instantiation_limit = opts.instantiation_limit;
  bool aborted = false;
  for (size_t id = 0; id < prog.decls.size() && !aborted; ++id) {
    const pvl_function& fn = prog.decls[id];
    if (!fn.body.defined() || fn.domain.size() != fn.params.size()) continue;
    // The function holding a func's final value is compared with the reference.
    const func* owner = p.find_func(fn.name);
    const array_value* want = nullptr;
    if (owner && ref.count(fn.name)) want = &ref.at(fn.name);
    bool mismatch_reported = false;
    try {
      for_each_point(fn.domain, [&](const std::vector<int64_t>& pt) {
        std::optional<int64_t> got;
        try {
          got = ctx.call(static_cast<int>(id), pt, true);
        } catch (const abandon&) {
          return;
        }
        if (got && want && !mismatch_reported) {
          int64_t w = want->at(pt);
          if (*got != w) {
            mismatch_reported = true;
            finding f;
            f.kind = "mismatch";
            f.message = "encoded " + fn.name + " differs from the algorithm";
            f.point = pt;
            f.got = *got;
            f.want = w;
            add(f);
          }
        }
      });
    } catch (const eval_error& e) {
      finding f;
      f.kind = kind_of(e);
      f.message = "while evaluating " + fn.name + ": " + e.what();
      add(f);
      aborted = e.kind() == "quantifierLimit";
    }
  }

  if (!aborted) {
    compile_scope s = ctx.closed_scope();
    try {
      bool pre = true;
      std::vector<int64_t> frame;
      for (const pvl_clause& c : prog.lemma.requires_) {
        compiled_expr ce = compiled_expr::compile(c.e, s, 0);
        frame.assign(ce.frame_size() + 1, 0);
        pre = pre && ce.holds(ctx, frame.data());
      }
      if (pre) {
        for (const pvl_clause& c : prog.lemma.ensures) {
          compiled_expr ce = compiled_expr::compile(c.e, s, 0);
          frame.assign(ce.frame_size() + 1, 0);
          if (!ce.holds(ctx, frame.data())) {
            finding f;
            f.kind = "invariantViolation";
            f.message = "pipeline postcondition does not hold";
            f.span = c.span;
            f.annotation = print(c.e, dialect::pvl);
            add(f);
          }
        }
      }
    } catch (const eval_error& e) {
      finding f;
      f.kind = kind_of(e);
      f.message = std::string("while evaluating the lemma: ") + e.what();
      add(f);
    } catch (const abandon&) {
    }
  }

  for (const contract_failure& c : ctx.failures) {
    finding f;
    f.kind = c.kind;
    f.message = c.message;
    f.span = c.span;
    f.annotation = c.annotation;
    f.state = c.state;
    add(f);
  }
  rep.stats.points = ctx.points;
  rep.stats.instantiations = ctx.instantiations;
  rep.stats.millis = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace minisched

#include <chrono>
#include <limits>
#include <set>
#include <unordered_map>

#include "minisched/checker.h"
#include "minisched/error.h"
#include "minisched/eval.h"

namespace minisched {

namespace {

constexpr int64_t int32_lo = std::numeric_limits<int32_t>::min();
constexpr int64_t int32_hi = std::numeric_limits<int32_t>::max();

// Thrown to stop the run once a fault or enough findings were recorded.
struct abort_run {};

using key_t = uint64_t;

key_t key_of(int alloc, int64_t idx) { return (static_cast<uint64_t>(alloc) << 40) | static_cast<uint64_t>(idx); }

bool has_perm(const expr& e) {
  bool found = false;
  visit(e, [&](const expr& x) {
    if (x->kind == expr_kind::perm) found = true;
    return !found;
  });
  return found;
}

struct ann {
  expr src;
  compiled_expr code;
  bool perm = false;
  bool shared = false;  // parallel loops: the same claim in every iteration
  std::set<std::string> free;

  // What a result depends on: loop var slots (for value annotations also the
  // slots the framing permissions depend on) and buffers read through loads.
  std::vector<int> slots;
  std::vector<int> reads;
  std::vector<int> targets;  // permission annotations: buffers the permissions are for

  // Last successful evaluation. A value annotation remembers that it held;
  // a permission annotation remembers what it contributed.
  mutable bool cached = false;
  mutable std::vector<int64_t> key;
  mutable std::vector<std::pair<key_t, rational>> contributed;
};

struct node_code {
  compiled_expr min, index, value, cond;
  int slot = -1;
  int alloc = -1;
  // Serial loops: invariants. Parallel loops: pre (requires + context) and
  // post (ensures + context).
  std::vector<ann> inv, pre, post;
  bool perms_vary = false;  // permission annotations mention the loop var
};


struct perm_frame {
  std::unordered_map<key_t, rational> held;
  std::set<int> owned;
  const perm_frame* base = nullptr;  // claims shared by all iterations of a parallel loop

  rational frac(key_t k) const {
    auto it = held.find(k);
    if (base) {
      rational b = base->held_frac(k);
      if (it != held.end()) return it->second + b;
      if (b > rational(0)) return b;
    } else if (it != held.end()) {
      return it->second;
    }
    if (owned.count(static_cast<int>(k >> 40))) return rational(1);
    return rational(0);
  }

  rational held_frac(key_t k) const {
    auto it = held.find(k);
    return it == held.end() ? rational(0) : it->second;
  }
};

struct runtime_buffer {
  std::string name;
  std::vector<int64_t> data;
  std::vector<uint8_t> init;
  uint64_t version = 0;  // bumped by every store and allocation
  bool live = false;
  bool input = false;
};

class engine : public eval_context {
public:
  engine(const lowered_program& prog, const valuation& v, const backend_options& opts)
      : prog_(prog), v_(v), opts_(opts) {
    for (const alloc_info& a : prog.inputs) add_buffer(a, true);
    add_buffer(prog.output, false);
    walk(prog.root, [&](const lnode& n) {
      if (n.kind == node_kind::allocate) add_buffer(n.alloc, false);
      if (n.kind == node_kind::loop && !slot_.count(n.var)) {
        int s = static_cast<int>(slot_.size());
        slot_[n.var] = s;
      }
    });
    nslots_ = static_cast<int>(slot_.size());
    scope_.slot = [this](const std::string& n) {
      auto it = slot_.find(n);
      return it == slot_.end() ? -1 : it->second;
    };
    scope_.callee = [this](const expr& e) { return callee_of(e); };
    scope_.bound = [this](const expr& e) { return prog_.sp.p.bound_value(e->name, e->dim, e->is_max); };
    instantiation_limit = opts.instantiation_limit;
    walk(prog.root, [&](const lnode& n) { compile_node(n); });
    contract_pre_ = compile_anns(prog.contract.requires_, prog.contract.context);
    contract_post_ = compile_anns(prog.contract.ensures, prog.contract.context);
    add_frame_slots({&contract_pre_, &contract_post_});
    frame_.assign(std::max(frame_size_, nslots_) + 1, 0);
  }

  check_report run() {
    auto t0 = std::chrono::steady_clock::now();
    rep_.pipeline = prog_.sp.p.name;
    try {
      for (const alloc_info& a : prog_.inputs) load_input(a);
      runtime_buffer& out = bufs_[alloc_id_.at(prog_.output.func)];
      out.live = true;
      if (opts_.annotations) {
        perm_frame root;
        frames_.push_back(&root);
        collect(contract_pre_, root, nullptr);
        check_values(contract_pre_, "pipeline requires", &root);
        exec(prog_.root);
        check_values(contract_post_, "pipeline ensures", &root);
        frames_.pop_back();
      } else {
        exec(prog_.root);
      }
      if (opts_.compare_reference) compare();
    } catch (const abort_run&) {
    } catch (const eval_error& e) {
      fault(e.kind(), e.what());
    } catch (const error& e) {
      finding f;
      f.kind = "error";
      f.message = e.what();
      add(std::move(f));
    }
    rep_.stats.millis = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return rep_;
  }

  array_value output() const {
    const runtime_buffer& b = bufs_[alloc_id_.at(prog_.output.func)];
    std::vector<interval> dims;
    for (size_t i = 0; i < prog_.output.extent.size(); ++i) {
      dims.push_back({prog_.output.base[i]->value, prog_.output.extent[i]});
    }
    array_value a(prog_.output.func, dims);
    a.data = b.data;
    return a;
  }

  int64_t invoke(int id, const int64_t* args, size_t n) override {
    const callee& c = callees_[id];
    switch (c.kind) {
    case callee::load: {
      runtime_buffer& b = bufs_[c.alloc];
      int64_t idx = args[0];
      if (!b.live) throw eval_error("outOfBounds", "read of '" + b.name + "' outside its allocation");
      if (idx < 0 || idx >= static_cast<int64_t>(b.data.size())) {
        fault_loc_ = {c.alloc, idx};
        throw eval_error("outOfBounds", "read of " + b.name + "[" + std::to_string(idx) + "]");
      }
      if (!b.init[idx]) {
        fault_loc_ = {c.alloc, idx};
        if (reading_annotation_) throw eval_error("annotationRead", "reads unwritten " + b.name + "[" + std::to_string(idx) + "]");
        throw eval_error("uninitializedRead", "read of unwritten " + b.name + "[" + std::to_string(idx) + "]");
      }
      if (read_frame_) {
        key_t k = key_of(c.alloc, idx);
        if (read_frame_->frac(k) <= rational(0)) {
          fault_loc_ = {c.alloc, idx};
          throw eval_error("missingPermission", "no permission to read " + b.name + "[" + std::to_string(idx) + "]");
        }
      }
      return b.data[idx];
    }
    case callee::abstract: {
      runtime_buffer& b = bufs_[c.alloc];
      int64_t idx = args[0];
      if (idx < 0 || idx >= static_cast<int64_t>(b.data.size())) {
        throw eval_error("outOfBounds", c.name + "(" + std::to_string(idx) + ") outside " + b.name);
      }
      return b.data[idx];
    }
    case callee::tdiv: {
      if (n != 2 || args[1] == 0) return 0;
      return args[0] / args[1];
    }
    }
    return 0;
  }

  bool perm(int id, const int64_t* args, size_t n, const rational& frac) override {
    (void)n;
    if (!collecting_) return true;
    const callee& c = callees_[id];
    int64_t idx = args[0];
    if (idx < 0 || idx >= static_cast<int64_t>(bufs_[c.alloc].data.size())) {
      collect_oob_ = true;
      collect_loc_ = {c.alloc, idx};
      return true;
    }
    key_t k = key_of(c.alloc, idx);
    rational& r = collecting_->held[k];
    r = r + frac;
    contributed_.emplace_back(k, frac);
    return true;
  }

private:
  struct callee {
    enum kind_t { load, abstract, tdiv } kind = load;
    int alloc = -1;
    std::string name;
  };

  const lowered_program& prog_;
  const valuation& v_;
  backend_options opts_;
  check_report rep_;

  std::map<std::string, int> slot_;
  int nslots_ = 0;
  int frame_size_ = 0;
  std::vector<int64_t> frame_;
  compile_scope scope_;
  std::vector<callee> callees_;
  std::map<std::string, int> callee_ids_;
  std::map<std::string, int> alloc_id_;
  std::vector<runtime_buffer> bufs_;
  std::map<const lnode*, node_code> code_;
  std::vector<ann> contract_pre_, contract_post_;

  std::vector<perm_frame*> frames_;
  std::vector<const lnode*> loops_;
  perm_frame* collecting_ = nullptr;
  std::vector<std::pair<key_t, rational>> contributed_;
  std::vector<int64_t> key_scratch_;
  bool collect_oob_ = false;
  std::pair<int, int64_t> collect_loc_;
  const perm_frame* read_frame_ = nullptr;
  bool reading_annotation_ = false;
  std::pair<int, int64_t> fault_loc_{-1, 0};

  void add_buffer(const alloc_info& a, bool input) {
    if (alloc_id_.count(a.func)) return;
    runtime_buffer b;
    b.name = a.func;
    b.input = input;
    b.data.assign(a.size, 0);
    b.init.assign(a.size, 0);
    alloc_id_[a.func] = static_cast<int>(bufs_.size());
    bufs_.push_back(std::move(b));
  }

  void load_input(const alloc_info& a) {
    runtime_buffer& b = bufs_[alloc_id_.at(a.func)];
    auto it = v_.buffers.find(a.func);
    if (it == v_.buffers.end()) throw error("error", "no contents for input '" + a.func + "'");
    if (it->second.data.size() != b.data.size()) throw error("error", "input '" + a.func + "' has the wrong size");
    b.data = it->second.data;
    b.init.assign(b.data.size(), 1);
    b.live = true;
  }

  int callee_of(const expr& e) {
    std::string key;
    callee c;
    if (e->kind == expr_kind::load) {
      auto it = alloc_id_.find(e->name);
      if (it == alloc_id_.end()) return -1;
      key = "load:" + e->name;
      c.kind = callee::load;
      c.alloc = it->second;
    } else if (e->kind == expr_kind::call) {
      key = "call:" + e->name;
      c.name = e->name;
      if (e->name == "tdiv") {
        c.kind = callee::tdiv;
      } else {
        int found = -1;
        for (size_t i = 0; i < prog_.abstract_inputs.size(); ++i) {
          if (prog_.abstract_inputs[i] == e->name) found = static_cast<int>(i);
        }
        if (found < 0) return -1;
        c.kind = callee::abstract;
        c.alloc = alloc_id_.at(prog_.inputs[found].func);
      }
    } else {
      return -1;
    }
    auto it = callee_ids_.find(key);
    if (it != callee_ids_.end()) return it->second;
    int id = static_cast<int>(callees_.size());
    callees_.push_back(c);
    callee_ids_[key] = id;
    return id;
  }

  compiled_expr compile(const expr& e) {
    compiled_expr c = compiled_expr::compile(e, scope_, nslots_);
    frame_size_ = std::max(frame_size_, c.frame_size());
    return c;
  }

  std::vector<ann> compile_anns(const std::vector<expr>& a, const std::vector<expr>& b) {
    std::vector<ann> out;
    for (const auto* list : {&a, &b}) {
      for (const expr& e : *list) {
        ann x;
        x.src = e;
        x.code = compile(e);
        x.perm = has_perm(e);
        for (const std::string& v : free_vars(e)) {
          x.free.insert(v);
          auto it = slot_.find(v);
          if (it != slot_.end()) x.slots.push_back(it->second);
        }
        std::set<int> reads, targets;
        std::function<bool(const expr&)> scan = [&](const expr& y) {
          if (y->kind == expr_kind::perm && y->args[0]->kind == expr_kind::load) {
            // The location is not read; only its index is.
            auto it = alloc_id_.find(y->args[0]->name);
            if (it != alloc_id_.end()) targets.insert(it->second);
            visit(y->args[0]->args[0], scan);
            return false;
          }
          if (y->kind == expr_kind::load) {
            auto it = alloc_id_.find(y->name);
            if (it != alloc_id_.end()) reads.insert(it->second);
          }
          return true;
        };
        visit(e, scan);
        x.reads.assign(reads.begin(), reads.end());
        x.targets.assign(targets.begin(), targets.end());
        out.push_back(std::move(x));
      }
    }
    return out;
  }

  void compile_node(const lnode& n) {
    node_code c;
    switch (n.kind) {
    case node_kind::loop:
      c.min = compile(n.min);
      c.slot = slot_.at(n.var);
      if (opts_.annotations) {
        if (n.lkind == loop_kind::parallel) {
          c.pre = compile_anns(n.anns.requires_, n.anns.context);
          c.post = compile_anns(n.anns.ensures, n.anns.context);
        } else {
          c.inv = compile_anns(n.anns.invariants, n.anns.context);
        }
        for (const auto* list : {&c.inv, &c.pre}) {
          for (const ann& a : *list) {
            if (a.perm && a.free.count(n.var)) c.perms_vary = true;
          }
        }
        for (ann& a : c.pre) a.shared = a.perm && !a.free.count(n.var) && a.reads.empty();
        add_frame_slots({&c.inv, &c.pre, &c.post});
      }
      break;
    case node_kind::store:
      c.index = compile(n.stmt.index);
      c.value = compile(n.stmt.flat_value);
      if (n.stmt.flat_cond.defined()) c.cond = compile(n.stmt.flat_cond);
      c.alloc = alloc_id_.at(n.stmt.func);
      break;
    case node_kind::allocate: c.alloc = alloc_id_.at(n.func); break;
    default: break;
    }
    code_[&n] = std::move(c);
  }

  // Value annotations read through a frame built from the permission
  // annotations next to them, so their cached results depend on the slots of
  // the ones covering a buffer they read.
  static void add_frame_slots(std::initializer_list<std::vector<ann>*> lists) {
    std::vector<const ann*> perms;
    for (auto* l : lists) {
      for (const ann& a : *l) {
        if (a.perm) perms.push_back(&a);
      }
    }
    for (auto* l : lists) {
      for (ann& a : *l) {
        if (a.perm) continue;
        std::set<int> all(a.slots.begin(), a.slots.end());
        for (const ann* p : perms) {
          bool covers = std::any_of(p->targets.begin(), p->targets.end(), [&](int t) {
            return std::find(a.reads.begin(), a.reads.end(), t) != a.reads.end();
          });
          if (covers) all.insert(p->slots.begin(), p->slots.end());
        }
        a.slots.assign(all.begin(), all.end());
      }
    }
  }

  void cache_key(const ann& a, std::vector<int64_t>& k) const {
    k.clear();
    for (int s : a.slots) k.push_back(frame_[s]);
    for (int r : a.reads) k.push_back(static_cast<int64_t>(bufs_[r].version));
  }

  std::map<std::string, int64_t> state() const {
    std::map<std::string, int64_t> s;
    for (const lnode* l : loops_) s[l->var] = frame_[slot_.at(l->var)];
    return s;
  }

  void add(finding f) {
    if (f.state.empty()) f.state = state();
    rep_.findings.push_back(std::move(f));
    if (static_cast<int>(rep_.findings.size()) >= opts_.max_findings) throw abort_run{};
  }

  // A fault that ends the run.
  void fault(const std::string& kind, const std::string& msg) {
    finding f;
    f.kind = kind;
    f.message = msg;
    if (fault_loc_.first >= 0) {
      f.alloc = bufs_[fault_loc_.first].name;
      f.location = fault_loc_.second;
    }
    f.state = state();
    rep_.findings.push_back(std::move(f));
  }

  enum class part { all, shared, per_iteration };

  void collect(const std::vector<ann>& anns, perm_frame& into, const std::string* where, part which = part::all) {
    for (const ann& a : anns) {
      if (!a.perm) continue;
      if (which != part::all && a.shared != (which == part::shared)) continue;
      cache_key(a, key_scratch_);
      if (a.cached && a.key == key_scratch_) {
        for (const auto& [k, fr] : a.contributed) {
          rational& r = into.held[k];
          r = r + fr;
        }
        continue;
      }
      a.cached = false;
      contributed_.clear();
      collecting_ = &into;
      collect_oob_ = false;
      instantiations = 0;
      try {
        a.code.eval(*this, frame_.data());
      } catch (const eval_error& e) {
        collecting_ = nullptr;
        finding f;
        f.kind = e.kind() == "quantifierLimit" ? "error" : "invariantViolation";
        f.message = std::string("cannot evaluate permission: ") + e.what();
        f.annotation = print(a.src);
        add(std::move(f));
        continue;
      }
      collecting_ = nullptr;
      rep_.stats.instantiations += instantiations;
      if (!collect_oob_) {
        a.cached = true;
        a.key = key_scratch_;
        a.contributed = contributed_;
      }
      if (collect_oob_) {
        finding f;
        f.kind = "outOfBounds";
        f.message = "permission for a location outside " + bufs_[collect_loc_.first].name +
                    (where ? " at " + *where : std::string());
        f.alloc = bufs_[collect_loc_.first].name;
        f.location = collect_loc_.second;
        f.annotation = print(a.src);
        add(std::move(f));
      }
    }
  }

  void check_values(const std::vector<ann>& anns, const std::string& where, const perm_frame* framing) {
    ++rep_.stats.boundaries;
    for (const ann& a : anns) {
      if (a.perm) continue;
      cache_key(a, key_scratch_);
      if (a.cached && a.key == key_scratch_) continue;
      a.cached = false;
      instantiations = 0;
      read_frame_ = framing;
      reading_annotation_ = true;
      bool ok = true;
      std::string why;
      std::string kind = "invariantViolation";
      try {
        ok = a.code.holds(*this, frame_.data());
      } catch (const eval_error& e) {
        ok = false;
        why = e.what();
        if (e.kind() == "missingPermission") kind = "missingPermission";
        if (e.kind() == "quantifierLimit") kind = "error";
        if (e.kind() == "overflow") kind = "overflow";
      }
      read_frame_ = nullptr;
      reading_annotation_ = false;
      rep_.stats.instantiations += instantiations;
      if (ok) {
        a.cached = true;
        a.key = key_scratch_;
      }
      if (!ok) {
        finding f;
        f.kind = kind;
        f.message = where + (why.empty() ? " does not hold" : ": " + why);
        f.annotation = print(a.src);
        if (kind == "missingPermission" && fault_loc_.first >= 0) {
          f.alloc = bufs_[fault_loc_.first].name;
          f.location = fault_loc_.second;
        }
        add(std::move(f));
      }
    }
  }

  // Every permission in `inner` must be available in `outer`.
  void check_subset(const perm_frame& inner, const perm_frame& outer, const std::string& where) {
    for (const auto& [k, fr] : inner.held) {
      if (outer.frac(k) < fr) {
        finding f;
        f.kind = "missingPermission";
        f.alloc = bufs_[k >> 40].name;
        f.location = static_cast<int64_t>(k & ((uint64_t(1) << 40) - 1));
        f.message = where + " claims " + fr.str() + " of " + f.alloc + "[" + std::to_string(f.location) +
                    "] but holds " + outer.frac(k).str();
        add(std::move(f));
        return;
      }
    }
  }

  std::string loop_where(const lnode& n) const { return "loop " + n.label + " of " + n.func; }

  void exec(const lnode& n) {
    switch (n.kind) {
    case node_kind::block:
    case node_kind::produce:
    case node_kind::consume:
      for (const lnode& c : n.body) exec(c);
      return;
    case node_kind::allocate: {
      runtime_buffer& b = bufs_[code_.at(&n).alloc];
      std::fill(b.init.begin(), b.init.end(), 0);
      b.live = true;
      ++b.version;
      int id = code_.at(&n).alloc;
      if (!frames_.empty()) frames_.back()->owned.insert(id);
      for (const lnode& c : n.body) exec(c);
      if (!frames_.empty()) frames_.back()->owned.erase(id);
      b.live = false;
      ++b.version;
      return;
    }
    case node_kind::store: exec_store(n); return;
    case node_kind::loop: exec_loop(n); return;
    }
  }

  void exec_store(const lnode& n) {
    const node_code& c = code_.at(&n);
    ++rep_.stats.points;
    perm_frame* fr = frames_.empty() ? nullptr : frames_.back();
    read_frame_ = fr;
    if (c.cond.defined() && !c.cond.holds(*this, frame_.data())) {
      read_frame_ = nullptr;
      return;
    }
    int64_t idx = c.index.eval(*this, frame_.data());
    runtime_buffer& b = bufs_[c.alloc];
    if (!b.live || idx < 0 || idx >= static_cast<int64_t>(b.data.size())) {
      read_frame_ = nullptr;
      fault_loc_ = {c.alloc, idx};
      throw eval_error("outOfBounds", "write of " + b.name + "[" + std::to_string(idx) + "]");
    }
    int64_t val = c.value.eval(*this, frame_.data());
    read_frame_ = nullptr;
    if (val < int32_lo || val > int32_hi) {
      fault_loc_ = {c.alloc, idx};
      throw eval_error("overflow", b.name + "[" + std::to_string(idx) + "] = " + std::to_string(val));
    }
    if (fr && fr->frac(key_of(c.alloc, idx)) < rational(1)) {
      finding f;
      f.kind = "missingPermission";
      f.alloc = b.name;
      f.location = idx;
      f.message = "write of " + b.name + "[" + std::to_string(idx) + "] without full permission";
      add(std::move(f));
    }
    b.data[idx] = val;
    b.init[idx] = 1;
    ++b.version;
  }

  // Iterations of a parallel loop run one after another, each in its own
  // frame. Claims that are the same in every iteration are charged once for
  // all of them; the per-iteration frames see them through `base`. When those
  // alone over-claim, every iteration is charged in full so that the report
  // names the iterations involved.
  void exec_parallel(const lnode& n, const node_code& c, int64_t lo, const perm_frame& outer,
                     const std::string& where) {
    int64_t& var = frame_[c.slot];
    var = lo;
    perm_frame shared;
    collect(c.pre, shared, &where, part::shared);
    bool fast = true;
    for (const auto& [k, fr] : shared.held) {
      if (outer.frac(k) < fr * n.extent) {
        fast = false;
        break;
      }
    }
    std::unordered_map<key_t, rational> total;
    std::unordered_map<key_t, int64_t> first;
    for (int64_t i = lo; i < lo + n.extent; ++i) {
      var = i;
      perm_frame it;
      if (fast) {
        it.base = &shared;
        collect(c.pre, it, &where, part::per_iteration);
      } else {
        collect(c.pre, it, &where);
      }
      bool reported = false;
      for (const auto& [k, own] : it.held) {
        rational& t = total[k];
        t = t + own;
        auto fi = first.emplace(k, i).first;
        rational all_iters = fast ? shared.held_frac(k) * n.extent : rational(0);
        if (!reported && t + all_iters > outer.frac(k)) {
          rational fr = fast ? own + shared.held_frac(k) : own;
          finding f;
          f.alloc = bufs_[k >> 40].name;
          f.location = static_cast<int64_t>(k & ((uint64_t(1) << 40) - 1));
          if (fr > outer.frac(k) || fi->second == i) {
            f.kind = "missingPermission";
            f.message = where + " iteration " + std::to_string(i) + " claims " + fr.str() + " of " + f.alloc + "[" +
                        std::to_string(f.location) + "]";
          } else {
            f.kind = "race";
            f.iter_a = fi->second;
            f.iter_b = i;
            f.message = where + " iterations " + std::to_string(fi->second) + " and " + std::to_string(i) +
                        " both claim " + f.alloc + "[" + std::to_string(f.location) + "]";
          }
          add(std::move(f));
          reported = true;
        }
      }
      check_values(c.pre, where + " precondition", &it);
      frames_.push_back(&it);
      for (const lnode& b : n.body) exec(b);
      frames_.pop_back();
      check_values(c.post, where + " postcondition", &it);
    }
  }

  void exec_loop(const lnode& n) {
    const node_code& c = code_.at(&n);
    int64_t lo = c.min.eval(*this, frame_.data());
    int64_t& var = frame_[c.slot];
    loops_.push_back(&n);
    bool annotated = opts_.annotations && !frames_.empty() && n.lkind != loop_kind::unrolled && !n.anns.empty();
    if (!annotated) {
      for (int64_t i = lo; i < lo + n.extent; ++i) {
        var = i;
        for (const lnode& b : n.body) exec(b);
      }
      loops_.pop_back();
      return;
    }
    perm_frame& outer = *frames_.back();
    std::string where = loop_where(n);
    if (n.lkind == loop_kind::parallel) {
      exec_parallel(n, c, lo, outer, where);
      loops_.pop_back();
      return;
    }
    perm_frame inner;
    var = lo;
    collect(c.inv, inner, &where);
    check_subset(inner, outer, where);
    check_values(c.inv, where + " invariant on entry", &inner);
    for (int64_t i = lo; i < lo + n.extent; ++i) {
      var = i;
      if (c.perms_vary && i != lo) {
        inner.held.clear();
        collect(c.inv, inner, &where);
        check_subset(inner, outer, where);
      }
      if (i != lo) check_values(c.inv, where + " invariant", &inner);
      frames_.push_back(&inner);
      for (const lnode& b : n.body) exec(b);
      frames_.pop_back();
    }
    var = lo + n.extent;
    if (c.perms_vary) {
      inner.held.clear();
      collect(c.inv, inner, &where);
    }
    check_values(c.inv, where + " invariant on exit", &inner);
    loops_.pop_back();
  }

  void compare() {
    auto ref = eval_reference(prog_.sp.p, v_);
    const array_value& want = ref.at(prog_.output.func);
    const runtime_buffer& got = bufs_[alloc_id_.at(prog_.output.func)];
    int reported = 0;
    for (size_t i = 0; i < want.data.size() && reported < 3; ++i) {
      if (got.init[i] && got.data[i] == want.data[i]) continue;
      finding f;
      f.kind = "mismatch";
      std::vector<int64_t> pt;
      size_t r = i;
      for (const interval& d : want.dims) {
        pt.push_back(d.min + static_cast<int64_t>(r % d.extent));
        r /= d.extent;
      }
      f.point = pt;
      f.got = got.data[i];
      f.want = want.data[i];
      f.alloc = got.name;
      f.location = static_cast<int64_t>(i);
      f.message = got.init[i] ? "output differs from the reference" : "output point never written";
      f.state.clear();
      rep_.findings.push_back(std::move(f));
      ++reported;
    }
  }
};

}  // namespace

backend_run run_lowered(const lowered_program& prog, const valuation& v) {
  backend_options o;
  o.annotations = false;
  o.compare_reference = false;
  engine e(prog, v, o);
  backend_run r;
  r.report = e.run();
  r.output = e.output();
  return r;
}

check_report check_annotations(const lowered_program& prog, const valuation& v, const backend_options& opts) {
  engine e(prog, v, opts);
  return e.run();
}

}  // namespace minisched

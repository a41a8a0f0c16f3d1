#include "minisched/eval.h"

#include <limits>

namespace minisched {

int64_t checked_add(int64_t a, int64_t b) {
  int64_t r;
  if (__builtin_add_overflow(a, b, &r)) throw eval_error("overflow", "integer overflow in addition");
  return r;
}

int64_t checked_sub(int64_t a, int64_t b) {
  int64_t r;
  if (__builtin_sub_overflow(a, b, &r)) throw eval_error("overflow", "integer overflow in subtraction");
  return r;
}

int64_t checked_mul(int64_t a, int64_t b) {
  int64_t r;
  if (__builtin_mul_overflow(a, b, &r)) throw eval_error("overflow", "integer overflow in multiplication");
  return r;
}

class compiler {
public:
  compiler(compiled_expr& out, const compile_scope& scope, int next) : out_(out), scope_(scope), next_(next) {}

  int emit(const expr& e) {
    using op = compiled_expr::op;
    compiled_expr::node n;
    switch (e->kind) {
    case expr_kind::constant:
      n.o = op::konst;
      n.v = e->value;
      break;
    case expr_kind::var: {
      int s = lookup(e->name);
      if (s < 0) throw eval_error("error", "unbound variable '" + e->name + "'");
      n.o = op::slot;
      n.v = s;
      break;
    }
    case expr_kind::result:
      if (scope_.result_slot < 0) throw eval_error("error", "\\result outside a contract");
      n.o = op::slot;
      n.v = scope_.result_slot;
      break;
    case expr_kind::bound_ref: {
      auto v = scope_.bound ? scope_.bound(e) : std::nullopt;
      if (!v) throw eval_error("error", "unresolved bound " + e->name + "." + e->dim);
      n.o = op::konst;
      n.v = *v;
      break;
    }
    case expr_kind::func_call:
    case expr_kind::buf_call:
    case expr_kind::call:
    case expr_kind::load: {
      int id = scope_.callee ? scope_.callee(e) : -1;
      if (id < 0) throw eval_error("error", "unknown callee '" + e->name + "'");
      n.o = op::invoke;
      n.v = id;
      for (const expr& a : e->args) n.kids.push_back(emit(a));
      break;
    }
    case expr_kind::perm: {
      const expr& loc = e->args[0];
      int id = scope_.callee ? scope_.callee(loc) : -1;
      if (id < 0) throw eval_error("error", "unknown permission location '" + loc->name + "'");
      n.o = op::perm;
      n.v = id;
      n.frac = perm_fraction(e);
      for (const expr& a : loc->args) n.kids.push_back(emit(a));
      break;
    }
    case expr_kind::unary:
      n.o = e->uop == unop::neg ? op::neg : op::not_;
      n.kids.push_back(emit(e->args[0]));
      break;
    case expr_kind::binary: {
      static const op table[] = {op::add, op::sub, op::mul, op::div, op::mod, op::min, op::max, op::lt,
                                 op::le,  op::gt,  op::ge,  op::eq,  op::ne,  op::and_, op::or_, op::implies};
      n.o = table[static_cast<int>(e->bop)];
      n.kids.push_back(emit(e->args[0]));
      n.kids.push_back(emit(e->args[1]));
      break;
    }
    case expr_kind::select:
      n.o = op::select;
      for (const expr& a : e->args) n.kids.push_back(emit(a));
      break;
    case expr_kind::forall: {
      n.o = op::forall;
      std::vector<std::pair<std::string, int>> saved;
      for (const quant_var& q : e->qvars) {
        // Bounds may refer to earlier quantified variables.
        n.kids.push_back(emit(q.lo));
        n.kids.push_back(emit(q.hi));
        int s = next_++;
        out_.frame_size_ = std::max(out_.frame_size_, next_);
        auto it = bound_.find(q.name);
        saved.emplace_back(q.name, it == bound_.end() ? -2 : it->second);
        bound_[q.name] = s;
        n.qslots.push_back(s);
      }
      n.kids.push_back(emit(e->args[0]));
      for (auto it = saved.rbegin(); it != saved.rend(); ++it) {
        if (it->second == -2) bound_.erase(it->first);
        else bound_[it->first] = it->second;
      }
      break;
    }
    }
    out_.nodes_.push_back(std::move(n));
    return static_cast<int>(out_.nodes_.size()) - 1;
  }

private:
  compiled_expr& out_;
  const compile_scope& scope_;
  int next_;
  std::map<std::string, int> bound_;

  int lookup(const std::string& name) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    return scope_.slot ? scope_.slot(name) : -1;
  }
};

compiled_expr compiled_expr::compile(const expr& e, const compile_scope& scope, int first_free_slot) {
  compiled_expr out;
  out.frame_size_ = first_free_slot;
  compiler c(out, scope, first_free_slot);
  out.root_ = c.emit(e);
  return out;
}

int64_t compiled_expr::eval(eval_context& ctx, int64_t* frame) const { return eval_node(root_, ctx, frame); }

bool compiled_expr::eval_forall(const node& n, size_t k, eval_context& ctx, int64_t* frame) const {
  if (k == n.qslots.size()) {
    if (++ctx.instantiations > ctx.instantiation_limit) {
      throw eval_error("quantifierLimit", "quantifier instantiation limit exceeded");
    }
    return eval_node(n.kids.back(), ctx, frame) != 0;
  }
  int64_t lo = eval_node(n.kids[2 * k], ctx, frame);
  int64_t hi = eval_node(n.kids[2 * k + 1], ctx, frame);
  int s = n.qslots[k];
  for (int64_t v = lo; v < hi; ++v) {
    frame[s] = v;
    if (!eval_forall(n, k + 1, ctx, frame)) return false;
  }
  return true;
}

int64_t compiled_expr::eval_node(int i, eval_context& ctx, int64_t* frame) const {
  const node& n = nodes_[i];
  auto kid = [&](int k) { return eval_node(n.kids[k], ctx, frame); };
  switch (n.o) {
  case op::konst: return n.v;
  case op::slot: return frame[n.v];
  case op::invoke:
  case op::perm: {
    int64_t args[8];
    std::vector<int64_t> big;
    int64_t* a = args;
    if (n.kids.size() > 8) {
      big.resize(n.kids.size());
      a = big.data();
    }
    for (size_t k = 0; k < n.kids.size(); ++k) a[k] = eval_node(n.kids[k], ctx, frame);
    if (n.o == op::invoke) return ctx.invoke(static_cast<int>(n.v), a, n.kids.size());
    return ctx.perm(static_cast<int>(n.v), a, n.kids.size(), n.frac) ? 1 : 0;
  }
  case op::neg: return checked_sub(0, kid(0));
  case op::not_: return kid(0) == 0;
  case op::add: return checked_add(kid(0), kid(1));
  case op::sub: return checked_sub(kid(0), kid(1));
  case op::mul: return checked_mul(kid(0), kid(1));
  case op::div: {
    int64_t a = kid(0), b = kid(1);
    if (b == -1 && a == std::numeric_limits<int64_t>::min()) throw eval_error("overflow", "division overflow");
    return hdiv(a, b);
  }
  case op::mod: {
    int64_t a = kid(0), b = kid(1);
    if (b == -1) return 0;
    return hmod(a, b);
  }
  case op::min: return std::min(kid(0), kid(1));
  case op::max: return std::max(kid(0), kid(1));
  case op::lt: return kid(0) < kid(1);
  case op::le: return kid(0) <= kid(1);
  case op::gt: return kid(0) > kid(1);
  case op::ge: return kid(0) >= kid(1);
  case op::eq: return kid(0) == kid(1);
  case op::ne: return kid(0) != kid(1);
  case op::and_: return kid(0) != 0 && kid(1) != 0;
  case op::or_: return kid(0) != 0 || kid(1) != 0;
  case op::implies: return kid(0) == 0 || kid(1) != 0;
  case op::select: return kid(0) != 0 ? kid(1) : kid(2);
  case op::forall: return eval_forall(n, 0, ctx, frame) ? 1 : 0;
  }
  return 0;
}

namespace {

class simple_ctx : public eval_context {
public:
  explicit simple_ctx(const simple_env& env) : env_(env) {}
  std::vector<const expr_node*> callees;

  int64_t invoke(int id, const int64_t* args, size_t n) override {
    if (!env_.call) throw eval_error("error", "no call handler");
    return env_.call(*callees[id], std::vector<int64_t>(args, args + n));
  }

private:
  const simple_env& env_;
};

}  // namespace

int64_t eval_simple(const expr& e, const simple_env& env) {
  simple_ctx ctx(env);
  std::map<std::string, int> slots;
  std::vector<int64_t> frame;
  for (const auto& [k, v] : env.vars) {
    slots[k] = static_cast<int>(frame.size());
    frame.push_back(v);
  }
  compile_scope scope;
  scope.slot = [&](const std::string& n) {
    auto it = slots.find(n);
    return it == slots.end() ? -1 : it->second;
  };
  scope.callee = [&](const expr& c) {
    ctx.callees.push_back(c.get());
    return static_cast<int>(ctx.callees.size()) - 1;
  };
  compiled_expr c = compiled_expr::compile(e, scope, static_cast<int>(frame.size()));
  frame.resize(c.frame_size() + 1);
  return c.eval(ctx, frame.data());
}

}  // namespace minisched

#ifndef MINISCHED_EVAL_H
#define MINISCHED_EVAL_H

#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "minisched/expr.h"

namespace minisched {

// Raised while evaluating. kind is one of overflow, outOfBounds,
// uninitializedRead, quantifierLimit, error.
class eval_error : public std::runtime_error {
public:
  eval_error(std::string kind, const std::string& msg) : std::runtime_error(msg), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

private:
  std::string kind_;
};

int64_t checked_add(int64_t a, int64_t b);
int64_t checked_sub(int64_t a, int64_t b);
int64_t checked_mul(int64_t a, int64_t b);

// Supplies values for the nodes the evaluator cannot compute by itself.
class eval_context {
public:
  virtual ~eval_context() = default;
  // func_call, buf_call, call and load nodes. `id` comes from the compile scope.
  virtual int64_t invoke(int id, const int64_t* args, size_t n) = 0;
  // A permission atom met in a boolean position. Returns its truth value.
  virtual bool perm(int id, const int64_t* args, size_t n, const rational& frac) {
    (void)id, (void)args, (void)n, (void)frac;
    return true;
  }

  // Quantifier instantiations since the last reset. Exceeding the limit throws.
  int64_t instantiations = 0;
  int64_t instantiation_limit = 10000000;
};

struct compile_scope {
  // Frame slot of a free variable, or -1.
  std::function<int(const std::string&)> slot;
  // Callee id for func_call/buf_call/call/load (and perm locations), or -1.
  std::function<int(const expr&)> callee;
  // Concrete value of a bound reference.
  std::function<std::optional<int64_t>(const expr&)> bound;
  int result_slot = -1;
};

// A flat, slot-addressed form of an expression for fast repeated evaluation.
class compiled_expr {
public:
  compiled_expr() = default;

  // Throws eval_error{error} for unbound names.
  static compiled_expr compile(const expr& e, const compile_scope& scope, int first_free_slot);

  int64_t eval(eval_context& ctx, int64_t* frame) const;
  bool holds(eval_context& ctx, int64_t* frame) const { return eval(ctx, frame) != 0; }
  bool defined() const { return root_ >= 0; }
  // Frame size needed, including quantifier slots.
  int frame_size() const { return frame_size_; }

private:
  enum class op : uint8_t {
    konst, slot, invoke, perm, neg, not_, add, sub, mul, div, mod, min, max,
    lt, le, gt, ge, eq, ne, and_, or_, implies, select, forall
  };
  struct node {
    op o = op::konst;
    int64_t v = 0;  // constant value, slot, callee id
    std::vector<int> kids;
    std::vector<int> qslots;  // forall: slot per variable; kids = lo0, hi0, lo1, hi1, ..., body
    rational frac;
  };
  std::vector<node> nodes_;
  int root_ = -1;
  int frame_size_ = 0;

  int64_t eval_node(int i, eval_context& ctx, int64_t* frame) const;
  bool eval_forall(const node& n, size_t k, eval_context& ctx, int64_t* frame) const;
  friend class compiler;
};

// Convenience for closed expressions with a name -> value environment and
// callbacks. Intended for tests and one-off checks, not hot loops.
struct simple_env {
  std::map<std::string, int64_t> vars;
  std::function<int64_t(const expr_node&, const std::vector<int64_t>&)> call;
};
int64_t eval_simple(const expr& e, const simple_env& env);

}  // namespace minisched

#endif

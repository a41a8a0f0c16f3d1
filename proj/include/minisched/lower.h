#ifndef MINISCHED_LOWER_H
#define MINISCHED_LOWER_H

#include <map>
#include <string>
#include <vector>

#include "minisched/expr.h"
#include "minisched/schedule.h"

namespace minisched {

// Annotations attached to one node of the loop nest. On a serial loop the
// invariants are loop invariants; on a parallel loop requires/ensures form
// the per-iteration block contract. context is shorthand for both.
struct ann_set {
  std::vector<expr> requires_;
  std::vector<expr> ensures;
  std::vector<expr> context;
  std::vector<expr> invariants;

  bool empty() const { return requires_.empty() && ensures.empty() && context.empty() && invariants.empty(); }
  size_t size() const { return requires_.size() + ensures.size() + context.size() + invariants.size(); }
};

// A flat allocation: point p lives at sum_i (p_i - base_i) * stride_i.
struct alloc_info {
  std::string func;
  std::vector<expr> base;  // over loop vars enclosing the allocation
  std::vector<int64_t> extent;
  std::vector<int64_t> stride;
  int64_t size = 0;
  bool input = false;
  bool output = false;

  expr index_of(const std::vector<expr>& point) const;
};

struct store_stmt {
  std::string func;
  int stage = 0;
  std::vector<expr> args;            // left-hand side, algorithm names
  expr value;                        // inlined right-hand side, algorithm names
  expr cond;                         // user guard of an update, or undefined
  std::map<std::string, expr> defs;  // algorithm dim / rvar -> expr over loop vars
  std::vector<expr> guards;          // split tails and producer clamps, over loop vars

  // Filled by flattening: loads and stores over flat allocations.
  expr index;
  expr flat_value;
  expr flat_cond;  // undefined when unconditional
};

enum class node_kind { block, loop, produce, consume, allocate, store };

struct lnode {
  node_kind kind = node_kind::block;
  std::string func;
  int stage = 0;

  // loop
  std::string var;    // C name
  std::string label;  // display name, e.g. y.yo
  std::string dim;    // schedule dim name
  expr min;
  int64_t extent = 0;
  loop_kind lkind = loop_kind::serial;
  std::vector<int> rvars;  // indices of the reduction vars the loop derives from

  alloc_info alloc;  // allocate
  store_stmt stmt;   // store

  std::vector<lnode> body;
  ann_set anns;

  expr max() const;  // inclusive
};

// Region of a func computed at some loop level, over the enclosing loop vars.
struct func_region {
  std::vector<expr> min;
  std::vector<int64_t> extent;
};

struct path_loop {
  std::string var;
  expr min;
  int64_t extent = 0;
};

struct lowered_program {
  scheduled_pipeline sp;
  std::vector<alloc_info> inputs;
  alloc_info output;
  lnode root;                                  // block
  std::map<std::string, func_region> regions;  // where each non-inlined func is computed
  std::map<std::string, std::vector<path_loop>> compute_paths;  // loops enclosing that level
  ann_set contract;                            // pipeline contract, filled by the annotator
  std::vector<std::string> abstract_inputs;    // p_i names, parallel to inputs

  const alloc_info* input(const std::string& name) const;
};

// Builds the loop nest: placement, bounds inference and flattening. Throws
// error{InvalidPlacement} when a compute_at level does not reach the producer.
lowered_program lower(const scheduled_pipeline& sp);

// Region of `g` computed during one iteration of `loop_var`, a loop on g's
// compute path. Loops inside it count with their full range. Falls back to
// g's domain where the bounds are not affine.
func_region footprint(const lowered_program& prog, const std::string& g, const std::string& loop_var);

// Indented nest in the style of the produce/consume listings.
std::string dump_loop_nest(const lowered_program& prog, bool with_annotations = false);

// Visits every node in pre-order.
void walk(const lnode& n, const std::function<void(const lnode&)>& f);
void walk_mut(lnode& n, const std::function<void(lnode&)>& f);

}  // namespace minisched

#endif

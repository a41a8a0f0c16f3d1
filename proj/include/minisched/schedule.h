#ifndef MINISCHED_SCHEDULE_H
#define MINISCHED_SCHEDULE_H

#include <map>
#include <string>
#include <vector>

#include "minisched/ir.h"
#include "minisched/parser.h"

namespace minisched {

enum class loop_kind { serial, parallel, unrolled };

const char* loop_kind_name(loop_kind k);

struct sched_dim {
  std::string name;  // as written in directives, e.g. "y", "yo", "r.x"
  loop_kind kind = loop_kind::serial;
  bool rvar = false;
  // Lexicographic significance among reduction dims: larger is outer.
  std::vector<int> order_key;
};

struct dim_relation {
  enum kind_t { split, fuse } kind = split;
  // split: old, outer, inner. fuse: inner, outer, fused.
  std::string a, b, c;
  int64_t factor = 0;
};

struct stage_schedule {
  std::vector<sched_dim> dims;  // innermost first
  std::vector<dim_relation> relations;  // in application order

  const sched_dim* find(const std::string& name) const;
};

enum class placement { inlined, root, at };

// A loop in the nest of one stage of `func`. Root when func is empty.
struct loop_level {
  std::string func;
  int stage = 0;
  std::string var;

  bool is_root() const { return func.empty(); }
  bool operator==(const loop_level&) const = default;
};

struct func_schedule {
  std::vector<stage_schedule> stages;
  placement where = placement::root;
  loop_level compute;
  loop_level store;
};

struct scheduled_pipeline {
  pipeline p;
  std::vector<directive> directives;
  std::map<std::string, func_schedule> funcs;

  const func_schedule& of(const std::string& f) const { return funcs.at(f); }
};

// Replays the directives on per-stage dimension lists and resolves
// placements. Unscheduled single-stage pure funcs are inlined; everything
// else defaults to compute_root. Throws error{SplitNonPositiveFactor,
// FuseKindMismatch, PlacementCycle, ReorderUnsafe, InvalidPlacement}.
scheduled_pipeline apply_directives(const pipeline& p, const std::vector<directive>& ds);

// Funcs that `f` reads, directly or through inlined funcs.
std::vector<std::string> effective_callees(const scheduled_pipeline& sp, const std::string& f);

// Loop dims of a stage with no directives applied, innermost first.
std::vector<std::string> default_stage_dims(const func& f, size_t stage_index);

}  // namespace minisched

#endif

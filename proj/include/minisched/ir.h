#ifndef MINISCHED_IR_H
#define MINISCHED_IR_H

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "minisched/expr.h"

namespace minisched {

struct source_span {
  std::string file;
  int line = 1;
  int column = 1;
  int length = 0;

  std::string str() const;
  bool operator==(const source_span&) const = default;
};

// Half-open [min, min + extent).
struct interval {
  int64_t min = 0;
  int64_t extent = 0;

  int64_t max() const { return min + extent; }
  bool contains(int64_t v) const { return v >= min && v < max(); }
  bool operator==(const interval&) const = default;
};

enum class ann_kind { requires_, ensures, context, invariant };

const char* ann_kind_name(ann_kind k);

struct annotation {
  ann_kind kind = ann_kind::ensures;
  expr body;
  std::string rvar;  // reduction variable an invariant belongs to
  source_span span;
  int lines = 1;     // physical source lines the annotation occupies

  bool operator==(const annotation& o) const {
    return kind == o.kind && equal(body, o.body) && rvar == o.rvar;
  }
};

struct dim {
  std::string name;
  interval range;
  bool declared = false;

  bool operator==(const dim& o) const {
    return name == o.name && declared == o.declared && (!declared || range == o.range);
  }
};

struct rdom_var {
  std::string name;  // "r" for one-dimensional domains, "r.x", "r.y", ... otherwise
  interval range;
  bool operator==(const rdom_var&) const = default;
};

struct rdom {
  std::string name;
  std::vector<rdom_var> vars;  // innermost first
  source_span span;

  bool operator==(const rdom& o) const { return name == o.name && vars == o.vars; }
};

enum class stage_kind { pure, update, reduction };

struct stage {
  stage_kind kind = stage_kind::pure;
  std::vector<expr> lhs;
  expr rhs;
  expr guard;
  std::optional<rdom> rd;
  std::vector<annotation> anns;
  source_span span;

  bool operator==(const stage& o) const;
  std::vector<const annotation*> of_kind(ann_kind k) const;
  const annotation* invariant_for(const std::string& rvar) const;
};

struct func {
  std::string name;
  std::vector<dim> dims;
  std::vector<stage> stages;
  source_span span;

  std::vector<std::string> dim_names() const;
  bool operator==(const func& o) const {
    return name == o.name && dims == o.dims && stages == o.stages;
  }
};

struct buffer {
  std::string name;
  std::vector<dim> dims;
  std::vector<annotation> anns;  // requires on element values, in terms of \result
  source_span span;

  std::vector<std::string> dim_names() const;
  bool operator==(const buffer& o) const { return name == o.name && dims == o.dims && anns == o.anns; }
};

struct param {
  std::string name;
  int64_t value = 0;
  bool operator==(const param&) const = default;
};

struct pipeline {
  std::string name;
  std::vector<buffer> inputs;
  std::vector<param> params;
  std::vector<rdom> rdoms;
  std::vector<func> funcs;
  std::string output;
  std::vector<annotation> pre;   // pipeline requires
  std::vector<annotation> post;  // pipeline ensures
  source_span span;

  const func* find_func(const std::string& n) const;
  func* find_func(const std::string& n);
  const buffer* find_buffer(const std::string& n) const;
  int func_index(const std::string& n) const;
  const func& output_func() const;
  std::optional<int64_t> param_value(const std::string& n) const;
  // Concrete value of entity.dim.min/max.
  std::optional<int64_t> bound_value(const std::string& entity, const std::string& dim, bool is_max) const;
  int user_annotation_lines() const;
  int user_annotation_count() const;

  bool operator==(const pipeline& o) const;
};

struct diagnostic {
  std::string rule;
  std::string message;
  source_span span;
};

std::vector<diagnostic> validate_pipeline(const pipeline& p);

// Fills in undeclared func and buffer bounds from the output's declared
// bounds by interval analysis of the algorithm. Returns diagnostics.
std::vector<diagnostic> infer_domains(pipeline& p);

// Replaces every bound_ref by its concrete value.
expr resolve_bound_refs(const expr& e, const pipeline& p);

// Constant interval [lo, hi] (inclusive) of an expression given variable ranges.
struct const_range {
  int64_t lo = 0;
  int64_t hi = 0;
};
std::optional<const_range> range_of(const expr& e, const std::map<std::string, const_range>& scope);

// Funcs referenced (directly) by a func's stages.
std::vector<std::string> callees(const func& f);

// Drops every user annotation (stage, buffer and pipeline level).
pipeline strip_annotations(const pipeline& p);

}  // namespace minisched

#endif

#ifndef MINISCHED_PARSER_H
#define MINISCHED_PARSER_H

#include <string>
#include <vector>

#include "minisched/error.h"
#include "minisched/ir.h"

namespace minisched {

enum class directive_kind { split, fuse, reorder, parallel, unroll, compute_at, store_at };

const char* directive_name(directive_kind k);

struct directive {
  directive_kind kind = directive_kind::split;
  std::string func;
  int stage = 0;  // 0 is the pure definition, i is update(i - 1)
  // split: old, outer, inner. fuse: inner, outer, fused. reorder: dims, innermost
  // first. parallel/unroll: dim. compute_at/store_at: consumer, dim.
  std::vector<std::string> names;
  int64_t factor = 0;
  source_span span;

  bool operator==(const directive& o) const {
    return kind == o.kind && func == o.func && stage == o.stage && names == o.names && factor == o.factor;
  }
};

// Parses a .hal algorithm. Throws error{ParseError} or error{ValidationError}.
pipeline parse_pipeline(const std::string& text, const std::string& file = "");

// Parses a .sched file against a validated pipeline. Throws error{ParseError,
// UnknownFunc, UnknownDim, DuplicateDim}.
std::vector<directive> parse_schedule(const std::string& text, const pipeline& p, const std::string& file = "");

std::string print_pipeline(const pipeline& p);
std::string print_schedule(const std::vector<directive>& ds);

// Overrides the declared extents of the output's dimensions by name and
// re-infers every undeclared bound.
pipeline rescale(const pipeline& p, const std::vector<std::pair<std::string, int64_t>>& extents);

}  // namespace minisched

#endif

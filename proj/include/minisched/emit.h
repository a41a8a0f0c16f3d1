#ifndef MINISCHED_EMIT_H
#define MINISCHED_EMIT_H

#include <string>

#include "minisched/lower.h"

namespace minisched {

struct emitted_unit {
  std::string source;
  int code_lines = 0;
  int annotation_lines = 0;
  int loops = 0;           // `for` statements; unrolled loops are expanded
  int parallel_loops = 0;
};

struct metrics_row {
  int loc = 0;
  int loa = 0;
  int loops = 0;
  int user_loa = 0;
  double ann_incr = 0;  // loa / max(user_loa, 1)
};

// Annotated C for an annotated loop nest: Euclidean division helpers, the
// buffer struct, abstract input functions, the pipeline function with its
// contract, and the nest with VerCors-style loop annotations. Parallel loops
// get `#pragma omp parallel for` and a block contract; unrolled loops are
// expanded. The function is named after the pipeline and takes one
// `struct buffer *` per input, then one for the output.
emitted_unit emit_c(const lowered_program& prog);

// Line counts of C source: annotation lines are the non-empty lines inside
// `/*@ ... @*/` and `//@` comments; code lines are the other non-empty lines
// that are not plain comments.
void count_lines(emitted_unit& u);

metrics_row annotation_metrics(const emitted_unit& u, int user_loa);

}  // namespace minisched

#endif

#ifndef MINISCHED_ANNOTATE_H
#define MINISCHED_ANNOTATE_H

#include "minisched/lower.h"

namespace minisched {

// Generates permissions, moves the user's stage annotations outward through
// the loops of their stage, and builds the pipeline contract. Input reads in
// value annotations go through abstract functions named in
// prog.abstract_inputs.
void annotate(lowered_program& prog);

// Name of the abstract function standing for input `i` of `n`.
std::string abstract_input_name(size_t i, size_t n);

}  // namespace minisched

#endif

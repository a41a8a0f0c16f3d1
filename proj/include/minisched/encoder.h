#ifndef MINISCHED_ENCODER_H
#define MINISCHED_ENCODER_H

#include <string>
#include <vector>

#include "minisched/ir.h"

namespace minisched {

struct pvl_clause {
  expr e;
  bool wrap = false;  // printed in parentheses (user predicates with a logical top operator)
  source_span span;   // the user annotation it came from, if any
};

struct pvl_function {
  std::string name;
  std::vector<std::string> params;
  std::vector<pvl_clause> requires_;
  std::vector<pvl_clause> ensures;
  std::vector<std::string> decreases;  // measure, outermost first; empty prints "decreases;"
  expr body;                           // undefined: abstract
  bool break_body = false;             // print a top-level select over two lines
  int line_group = 0;                  // nonzero: shares one line with its group
  bool recursive = false;
  // Inclusive range of every parameter over which the function is meant to be
  // defined. Empty for abstract functions.
  std::vector<std::pair<int64_t, int64_t>> domain;
};

struct pvl_lemma {
  std::vector<pvl_clause> requires_;
  std::vector<pvl_clause> ensures;
};

struct encoded_program {
  std::vector<pvl_function> decls;  // callees first
  pvl_lemma lemma;

  const pvl_function* find(const std::string& name) const;
};

std::vector<pvl_function> encode_buffer(const buffer& b, int line_group);
std::vector<pvl_function> encode_stage(const pipeline& p, const func& f, size_t stage_index);

// Quantifies the last func's final intermediate ensures over its concrete
// domain. Throws error{NoIntermediateAnnotation}.
annotation autogen_pipeline_postcondition(const pipeline& p);

pvl_lemma encode_pipeline_lemma(const pipeline& p);

// Throws error{MissingReductionInvariant}.
encoded_program encode(const pipeline& p);

std::string print_pvl(const encoded_program& prog);

// Name of the function holding stage `stage_index` of `f` once complete.
std::string stage_function_name(const func& f, size_t stage_index);

// Static termination check: every self-call decreases the measure
// lexicographically and no other call cycles exist. Returns offending names.
std::vector<std::string> check_decreases(const encoded_program& prog);

}  // namespace minisched

#endif

#ifndef MINISCHED_CHECKER_H
#define MINISCHED_CHECKER_H

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "minisched/encoder.h"
#include "minisched/ir.h"
#include "minisched/lower.h"
#include "minisched/report.h"

namespace minisched {

// A dense multi-dimensional array over a box of integer points. The first
// dimension is the fastest varying one.
struct array_value {
  std::string name;
  std::vector<interval> dims;
  std::vector<int64_t> data;

  array_value() = default;
  array_value(std::string n, std::vector<interval> d);

  bool contains(const int64_t* args, size_t n) const;
  size_t offset(const int64_t* args) const;
  int64_t& at(const std::vector<int64_t>& args) { return data[offset(args.data())]; }
  int64_t at(const std::vector<int64_t>& args) const { return data[offset(args.data())]; }
  size_t size() const { return data.size(); }
};

// Concrete contents for every input buffer of a pipeline.
struct valuation {
  std::map<std::string, array_value> buffers;
};

// Random input contents in [lo, hi]. Elements are redrawn until the buffer's
// value requires hold; throws error{UnsatisfiableInput} if that fails.
valuation random_valuation(const pipeline& p, uint64_t seed, int64_t lo = -100, int64_t hi = 100);

// Direct evaluation of the algorithm over every func's domain, in the order
// reductions run (first reduction variable fastest). Values must stay within
// 32 bits. Throws eval_error.
std::map<std::string, array_value> eval_reference(const pipeline& p, const valuation& v);

struct frontend_options {
  int max_findings = 20;
  int64_t instantiation_limit = 10000000;
};

// Evaluates every encoded function at every point of its domain under `v`
// and checks:
//  - each ensures wherever the function's requires hold,
//  - callee requires at every call,
//  - that recursive calls decrease their measure and keep it bounded below,
//  - the lemma (ensures wherever its requires hold),
//  - that the encoded output agrees with eval_reference.
check_report check_frontend(const encoded_program& prog, const pipeline& p, const valuation& v,
                            const frontend_options& opts = {});

struct backend_options {
  bool annotations = true;        // evaluate annotations and keep the permission ledger
  bool compare_reference = true;  // compare the output with eval_reference
  int max_findings = 20;
  int64_t instantiation_limit = 10000000;
};

struct backend_run {
  check_report report;
  array_value output;
};

// Executes the loop nest sequentially. Allocations start poisoned; reads of
// poison, out-of-range indices and values beyond 32 bits end the run with a
// finding. Annotations are ignored.
backend_run run_lowered(const lowered_program& prog, const valuation& v);

// Runs the nest while evaluating every attached annotation at each loop
// boundary and charging permissions to a ledger:
//  - a serial loop's invariants and a parallel iteration's contract must hold,
//  - permissions claimed by a loop must be held by the enclosing scope, and
//    the iterations of a parallel loop together may not claim more,
//  - every read needs some permission, every write a full one,
//  - the pipeline contract holds and the output agrees with eval_reference.
check_report check_annotations(const lowered_program& prog, const valuation& v, const backend_options& opts = {});

}  // namespace minisched

#endif

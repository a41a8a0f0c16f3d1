#ifndef MINISCHED_REPORT_H
#define MINISCHED_REPORT_H

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "minisched/ir.h"

namespace minisched {

// One problem found by a checker run. `kind` is one of invariantViolation,
// race, outOfBounds, overflow, mismatch, missingPermission, uninitializedRead,
// error.
struct finding {
  std::string kind;
  std::string message;
  source_span span;
  std::string annotation;               // printed annotation, when one is involved
  std::map<std::string, int64_t> state; // loop variables at the failing boundary
  std::string alloc;                    // race, outOfBounds, missingPermission
  int64_t location = 0;
  int64_t iter_a = 0, iter_b = 0;       // race: the two parallel iterations
  std::vector<int64_t> point;           // mismatch
  int64_t got = 0, want = 0;
};

struct check_stats {
  int64_t points = 0;
  int64_t instantiations = 0;
  int64_t boundaries = 0;
  double millis = 0;
};

struct check_report {
  std::string pipeline;
  std::string schedule;
  uint64_t seed = 0;
  std::vector<finding> findings;
  check_stats stats;

  bool pass() const { return findings.empty(); }
  std::string verdict() const { return pass() ? "pass" : findings.front().kind; }
  bool has(const std::string& kind) const;
  std::string to_json() const;
  // Short human-readable summary (one line per finding).
  std::string summary() const;
};

}  // namespace minisched

#endif

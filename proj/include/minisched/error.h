#ifndef MINISCHED_ERROR_H
#define MINISCHED_ERROR_H

#include <stdexcept>
#include <string>
#include <vector>

#include "minisched/ir.h"

namespace minisched {

// Every failure raised by the toolchain. `kind` is the stable error name
// (ParseError, UnknownDim, SplitNonPositiveFactor, ...).
class error : public std::runtime_error {
public:
  error(std::string kind, const std::string& message, source_span span = {})
      : std::runtime_error(message), kind_(std::move(kind)), span_(std::move(span)) {}

  const std::string& kind() const { return kind_; }
  const source_span& span() const { return span_; }

  std::vector<std::string> expected;
  std::vector<diagnostic> diagnostics;

  std::string describe() const;

private:
  std::string kind_;
  source_span span_;
};

}  // namespace minisched

#endif

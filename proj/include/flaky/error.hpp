#pragma once

#include <stdexcept>
#include <string>

namespace flaky {

// Bad user input: malformed files, invalid options, unsatisfiable
// preconditions on data. The CLI maps it to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller broke a documented precondition (negative statistic, wrong vector
// width, non-finite logits).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace flaky

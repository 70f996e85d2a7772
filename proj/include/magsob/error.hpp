#pragma once

#include <stdexcept>
#include <string>

namespace magsob {

/// Invalid input: bad dimensions, parameters out of range, unknown names.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation produced a non-finite or non-integrable quantity.
class NumericDomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace magsob

#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace sband {

/// Bad user input: malformed data, invalid configuration, violated preconditions.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure: singular design, degenerate variance, failed factorization.
/// Carries the number of series terms involved when one is known.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what, std::optional<int> k = std::nullopt)
      : std::runtime_error(k ? what + " (K=" + std::to_string(*k) + ")" : what), k_(k) {}

  std::optional<int> k() const { return k_; }

 private:
  std::optional<int> k_;
};

}  // namespace sband

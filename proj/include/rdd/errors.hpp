#pragma once

#include <stdexcept>
#include <string>

namespace rdd {

// Bad inputs: missing files or columns, not enough observations, inconsistent
// configuration. The CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Numerical breakdowns: rank-deficient designs, singular covariances,
// degenerate pilot quantities. The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace rdd

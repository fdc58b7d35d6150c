#pragma once

#include <stdexcept>
#include <string>

namespace deocc {

// Malformed arguments: shape mismatches, out-of-range parameters, bad configs.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Inputs that are well-formed but geometrically degenerate (identical rows,
// coincident triplet vertices, no observed patch).
class DegenerateInput : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// The finite-difference oracle produced a non-finite value.
class OracleFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace deocc

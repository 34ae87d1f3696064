#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace mgeo {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Eigen::Index;

inline constexpr const char* kVersion = "0.1.0";

// Bad input or configuration: CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failure (non-convergence, loss of definiteness, ...): exit code 3.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mgeo

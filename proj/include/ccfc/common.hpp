#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace ccfc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

// Bad input data, files, or configuration. CLI exit code 2.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Incompatible checkpoint, schema, or dataset. CLI exit code 3.
struct CompatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical divergence (non-finite loss or update). CLI exit code 4.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ccfc

#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <stdexcept>
#include <string>

namespace rdeep {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Index = Eigen::Index;

/// Raised when operand shapes disagree or a size precondition fails.
class DimensionError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Raised for out-of-range or inconsistent parameter values.
class ValueError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a simulation or data-collection run cannot continue.
class SimulationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Raised on malformed files (CSV, config).
class FormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline void require_dims(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

inline void require_value(bool ok, const std::string& what) {
  if (!ok) throw ValueError(what);
}

}  // namespace rdeep

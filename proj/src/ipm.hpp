#pragma once

#include "rdeep/common.hpp"

#include <Eigen/Cholesky>

#include <memory>
#include <string>
#include <vector>

namespace rdeep::detail {

/// min 1/2 x'Px + c'x  s.t.  Ax = b,  r_lo <= Rx <= r_hi,  h_q - G_q x in SOC (scalar part first).
struct CoreProblem {
  Index n = 0;
  std::shared_ptr<const Matrix> P;  // null means zero
  Vector c;
  Matrix A;
  Vector b;
  SparseMatrix R;  // every row has at least one finite side
  Vector r_lo, r_hi;
  std::vector<Matrix> soc_G;
  std::vector<Vector> soc_h;
};

enum class CoreStatus { optimal, primal_infeasible, dual_infeasible, max_iterations, numerical_error };

struct CoreResult {
  CoreStatus status = CoreStatus::numerical_error;
  Vector x;
  Vector y;
  int iterations = 0;
  double pres = 0.0;
  double dres = 0.0;
  double gap = 0.0;
  std::string message;
};

struct IpmOptions {
  double tol = 1e-8;
  int max_iterations = 100;
};

/// Per-workspace cache for the Schur-complement KKT strategy.
struct SchurCache {
  std::shared_ptr<const Matrix> P_key;
  Matrix C_key;
  Eigen::LLT<Matrix> P_llt;
  Matrix Y;   // P^{-1} C'
  Matrix S0;  // C P^{-1} C'
  bool valid = false;
};

CoreResult solve_core(const CoreProblem& prob, const IpmOptions& opts, SchurCache* cache);

// Exposed for tests: NT scaling of one second-order cone.
struct SocScaling {
  double beta = 1.0;
  Vector v;  // v'Jv = 1
};
SocScaling nt_scaling(const Vector& s, const Vector& z);
Vector soc_apply_w(const SocScaling& w, const Vector& x);
Vector soc_apply_winv(const SocScaling& w, const Vector& x);

}  // namespace rdeep::detail

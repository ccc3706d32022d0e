#pragma once

#include "rdeep/common.hpp"
#include "rdeep/conic.hpp"
#include "rdeep/predictor.hpp"
#include "rdeep/uncertainty.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

namespace rdeep {

/// Quadratic-in-x problem over x = (u, sigma_y, eps), eps possibly in down-sampled coordinates.
struct ReducedProblem {
  std::shared_ptr<const Matrix> M;
  Vector d;
  double c0 = 0.0;
  std::shared_ptr<const Matrix> P1;  // spacing-error rows
  Vector c1;
  std::shared_ptr<const Matrix> P2;  // input selector
  std::shared_ptr<const Matrix> F;   // M = F'F after clamping tiny negative eigenvalues
  ConstraintBounds bounds;
  Index N = 0, T_ini = 0, n = 0, n_eps = 0;

  std::shared_ptr<const SparseMatrix> vertex_body;  // 2 F_d over (x_d, t)
  std::shared_ptr<const SparseMatrix> dual_body;    // 2 F_d over (x_d, t, lambda)

  Index dim_sigma() const { return (n + 1) * T_ini; }
  Index dim_d() const { return N + dim_sigma(); }
  Index dim() const { return dim_d() + n_eps; }
  double objective(const Vector& x) const { return x.dot(*M * x) + d.dot(x) + c0; }
};

/// Caches the data-dependent matrices of the reduction for one dataset and one down-sampling choice.
class Reducer {
public:
  Reducer(std::shared_ptr<const PredictorCore> core, const CostWeights& w,
          std::optional<DownsampleMap> ds = std::nullopt);

  ReducedProblem reduce(const InitialWindow& ini, const ConstraintBounds& b) const;
  const PredictorCore& core() const { return *core_; }
  Index n_eps() const { return n_eps_; }

private:
  std::shared_ptr<const PredictorCore> core_;
  CostWeights w_;
  Index n_eps_;
  Matrix K_;   // Phi'Q Phi + lambda_g gram
  Matrix S_;   // x -> b
  Matrix G1Phi_;
  std::shared_ptr<const Matrix> M_, P1_, P2_, F_;
  std::shared_ptr<const SparseMatrix> vbody_, dbody_;
};

ReducedProblem reduce(const PredictorCore& core, const InitialWindow& ini, const CostWeights& w,
                      const ConstraintBounds& b, const std::optional<Matrix>& E = std::nullopt);

/// Symmetric factor with M = F'F; eigenvalues at or below threshold * max(1, lambda_max) are dropped.
Matrix psd_factor(const Matrix& M, double threshold = 1e-10);

struct VertexOptions {
  bool merge_spacing_rows = true;
  std::size_t vertex_cap = kDefaultVertexCap;
};

/// Variables (u, sigma_y, t); one epigraph cone per vertex, spacing rows per vertex, input box.
ConicProgram vertex_program(const ReducedProblem& rp, const DisturbancePolytope& poly, const VertexOptions& opt = {});

/// Variables (u, sigma_y, t, lambda_1, lambda_2); spacing robustness through LP duality.
ConicProgram dual_program(const ReducedProblem& rp, const DisturbancePolytope& poly,
                          std::size_t vertex_cap = kDefaultVertexCap);

enum class Method { M1, M2, M1L, M2L };

Method parse_method(const std::string& s);
std::string to_string(Method m);

struct ComplexityDims {
  std::uint64_t n = 0;
  std::uint64_t T_ini = 0;
  std::uint64_t N = 0;
  std::uint64_t n_eps = 0;
};

struct Complexity {
  std::uint64_t num_vars = 0;
  std::uint64_t num_constraints = 0;
};

/// Variable and constraint counts of the two reformulations; throws on 64-bit overflow.
Complexity complexity(Method m, const ComplexityDims& d);

}  // namespace rdeep

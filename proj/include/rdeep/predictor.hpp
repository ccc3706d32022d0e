#pragma once

#include "rdeep/common.hpp"
#include "rdeep/conic.hpp"
#include "rdeep/data_engine.hpp"

#include <memory>

namespace rdeep {

/// Data-driven predictor y = Phi b with b = (u_ini, e_ini, y_ini + sigma_y, u, eps).
struct PredictorCore {
  Matrix Hp_pinv;  // q x r
  Matrix Phi;      // (n+1)N x r
  Matrix gram;     // Hp_pinv' Hp_pinv, r x r
  Index rank_Hp = 0;
  HankelDims dims;

  Index r() const { return Hp_pinv.cols(); }
};

struct InitialWindow {
  Vector u_ini;  // T_ini
  Vector e_ini;  // T_ini
  Vector y_ini;  // (n+1) T_ini, per-step blocks

  void check(const HankelDims& d) const;
};

/// Moore-Penrose pseudo-inverse through the SVD with the shared rank tolerance.
Matrix pseudo_inverse(const Matrix& A, Index* rank = nullptr, double rel_tol = kRankTolerance);

/// Stacks (Up; Ep; Yp; Uf; Ef).
Matrix stacked_hp(const HankelBlocks& blocks);

PredictorCore assemble_core(const HankelBlocks& blocks);

Vector predict(const PredictorCore& core, const InitialWindow& ini, const Vector& u, const Vector& eps,
               const Vector& sigma_y);

struct CostWeights {
  double r = 0.1;       // input weight
  Vector q_step;        // per-step output weights, length n+1 (velocities then spacing)
  double lambda_g = 100.0;
  double lambda_y = 1e4;

  /// Q_v = I_n, spacing weight 0.5.
  static CostWeights standard(Index n);
  void validate(Index n) const;
};

struct ConstraintBounds {
  double s_tilde_min = -15.0;  // m
  double s_tilde_max = 20.0;   // m
  double u_min = -5.0;         // m/s^2
  double u_max = 2.0;          // m/s^2

  void validate() const;
};

/// Baseline program in g-space: variables (g, t). Matrices shared across steps of one dataset.
class BaselineBuilder {
public:
  BaselineBuilder(const HankelBlocks& blocks, const CostWeights& w);

  ConicProgram build(const InitialWindow& ini, const ConstraintBounds& b) const;
  Index num_vars() const { return q_ + 1; }
  /// Future input sequence U_F g for a solved program.
  Vector inputs(const Vector& x) const;
  /// Predicted outputs Y_F g.
  Vector outputs(const Vector& x) const;

private:
  HankelDims dims_;
  Index q_;
  CostWeights w_;
  Matrix Uf_, Yf_, Yp_;
  std::shared_ptr<const SparseMatrix> body_, eq_, ineq_;
};

ConicProgram assemble_baseline(const HankelBlocks& blocks, const InitialWindow& ini, const CostWeights& w,
                               const ConstraintBounds& b);

}  // namespace rdeep

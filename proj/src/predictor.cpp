#include "rdeep/predictor.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <limits>

namespace rdeep {

void InitialWindow::check(const HankelDims& d) const {
  require_dims(u_ini.size() == d.T_ini, "InitialWindow: u_ini length");
  require_dims(e_ini.size() == d.T_ini, "InitialWindow: e_ini length");
  require_dims(y_ini.size() == (d.n + 1) * d.T_ini, "InitialWindow: y_ini length");
}

Matrix pseudo_inverse(const Matrix& A, Index* rank, double rel_tol) {
  Eigen::BDCSVD<Matrix> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double cut = s.size() ? rel_tol * s(0) : 0.0;
  Index r = 0;
  while (r < s.size() && s(r) > cut) ++r;
  if (rank) *rank = r;
  if (r == 0) return Matrix::Zero(A.cols(), A.rows());
  const Matrix V = svd.matrixV().leftCols(r);
  const Matrix U = svd.matrixU().leftCols(r);
  return V * s.head(r).cwiseInverse().asDiagonal() * U.transpose();
}

Matrix stacked_hp(const HankelBlocks& b) {
  const Index rows = b.Up.rows() + b.Ep.rows() + b.Yp.rows() + b.Uf.rows() + b.Ef.rows();
  Matrix H(rows, b.dims.q);
  H << b.Up, b.Ep, b.Yp, b.Uf, b.Ef;
  return H;
}

PredictorCore assemble_core(const HankelBlocks& blocks) {
  require_dims(blocks.Yf.cols() == blocks.dims.q && blocks.Up.cols() == blocks.dims.q,
               "assemble_core: block widths differ from q");
  PredictorCore c;
  c.dims = blocks.dims;
  c.Hp_pinv = pseudo_inverse(stacked_hp(blocks), &c.rank_Hp);
  if (c.rank_Hp == 0) throw ValueError("assemble_core: H_p is numerically zero (degenerate data)");
  c.Phi = blocks.Yf * c.Hp_pinv;
  c.gram = c.Hp_pinv.transpose() * c.Hp_pinv;
  return c;
}

Vector predict(const PredictorCore& core, const InitialWindow& ini, const Vector& u, const Vector& eps,
               const Vector& sigma_y) {
  const HankelDims& d = core.dims;
  ini.check(d);
  require_dims(u.size() == d.N && eps.size() == d.N, "predict: u/eps length must be N");
  require_dims(sigma_y.size() == (d.n + 1) * d.T_ini, "predict: sigma_y length");
  Vector b(core.r());
  b << ini.u_ini, ini.e_ini, ini.y_ini + sigma_y, u, eps;
  return core.Phi * b;
}

CostWeights CostWeights::standard(Index n) {
  CostWeights w;
  w.q_step = Vector::Ones(n + 1);
  w.q_step(n) = 0.5;
  return w;
}

void CostWeights::validate(Index n) const {
  require_dims(q_step.size() == n + 1, "CostWeights: q_step must have n+1 entries");
  require_value((q_step.array() >= 0.0).all(), "CostWeights: output weights must be nonnegative");
  require_value(r > 0.0, "CostWeights: input weight must be positive");
  require_value(lambda_g > 0.0 && lambda_y > 0.0, "CostWeights: regularizers must be positive");
}

void ConstraintBounds::validate() const {
  require_value(s_tilde_min <= s_tilde_max, "ConstraintBounds: s_tilde_min > s_tilde_max");
  require_value(u_min <= u_max, "ConstraintBounds: u_min > u_max");
}

// ---------------------------------------------------------------------------

BaselineBuilder::BaselineBuilder(const HankelBlocks& blocks, const CostWeights& w)
    : dims_(blocks.dims), q_(blocks.dims.q), w_(w), Uf_(blocks.Uf), Yf_(blocks.Yf), Yp_(blocks.Yp) {
  w.validate(dims_.n);
  const Index N = dims_.N, Ti = dims_.T_ini, p = dims_.n + 1, q = q_;
  const Index nv = q + 1;

  Matrix F(N + p * N + q + p * Ti, nv);
  F.setZero();
  F.block(0, 0, N, q) = std::sqrt(w.r) * blocks.Uf;
  for (Index i = 0; i < p * N; ++i) F.block(N + i, 0, 1, q) = std::sqrt(w.q_step(i % p)) * blocks.Yf.row(i);
  F.block(N + p * N, 0, q, q) = std::sqrt(w.lambda_g) * Matrix::Identity(q, q);
  F.block(N + p * N + q, 0, p * Ti, q) = std::sqrt(w.lambda_y) * blocks.Yp;
  body_ = epigraph_body(F, nv, 0);

  Matrix E(2 * Ti + N, nv);
  E.setZero();
  E.block(0, 0, Ti, q) = blocks.Up;
  E.block(Ti, 0, Ti, q) = blocks.Ep;
  E.block(2 * Ti, 0, N, q) = blocks.Ef;
  eq_ = std::make_shared<const SparseMatrix>(E.sparseView());

  Matrix G(2 * N, nv);
  G.setZero();
  for (Index k = 0; k < N; ++k) G.block(k, 0, 1, q) = blocks.Yf.row(k * p + p - 1);
  G.block(N, 0, N, q) = blocks.Uf;
  ineq_ = std::make_shared<const SparseMatrix>(G.sparseView());
}

ConicProgram BaselineBuilder::build(const InitialWindow& ini, const ConstraintBounds& b) const {
  ini.check(dims_);
  b.validate();
  const Index N = dims_.N, Ti = dims_.T_ini, p = dims_.n + 1, q = q_;
  ConicProgram prog;
  prog.num_vars = q + 1;
  prog.objective = Vector::Zero(q + 1);
  prog.objective(q) = 1.0;
  prog.eq_matrix = eq_;
  prog.eq_rhs = Vector::Zero(2 * Ti + N);
  prog.eq_rhs.head(Ti) = ini.u_ini;
  prog.eq_rhs.segment(Ti, Ti) = ini.e_ini;
  prog.ineq_matrix = ineq_;
  prog.ineq_lower.resize(2 * N);
  prog.ineq_upper.resize(2 * N);
  prog.ineq_lower << Vector::Constant(N, b.s_tilde_min), Vector::Constant(N, b.u_min);
  prog.ineq_upper << Vector::Constant(N, b.s_tilde_max), Vector::Constant(N, b.u_max);

  Vector f2 = Vector::Zero(body_->rows());
  f2.tail(p * Ti) = -2.0 * std::sqrt(w_.lambda_y) * ini.y_ini;
  prog.soc_blocks.push_back(quadratic_epigraph_block(body_, f2, Vector::Zero(q + 1), 0.0, q));
  return prog;
}

Vector BaselineBuilder::inputs(const Vector& x) const { return Uf_ * x.head(q_); }
Vector BaselineBuilder::outputs(const Vector& x) const { return Yf_ * x.head(q_); }

ConicProgram assemble_baseline(const HankelBlocks& blocks, const InitialWindow& ini, const CostWeights& w,
                               const ConstraintBounds& b) {
  return BaselineBuilder(blocks, w).build(ini, b);
}

}  // namespace rdeep

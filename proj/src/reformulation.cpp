#include "rdeep/reformulation.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <limits>

namespace rdeep {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

Matrix psd_factor(const Matrix& M, double threshold) {
  require_dims(M.rows() == M.cols(), "psd_factor: matrix must be square");
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (M + M.transpose()));
  const Vector& ev = es.eigenvalues();
  const double cut = threshold * std::max(1.0, ev.size() ? ev.maxCoeff() : 0.0);
  Index keep = 0;
  for (Index i = 0; i < ev.size(); ++i)
    if (ev(i) > cut) ++keep;
  Matrix F(std::max<Index>(keep, 1), M.cols());
  F.setZero();
  Index r = 0;
  for (Index i = 0; i < ev.size(); ++i)
    if (ev(i) > cut) F.row(r++) = std::sqrt(ev(i)) * es.eigenvectors().col(i).transpose();
  return F;
}

Reducer::Reducer(std::shared_ptr<const PredictorCore> core, const CostWeights& w, std::optional<DownsampleMap> ds)
    : core_(std::move(core)), w_(w) {
  const HankelDims& dm = core_->dims;
  const Index N = dm.N, Ti = dm.T_ini, p = dm.n + 1, r = core_->r();
  w.validate(dm.n);
  if (ds) require_dims(ds->E.rows() == N, "Reducer: down-sampling map height must be N");
  n_eps_ = ds ? ds->n_eps : N;
  const Index du = N, ds_ = p * Ti, dd = du + ds_, dim = dd + n_eps_;

  Vector qbar(p * N);
  for (Index i = 0; i < p * N; ++i) qbar(i) = w.q_step(i % p);
  K_ = core_->Phi.transpose() * qbar.asDiagonal() * core_->Phi + w.lambda_g * core_->gram;

  S_ = Matrix::Zero(r, dim);
  const Index off_y = 2 * Ti, off_u = off_y + p * Ti, off_e = off_u + N;
  S_.block(off_y, du, p * Ti, p * Ti).setIdentity();
  S_.block(off_u, 0, N, N).setIdentity();
  if (ds)
    S_.block(off_e, dd, N, n_eps_) = ds->E;
  else
    S_.block(off_e, dd, N, N).setIdentity();

  Matrix M = S_.transpose() * K_ * S_;
  M.block(0, 0, du, du).diagonal().array() += w.r;
  M.block(du, du, ds_, ds_).diagonal().array() += w.lambda_y;
  M = (0.5 * (M + M.transpose())).eval();

  G1Phi_.resize(N, r);
  for (Index k = 0; k < N; ++k) G1Phi_.row(k) = core_->Phi.row(k * p + p - 1);
  Matrix P2 = Matrix::Zero(N, dim);
  P2.leftCols(N).setIdentity();

  Matrix F = psd_factor(M);
  M_ = std::make_shared<const Matrix>(std::move(M));
  P1_ = std::make_shared<const Matrix>(G1Phi_ * S_);
  P2_ = std::make_shared<const Matrix>(std::move(P2));
  const Matrix Fd = F.leftCols(dd);
  vbody_ = epigraph_body(Fd, dd + 1, 0);
  dbody_ = epigraph_body(Fd, dd + 1 + 4 * N * n_eps_, 0);
  F_ = std::make_shared<const Matrix>(std::move(F));
}

ReducedProblem Reducer::reduce(const InitialWindow& ini, const ConstraintBounds& b) const {
  const HankelDims& dm = core_->dims;
  ini.check(dm);
  b.validate();
  const Index Ti = dm.T_ini;
  Vector b0 = Vector::Zero(core_->r());
  b0.head(Ti) = ini.u_ini;
  b0.segment(Ti, Ti) = ini.e_ini;
  b0.segment(2 * Ti, (dm.n + 1) * Ti) = ini.y_ini;

  ReducedProblem rp;
  const Vector Kb = K_ * b0;
  rp.M = M_;
  rp.d = 2.0 * (S_.transpose() * Kb);
  rp.c0 = b0.dot(Kb);
  rp.P1 = P1_;
  rp.c1 = G1Phi_ * b0;
  rp.P2 = P2_;
  rp.F = F_;
  rp.bounds = b;
  rp.N = dm.N;
  rp.T_ini = Ti;
  rp.n = dm.n;
  rp.n_eps = n_eps_;
  rp.vertex_body = vbody_;
  rp.dual_body = dbody_;
  return rp;
}

ReducedProblem reduce(const PredictorCore& core, const InitialWindow& ini, const CostWeights& w,
                      const ConstraintBounds& b, const std::optional<Matrix>& E) {
  std::optional<DownsampleMap> ds;
  if (E) {
    DownsampleMap m;
    m.Ts = 0;
    m.n_eps = E->cols();
    m.E = *E;
    ds = m;
  }
  const Reducer red(std::make_shared<const PredictorCore>(core), w, ds);
  return red.reduce(ini, b);
}

// ---------------------------------------------------------------------------

namespace {

void check_poly(const ReducedProblem& rp, const DisturbancePolytope& poly) {
  poly.validate();
  require_dims(poly.dim() == rp.n_eps, "disturbance set dimension differs from the reduced problem's eps block");
}

void add_epigraphs(ProgramBuilder& b, const ReducedProblem& rp, const std::vector<Vector>& verts,
                   const std::shared_ptr<const SparseMatrix>& body) {
  const Index dd = rp.dim_d(), nv = body->cols();
  const Matrix Fe = rp.F->rightCols(rp.n_eps);
  Vector dvec = Vector::Zero(nv);
  dvec.head(dd) = rp.d.head(dd);
  const Vector de = rp.d.tail(rp.n_eps);
  for (const Vector& w : verts) b.add_soc(quadratic_epigraph_block(body, 2.0 * (Fe * w), dvec, de.dot(w), dd));
}

void add_input_box(ProgramBuilder& b, const ReducedProblem& rp) {
  for (Index k = 0; k < rp.N; ++k) b.add_ineq_row({{k, 1.0}}, rp.bounds.u_min, rp.bounds.u_max);
}

std::vector<std::pair<Index, double>> dense_entries(const Matrix& row, Index offset = 0, double scale = 1.0) {
  std::vector<std::pair<Index, double>> e;
  for (Index j = 0; j < row.cols(); ++j)
    if (row(0, j) != 0.0) e.emplace_back(offset + j, scale * row(0, j));
  return e;
}

}  // namespace

ConicProgram vertex_program(const ReducedProblem& rp, const DisturbancePolytope& poly, const VertexOptions& opt) {
  check_poly(rp, poly);
  const auto verts = enumerate_vertices(poly, opt.vertex_cap);
  const Index dd = rp.dim_d(), nv = dd + 1, N = rp.N;
  ProgramBuilder b(nv);
  b.set_objective_entry(dd, 1.0);
  add_epigraphs(b, rp, verts, rp.vertex_body);

  const Matrix Pd = rp.P1->leftCols(dd);
  const Matrix Pe = rp.P1->rightCols(rp.n_eps);
  const double smin = rp.bounds.s_tilde_min, smax = rp.bounds.s_tilde_max;
  if (opt.merge_spacing_rows) {
    Vector lo = Vector::Constant(N, -kInf), hi = Vector::Constant(N, kInf);
    for (const Vector& w : verts) {
      const Vector shift = rp.c1 + Pe * w;
      lo = lo.cwiseMax(Vector::Constant(N, smin) - shift);
      hi = hi.cwiseMin(Vector::Constant(N, smax) - shift);
    }
    b.add_ineq_rows(Pd, 0, lo, hi);
  } else {
    for (const Vector& w : verts) {
      const Vector shift = rp.c1 + Pe * w;
      b.add_ineq_rows(Pd, 0, Vector::Constant(N, -kInf), Vector::Constant(N, smax) - shift);
      b.add_ineq_rows(Pd, 0, Vector::Constant(N, smin) - shift, Vector::Constant(N, kInf));
    }
  }
  add_input_box(b, rp);
  return b.finish();
}

ConicProgram dual_program(const ReducedProblem& rp, const DisturbancePolytope& poly, std::size_t vertex_cap) {
  check_poly(rp, poly);
  const auto verts = enumerate_vertices(poly, vertex_cap);
  const Index dd = rp.dim_d(), N = rp.N, ne = rp.n_eps;
  const Index lam1 = dd + 1, lam2 = lam1 + 2 * N * ne, nv = lam2 + 2 * N * ne;
  require_dims(rp.dual_body->cols() == nv, "dual_program: cached body width mismatch");
  ProgramBuilder b(nv);
  b.set_objective_entry(dd, 1.0);
  add_epigraphs(b, rp, verts, rp.dual_body);

  const Matrix Pd = rp.P1->leftCols(dd);
  const Matrix Pe = rp.P1->rightCols(ne);
  const Vector beps = poly.b();  // (eps_max, -eps_min)
  for (Index l = 0; l < N; ++l) {
    for (int side = 0; side < 2; ++side) {
      const double sgn = side == 0 ? 1.0 : -1.0;
      const Index base = (side == 0 ? lam1 : lam2) + l * 2 * ne;
      auto e = dense_entries(Pd.row(l), 0, sgn);
      for (Index i = 0; i < 2 * ne; ++i)
        if (beps(i) != 0.0) e.emplace_back(base + i, beps(i));
      const double rhs = side == 0 ? rp.bounds.s_tilde_max - rp.c1(l) : -rp.bounds.s_tilde_min + rp.c1(l);
      b.add_ineq_row(e, -kInf, rhs);
      for (Index i = 0; i < ne; ++i) b.add_eq_row({{base + i, 1.0}, {base + ne + i, -1.0}}, sgn * Pe(l, i));
      for (Index i = 0; i < 2 * ne; ++i) b.add_ineq_row({{base + i, 1.0}}, 0.0, kInf);
    }
  }
  add_input_box(b, rp);
  return b.finish();
}

// ---------------------------------------------------------------------------

Method parse_method(const std::string& s) {
  if (s == "M1") return Method::M1;
  if (s == "M2") return Method::M2;
  if (s == "M1L") return Method::M1L;
  if (s == "M2L") return Method::M2L;
  throw ValueError("unknown method '" + s + "' (expected M1, M2, M1L or M2L)");
}

std::string to_string(Method m) {
  switch (m) {
    case Method::M1: return "M1";
    case Method::M2: return "M2";
    case Method::M1L: return "M1L";
    case Method::M2L: return "M2L";
  }
  return "?";
}

namespace {

std::uint64_t add(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r;
  if (__builtin_add_overflow(a, b, &r)) throw ValueError("complexity: count overflows 64 bits");
  return r;
}

std::uint64_t mul(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r;
  if (__builtin_mul_overflow(a, b, &r)) throw ValueError("complexity: count overflows 64 bits");
  return r;
}

std::uint64_t pow2(std::uint64_t e) {
  if (e >= 64) throw ValueError("complexity: count overflows 64 bits");
  return std::uint64_t{1} << e;
}

}  // namespace

Complexity complexity(Method m, const ComplexityDims& d) {
  const std::uint64_t base = add(add(mul(d.n + 1, d.T_ini), d.N), 1);
  const bool low = m == Method::M1L || m == Method::M2L;
  const std::uint64_t k = low ? d.n_eps : d.N;
  Complexity c;
  if (m == Method::M1 || m == Method::M1L) {
    c.num_vars = base;
    c.num_constraints = add(add(pow2(k), mul(d.N, pow2(add(k, 1)))), mul(2, d.N));
  } else {
    c.num_vars = add(base, mul(mul(4, d.N), k));
    c.num_constraints = add(pow2(k), mul(mul(2, d.N), add(mul(3, k), 2)));
  }
  return c;
}

}  // namespace rdeep

#include "ipm.hpp"
#include "presolve.hpp"
#include "rdeep/conic.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

using namespace rdeep;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// min t s.t. ||F x||^2 + d'x <= t, box on x; variables (x, t).
ConicProgram epigraph_box(const Matrix& F, const Vector& d, const Vector& lo, const Vector& hi) {
  const Index n = F.cols();
  ProgramBuilder b(n + 1);
  b.set_objective_entry(n, 1.0);
  b.add_ineq_rows(Matrix::Identity(n, n), 0, lo, hi);
  ConicProgram p = b.finish();
  Matrix Fx = Matrix::Zero(F.rows(), n + 1);
  Fx.leftCols(n) = F;
  Vector dx = Vector::Zero(n + 1);
  dx.head(n) = d;
  add_quadratic_epigraph(p, Fx, dx, n);
  return p;
}

Matrix random_matrix(Index r, Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Matrix M(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) M(i, j) = g(rng);
  return M;
}

class BothBackends : public ::testing::TestWithParam<std::string> {};

}  // namespace

TEST_P(BothBackends, ScalarSquareEpigraph) {
  const ConicProgram p = epigraph_box(Matrix::Ones(1, 1), Vector::Zero(1), Vector::Ones(1), Vector::Constant(1, 2.0));
  SolverOptions o;
  o.backend = GetParam();
  const Solution s = solve(p, o);
  ASSERT_EQ(s.status, SolveStatus::optimal) << s.diagnostics;
  EXPECT_NEAR(s.x(0), 1.0, 1e-7);
  EXPECT_NEAR(s.x(1), 1.0, 1e-7);
  EXPECT_NEAR(s.objective_value, 1.0, 1e-7);
  EXPECT_LE(s.primal_residual, 1e-7);
}

TEST_P(BothBackends, LinearEpigraphWhenFactorIsZero) {
  const ConicProgram p =
      epigraph_box(Matrix::Zero(1, 1), Vector::Ones(1), Vector::Constant(1, 3.0), Vector::Constant(1, 5.0));
  SolverOptions o;
  o.backend = GetParam();
  const Solution s = solve(p, o);
  ASSERT_EQ(s.status, SolveStatus::optimal) << s.diagnostics;
  EXPECT_NEAR(s.objective_value, 3.0, 1e-7);
}

TEST_P(BothBackends, InfeasibleBox) {
  ProgramBuilder b(2);
  b.set_objective(Vector::Ones(2));
  b.add_ineq_row({{0, 1.0}}, 2.0, 1.0);
  b.add_ineq_row({{1, 1.0}}, 0.0, 1.0);
  SolverOptions o;
  o.backend = GetParam();
  EXPECT_EQ(solve(b.finish(), o).status, SolveStatus::infeasible);
}

TEST_P(BothBackends, GenericCone) {
  // min x + y s.t. ||(x, y)|| <= 1
  ProgramBuilder b(2);
  b.set_objective(Vector::Ones(2));
  ConicProgram p = b.finish();
  SocBlock c;
  auto I = std::make_shared<SparseMatrix>(2, 2);
  I->setIdentity();
  c.body = I;
  c.body_offset = Vector::Zero(2);
  c.cone_c = Vector::Zero(2);
  c.cone_d = 1.0;
  p.soc_blocks.push_back(c);
  SolverOptions o;
  o.backend = GetParam();
  const Solution s = solve(p, o);
  ASSERT_EQ(s.status, SolveStatus::optimal) << s.diagnostics;
  EXPECT_NEAR(s.objective_value, -std::sqrt(2.0), 1e-7);
}

TEST_P(BothBackends, EqualityConstrainedQuadratic) {
  // min ||x||^2 s.t. x0 + x1 + x2 = 3 -> x = 1
  ConicProgram p = [] {
    ProgramBuilder b(4);
    b.set_objective_entry(3, 1.0);
    b.add_eq_row({{0, 1.0}, {1, 1.0}, {2, 1.0}}, 3.0);
    return b.finish();
  }();
  Matrix F = Matrix::Zero(3, 4);
  F.leftCols(3).setIdentity();
  add_quadratic_epigraph(p, F, Vector::Zero(4), 3);
  SolverOptions o;
  o.backend = GetParam();
  const Solution s = solve(p, o);
  ASSERT_EQ(s.status, SolveStatus::optimal) << s.diagnostics;
  EXPECT_NEAR(s.objective_value, 3.0, 1e-7);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(s.x(i), 1.0, 1e-6);
}

INSTANTIATE_TEST_SUITE_P(Backends, BothBackends, ::testing::Values("presolve-ipm", "conic-ipm"));

TEST(Conic, MinimalEpigraphValueAtFixedPoint) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    const Index n = 4;
    const Matrix F = random_matrix(3, n, rng);
    const Vector d = random_matrix(n, 1, rng);
    const Vector x0 = random_matrix(n, 1, rng);
    const ConicProgram p = epigraph_box(F, d, x0, x0);
    const Solution s = solve(p);
    ASSERT_EQ(s.status, SolveStatus::optimal) << s.diagnostics;
    const double q = (F * x0).squaredNorm() + d.dot(x0);
    EXPECT_NEAR(s.objective_value, q, 1e-8 * (1.0 + std::abs(q)));
  }
}

TEST(Conic, EncodingRoundTrip) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> uni(-3.0, 3.0);
  const Index n = 3;
  const Matrix F = random_matrix(n, n, rng);
  Vector d = random_matrix(n, 1, rng);
  Matrix Fx = Matrix::Zero(n, n + 1);
  Fx.leftCols(n) = F;
  Vector dx = Vector::Zero(n + 1);
  dx.head(n) = d;
  ProgramBuilder b(n + 1);
  ConicProgram p = b.finish();
  add_quadratic_epigraph(p, Fx, dx, n);
  int checked = 0;
  for (int i = 0; i < 100; ++i) {
    Vector x(n + 1);
    for (Index j = 0; j < n; ++j) x(j) = uni(rng);
    const double q = (F * x.head(n)).squaredNorm() + d.dot(x.head(n));
    x(n) = q + uni(rng);
    if (std::abs(q - x(n)) < 1e-6) continue;
    const bool in_cone = constraint_violation(p, x) <= 0.0;
    EXPECT_EQ(in_cone, q <= x(n) + 1e-7);
    ++checked;
  }
  EXPECT_GT(checked, 90);
}

TEST(Conic, BackendsAgreeOnRandomQuadraticPrograms) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const Index n = 6;
    const Matrix F = random_matrix(n, n, rng);
    const Vector d = 3.0 * random_matrix(n, 1, rng);
    ConicProgram p = [&] {
      ProgramBuilder b(n + 1);
      b.set_objective_entry(n, 1.0);
      b.add_ineq_rows(Matrix::Identity(n, n), 0, Vector::Constant(n, -0.3), Vector::Constant(n, 0.5));
      b.add_ineq_rows(random_matrix(2, n, rng), 0, Vector::Constant(2, -1.0), Vector::Constant(2, kInf));
      b.add_eq_row({{0, 1.0}, {1, -1.0}}, 0.1);
      return b.finish();
    }();
    Matrix Fx = Matrix::Zero(n, n + 1);
    Fx.leftCols(n) = F;
    Vector dx = Vector::Zero(n + 1);
    dx.head(n) = d;
    add_quadratic_epigraph(p, Fx, dx, n);
    SolverOptions a, c;
    c.backend = "conic-ipm";
    const Solution sa = solve(p, a), sc = solve(p, c);
    ASSERT_EQ(sa.status, SolveStatus::optimal) << sa.diagnostics;
    ASSERT_EQ(sc.status, SolveStatus::optimal) << sc.diagnostics;
    EXPECT_NEAR(sa.objective_value, sc.objective_value, 1e-5 * (1.0 + std::abs(sc.objective_value)));
  }
}

TEST(Conic, UnboundedLinearProgram) {
  ProgramBuilder b(2);
  b.set_objective(Vector::Constant(2, -1.0));
  b.add_ineq_row({{0, 1.0}}, 0.0, kInf);
  b.add_ineq_row({{1, 1.0}}, 0.0, 1.0);
  EXPECT_EQ(solve(b.finish()).status, SolveStatus::unbounded);
}

TEST(Conic, EmptyFactorRejected) {
  ProgramBuilder b(2);
  ConicProgram p = b.finish();
  EXPECT_THROW(add_quadratic_epigraph(p, Matrix(0, 2), Vector::Zero(2), 1), DimensionError);
}

TEST(Conic, NesterovToddScalingIdentity) {
  Vector s(4), z(4);
  s << 3.0, 1.0, -0.5, 2.0;
  z << 2.0, -0.7, 0.3, 0.1;
  const auto w = detail::nt_scaling(s, z);
  const Vector wz = detail::soc_apply_w(w, z);
  const Vector wis = detail::soc_apply_winv(w, s);
  EXPECT_LT((wz - wis).norm(), 1e-12);
  EXPECT_LT((detail::soc_apply_winv(w, detail::soc_apply_w(w, z)) - z).norm(), 1e-12);
}

TEST(Conic, TripletDumpListsRows) {
  ProgramBuilder b(2);
  b.set_objective(Vector::Ones(2));
  b.add_eq_row({{0, 2.0}}, 1.0);
  b.add_ineq_row({{1, -1.5}}, -kInf, 4.0);
  std::ostringstream out;
  write_triplets(out, b.finish());
  const std::string s = out.str();
  EXPECT_NE(s.find("vars 2"), std::string::npos);
  EXPECT_NE(s.find("0 0 2\n"), std::string::npos);
  EXPECT_NE(s.find("0 1 -1.5\n"), std::string::npos);
  EXPECT_NE(s.find("0 -inf 4\n"), std::string::npos);
}

TEST(Presolve, LiftsEpigraphsWithLargeConstants) {
  std::mt19937_64 rng(12);
  const Index n = 3;
  const Matrix F = random_matrix(2, n, rng);
  const auto body = epigraph_body(F, n + 1);
  for (int blocks : {1, 3}) {
    ProgramBuilder b(n + 1);
    b.set_objective_entry(n, 1.0);
    b.add_ineq_rows(Matrix::Identity(n, n), 0, Vector::Constant(n, -1), Vector::Constant(n, 1));
    ConicProgram p = b.finish();
    for (int k = 0; k < blocks; ++k)
      p.soc_blocks.push_back(quadratic_epigraph_block(body, 2.0 * random_matrix(2, 1, rng), Vector::Zero(n + 1),
                                                      123456.789 + 1000.3 * k, n));
    detail::PresolveCache cache;
    const detail::Presolved pre = detail::presolve(p, cache);
    EXPECT_EQ(pre.lifted.t_index, n) << blocks;
    EXPECT_TRUE(pre.core.soc_G.empty()) << blocks;
    const Solution s = solve(p);
    ASSERT_EQ(s.status, SolveStatus::optimal);
    const Solution r = solve(p, SolverOptions{.backend = "conic-ipm"});
    ASSERT_EQ(r.status, SolveStatus::optimal);
    EXPECT_NEAR(s.objective_value, r.objective_value, 1e-7 * std::abs(r.objective_value));
  }
}

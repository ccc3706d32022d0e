#include "rdeep/uncertainty.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace rdeep;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector x(static_cast<Index>(v.size()));
  Index i = 0;
  for (double a : v) x(i++) = a;
  return x;
}

void expect_vec(const Vector& a, const Vector& b, double tol = 1e-12) {
  ASSERT_EQ(a.size(), b.size());
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), tol) << a.transpose() << " vs " << b.transpose();
}

// Draws uniformly from the box of poly.
Vector sample(const DisturbancePolytope& poly, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(0.0, 1.0);
  Vector x(poly.dim());
  for (Index i = 0; i < x.size(); ++i) x(i) = poly.eps_min(i) + d(rng) * (poly.eps_max(i) - poly.eps_min(i));
  return x;
}

}  // namespace

TEST(ConstantBounds, ZeroHistory) {
  const auto w = estimate_constant_bounds(Vector::Zero(3), 4);
  expect_vec(w.eps_min, Vector::Zero(4));
  expect_vec(w.eps_max, Vector::Zero(4));
}

TEST(ConstantBounds, Ramp) {
  const auto w = estimate_constant_bounds(vec({0, 1, 2}), 2);
  expect_vec(w.eps_min, vec({1, 1}));
  expect_vec(w.eps_max, vec({3, 3}));
}

TEST(ConstantBounds, Flat) {
  const auto w = estimate_constant_bounds(vec({5, 5, 5}), 3);
  expect_vec(w.eps_min, Vector::Constant(3, 5));
  expect_vec(w.eps_max, Vector::Constant(3, 5));
}

TEST(TimeVaryingBounds, ZeroHistory) {
  const auto w = estimate_timevarying_bounds(Vector::Zero(4), 5, 0.05);
  expect_vec(w.eps_min, Vector::Zero(5));
  expect_vec(w.eps_max, Vector::Zero(5));
}

TEST(TimeVaryingBounds, ConstantSlope) {
  const auto w = estimate_timevarying_bounds(vec({0, 1, 2}), 3, 1.0);
  expect_vec(w.eps_min, vec({3, 4, 5}));
  expect_vec(w.eps_max, vec({3, 4, 5}));
}

TEST(TimeVaryingBounds, SpreadSlope) {
  const auto w = estimate_timevarying_bounds(vec({0, 1, 3}), 2, 1.0);
  expect_vec(w.eps_min, vec({4.5, 6}));
  expect_vec(w.eps_max, vec({5.5, 8}));
}

TEST(Estimators, RejectShortHistory) {
  EXPECT_THROW(estimate_constant_bounds(Vector(0), 3), DimensionError);
  EXPECT_THROW(estimate_timevarying_bounds(vec({1}), 3, 0.05), DimensionError);
}

TEST(Estimators, LastSampleInsideExtrapolation) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> d(-1, 1);
  for (int trial = 0; trial < 100; ++trial) {
    const Vector e = Vector::NullaryExpr(20, [&] { return d(rng); });
    const double cur = e(19);
    const double lo = e.minCoeff() - e.mean(), hi = e.maxCoeff() - e.mean();
    EXPECT_LE(cur + lo, cur);
    EXPECT_GE(cur + hi, cur);
    const auto c = estimate_constant_bounds(e, 5);
    EXPECT_LE(c.eps_min(0), c.eps_max(0));
    const auto t = estimate_timevarying_bounds(e, 5, 0.05);
    EXPECT_TRUE((t.eps_min.array() <= t.eps_max.array()).all());
  }
}

TEST(Downsample, SmallMap) {
  const DownsampleMap m = downsample_map(4, 2);
  EXPECT_EQ(m.n_eps, 3);
  Matrix E(4, 3);
  E << 1, 0, 0, 0.5, 0.5, 0, 0, 1, 0, 0, 0, 1;
  EXPECT_LT((m.E - E).norm(), 1e-15);
}

TEST(Downsample, UnitStepIsIdentity) {
  for (Index N : {2, 7, 50}) {
    const DownsampleMap m = downsample_map(N, 1);
    EXPECT_EQ(m.n_eps, N);
    EXPECT_EQ(m.E, Matrix::Identity(N, N));
  }
}

TEST(Downsample, DefaultHorizon) {
  EXPECT_EQ(downsample_map(50, 12).n_eps, 6);
  const auto anchors = downsample_anchors(50, 12);
  EXPECT_EQ(anchors, (std::vector<Index>{0, 12, 24, 36, 48, 49}));
}

TEST(Downsample, ConvexWeightsPreserveConstants) {
  for (Index N : {3, 10, 50})
    for (Index Ts = 1; Ts < N; Ts += 2) {
      const DownsampleMap m = downsample_map(N, Ts);
      EXPECT_GE(m.E.minCoeff(), 0.0);
      EXPECT_LT((m.E * Vector::Constant(m.n_eps, 3.7) - Vector::Constant(N, 3.7)).norm(), 1e-12);
      const auto anchors = downsample_anchors(N, Ts);
      for (std::size_t j = 0; j < anchors.size(); ++j) EXPECT_DOUBLE_EQ(m.E(anchors[j], static_cast<Index>(j)), 1.0);
    }
}

TEST(Downsample, ConstantPolytopeKeepsBounds) {
  const auto w = estimate_constant_bounds(vec({0, 1, 2}), 50);
  const auto d = apply_downsampling(w, 12);
  ASSERT_TRUE(d.downsample.has_value());
  expect_vec(d.eps_min, Vector::Constant(6, 1));
  expect_vec(d.eps_max, Vector::Constant(6, 3));
}

TEST(Downsample, ImageStaysInsideOriginalSet) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> d(-1, 1);
  const Vector e = Vector::NullaryExpr(20, [&] { return d(rng); });
  for (const auto& w : {estimate_constant_bounds(e, 50), estimate_timevarying_bounds(e, 50, 0.05)}) {
    const auto ds = apply_downsampling(w, 12);
    int violations = 0;
    for (int s = 0; s < 1000; ++s) {
      if (!w.contains(ds.downsample->E * sample(ds, rng), 1e-12)) ++violations;
    }
    EXPECT_EQ(violations, 0);
  }
}

TEST(Polytope, InequalityForm) {
  DisturbancePolytope w{vec({-1, 0}), vec({1, 2}), std::nullopt};
  const Matrix A = w.A();
  EXPECT_EQ(A.rows(), 4);
  EXPECT_LT((A * vec({0.5, 1.5}) - w.b()).maxCoeff(), 0.0);
  EXPECT_TRUE(w.contains(vec({1, 2})));
  EXPECT_FALSE(w.contains(vec({1.1, 2})));
  DisturbancePolytope bad{vec({1}), vec({0}), std::nullopt};
  EXPECT_THROW(bad.validate(), ValueError);
}

TEST(Vertices, UnitSquare) {
  auto v = enumerate_vertices({vec({0, 0}), vec({1, 1}), std::nullopt});
  ASSERT_EQ(v.size(), 4u);
  std::vector<std::pair<double, double>> got;
  for (const auto& x : v) got.emplace_back(x(0), x(1));
  std::sort(got.begin(), got.end());
  EXPECT_EQ(got, (std::vector<std::pair<double, double>>{{0, 0}, {0, 1}, {1, 0}, {1, 1}}));
}

TEST(Vertices, Interval) {
  auto v = enumerate_vertices({vec({-1}), vec({1}), std::nullopt});
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(std::min(v[0](0), v[1](0)), -1.0);
  EXPECT_EQ(std::max(v[0](0), v[1](0)), 1.0);
}

TEST(Vertices, CollapsedAxis) {
  auto v = enumerate_vertices({vec({2, 0}), vec({2, 1}), std::nullopt});
  ASSERT_EQ(v.size(), 2u);
  for (const auto& x : v) EXPECT_EQ(x(0), 2.0);
  EXPECT_NE(v[0](1), v[1](1));
}

TEST(Vertices, CountMatchesProduct) {
  std::mt19937_64 rng(4);
  std::bernoulli_distribution flip(0.5);
  for (int trial = 0; trial < 20; ++trial) {
    Vector lo = Vector::Zero(8), hi = Vector::Zero(8);
    std::size_t expect = 1;
    for (Index i = 0; i < 8; ++i)
      if (flip(rng)) {
        hi(i) = 1;
        expect *= 2;
      }
    EXPECT_EQ(enumerate_vertices({lo, hi, std::nullopt}).size(), expect);
  }
}

TEST(Vertices, CapEnforced) {
  EXPECT_THROW(enumerate_vertices({Vector::Zero(13), Vector::Ones(13), std::nullopt}), ValueError);
  EXPECT_EQ(enumerate_vertices({Vector::Zero(13), Vector::Ones(13), std::nullopt}, 1 << 13).size(), 8192u);
}

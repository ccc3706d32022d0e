#include "rdeep/data_engine.hpp"

#include <gtest/gtest.h>

#include <Eigen/LU>

#include <random>
#include <sstream>

using namespace rdeep;

namespace {

SignalSeries series(std::initializer_list<double> v) {
  Vector x(static_cast<Index>(v.size()));
  Index i = 0;
  for (double a : v) x(i++) = a;
  return SignalSeries::scalar(x);
}

CollectionConfig quick_config() { return CollectionConfig{}; }

}  // namespace

TEST(Hankel, ScalarStencil) {
  Matrix expect(2, 4);
  expect << 1, 2, 3, 4, 2, 3, 4, 5;
  EXPECT_EQ(build_hankel(series({1, 2, 3, 4, 5}), 2), expect);
}

TEST(Hankel, VectorStencil) {
  Matrix v(2, 3);
  v << 1, 2, 3, -1, -2, -3;
  Matrix expect(4, 2);
  expect << 1, 2, -1, -2, 2, 3, -2, -3;
  EXPECT_EQ(build_hankel(SignalSeries(v, 0.05), 2), expect);
}

TEST(Hankel, SparseStencil) {
  Matrix expect(2, 3);
  expect << 1, 0, 0, 0, 0, 1;
  EXPECT_EQ(build_hankel(series({1, 0, 0, 1}), 2), expect);
}

TEST(Hankel, DepthMustBeBelowLength) {
  EXPECT_THROW(build_hankel(series({1, 2, 3}), 3), DimensionError);
}

TEST(Hankel, AntiDiagonalBlocksConstant) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  const Matrix v = Matrix::NullaryExpr(3, 40, [&] { return g(rng); });
  const Index L = 7;
  const Matrix H = build_hankel(SignalSeries(v, 0.1), L);
  for (Index i = 0; i < L; ++i)
    for (Index j = 0; j < H.cols(); ++j)
      for (Index c = 0; c < 3; ++c) EXPECT_EQ(H(i * 3 + c, j), v(c, i + j));
}

TEST(PersistentExcitation, ConstantSignalIsNot) { EXPECT_FALSE(is_persistently_exciting(series({1, 1, 1, 1, 1}), 2)); }

TEST(PersistentExcitation, ShortPulseIs) { EXPECT_TRUE(is_persistently_exciting(series({1, 0, 0, 1}), 2)); }

TEST(PersistentExcitation, UniformNoiseOfOrder80) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> d(-1, 1);
  const Vector w = Vector::NullaryExpr(200, [&] { return d(rng); });
  const SignalSeries s = SignalSeries::scalar(w);
  EXPECT_TRUE(is_persistently_exciting(s, 80));
  // Independent rank oracle.
  Eigen::FullPivLU<Matrix> lu(build_hankel(s, 80));
  lu.setThreshold(1e-9);
  EXPECT_EQ(lu.rank(), 80);
}

TEST(PersistentExcitation, MonotoneInOrder) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> d(-1, 1);
  const Vector w = Vector::NullaryExpr(60, [&] { return d(rng); });
  const SignalSeries s = SignalSeries::scalar(w);
  Index top = 0;
  for (Index L = 1; L < 60; ++L)
    if (is_persistently_exciting(s, L)) top = L;
  for (Index L = 1; L <= top; ++L) EXPECT_TRUE(is_persistently_exciting(s, L)) << L;
}

TEST(Partition, MinimalExample) {
  const auto b = partition(series({1, 2, 3, 4}), series({0, 0, 0, 0}), series({1, 1, 1, 1}), 1, 1);
  Matrix up(1, 3), uf(1, 3);
  up << 1, 2, 3;
  uf << 2, 3, 4;
  EXPECT_EQ(b.Up, up);
  EXPECT_EQ(b.Uf, uf);
  EXPECT_EQ(b.dims.q, 3);
}

TEST(Partition, TooShort) {
  EXPECT_THROW(partition(series({1, 2, 3}), series({0, 0, 0}), series({1, 1, 1}), 1, 2), DimensionError);
  EXPECT_THROW(partition(series({1, 2, 3}), series({0, 0}), series({1, 1, 1}), 1, 1), DimensionError);
}

TEST(Partition, RestackEqualsHankel) {
  const OfflineDataset d = collect_offline_data(quick_config(), 200, 3);
  const auto b = partition(d.u, d.e, d.y, 5, 8);
  Matrix u(13, b.dims.q), y(13 * 6, b.dims.q);
  u << b.Up, b.Uf;
  y << b.Yp, b.Yf;
  EXPECT_EQ(u, build_hankel(d.u, 13));
  EXPECT_EQ(y, build_hankel(d.y, 13));
}

TEST(Collection, SmallDatasetShapes) {
  const OfflineDataset d = collect_offline_data(quick_config(), 500, 42);
  EXPECT_EQ(d.length(), 500);
  EXPECT_EQ(d.y.dim(), 6);
  EXPECT_LE(d.u.values.cwiseAbs().maxCoeff(), 1.0);
  EXPECT_LE(d.e.values.cwiseAbs().maxCoeff(), 1.0);
  const auto b = partition(d.u, d.e, d.y, 20, 50);
  EXPECT_EQ(b.dims.q, 431);
  EXPECT_EQ(b.Up.rows(), 20);
  EXPECT_EQ(b.Uf.rows(), 50);
  EXPECT_EQ(b.Ep.rows(), 20);
  EXPECT_EQ(b.Ef.rows(), 50);
  EXPECT_EQ(b.Yp.rows(), 120);
  EXPECT_EQ(b.Yf.rows(), 300);
}

TEST(Collection, LargeDatasetBounded) {
  const OfflineDataset d = collect_offline_data(quick_config(), 1500, 43);
  EXPECT_EQ(d.length(), 1500);
  EXPECT_LE(d.u.values.cwiseAbs().maxCoeff(), 1.0);
  EXPECT_LE(d.e.values.cwiseAbs().maxCoeff(), 1.0);
  const auto b = partition(d.u, d.e, d.y, 20, 50);
  EXPECT_FALSE(b.pe_warning);
}

TEST(Collection, Deterministic) {
  const OfflineDataset a = collect_offline_data(quick_config(), 300, 9);
  const OfflineDataset b = collect_offline_data(quick_config(), 300, 9);
  EXPECT_EQ(a.u.values, b.u.values);
  EXPECT_EQ(a.e.values, b.e.values);
  EXPECT_EQ(a.y.values, b.y.values);
  const OfflineDataset c = collect_offline_data(quick_config(), 300, 10);
  EXPECT_NE(a.u.values, c.u.values);
}

TEST(DatasetCsv, RoundTripIsExact) {
  const OfflineDataset a = collect_offline_data(quick_config(), 50, 4);
  std::stringstream ss;
  write_dataset_csv(ss, a);
  const std::string text = ss.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "k,u,eps,y1,y2,y3,y4,y5,y6");
  const OfflineDataset b = read_dataset_csv(ss, 5);
  EXPECT_EQ(a.u.values, b.u.values);
  EXPECT_EQ(a.y.values, b.y.values);
}

TEST(DatasetCsv, ColumnCountValidated) {
  std::stringstream ss("k,u,eps,y1,y2\n0,0.1,0.2,0.3,0.4\n");
  EXPECT_THROW(read_dataset_csv(ss, 5), FormatError);
  std::stringstream bad("k,u,eps,y1\n0,0.1,0.2\n");
  EXPECT_THROW(read_dataset_csv(bad), FormatError);
}

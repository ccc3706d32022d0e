#include "rdeep/uncertainty.hpp"

#include <cmath>
#include <string>

namespace rdeep {

void DisturbancePolytope::validate() const {
  require_dims(eps_min.size() == eps_max.size(), "DisturbancePolytope: bound lengths differ");
  require_dims(eps_min.size() >= 1, "DisturbancePolytope: empty");
  require_value((eps_min.array() <= eps_max.array()).all(), "DisturbancePolytope: eps_min > eps_max");
  if (downsample) require_dims(downsample->E.cols() == dim(), "DisturbancePolytope: map width differs from dim");
}

Matrix DisturbancePolytope::A() const {
  const Index n = dim();
  Matrix a(2 * n, n);
  a.topRows(n).setIdentity();
  a.bottomRows(n) = -Matrix::Identity(n, n);
  return a;
}

Vector DisturbancePolytope::b() const {
  Vector v(2 * dim());
  v << eps_max, -eps_min;
  return v;
}

bool DisturbancePolytope::contains(const Vector& eps, double tol) const {
  require_dims(eps.size() == dim(), "DisturbancePolytope::contains: length");
  return ((eps - eps_min).array() >= -tol).all() && ((eps_max - eps).array() >= -tol).all();
}

DisturbancePolytope zero_polytope(Index N) {
  require_value(N >= 1, "zero_polytope: N must be positive");
  return {Vector::Zero(N), Vector::Zero(N), std::nullopt};
}

DisturbancePolytope estimate_constant_bounds(const Vector& e_ini, Index N) {
  require_dims(e_ini.size() >= 1, "estimate_constant_bounds: empty history");
  require_value(N >= 1, "estimate_constant_bounds: N must be positive");
  const double mean = e_ini.mean();
  const double cur = e_ini(e_ini.size() - 1);
  DisturbancePolytope p;
  p.eps_min = Vector::Constant(N, cur + (e_ini.minCoeff() - mean));
  p.eps_max = Vector::Constant(N, cur + (e_ini.maxCoeff() - mean));
  return p;
}

DisturbancePolytope estimate_timevarying_bounds(const Vector& e_ini, Index N, double dt) {
  if (e_ini.size() < 3) throw DimensionError("estimate_timevarying_bounds: need at least 3 samples");
  require_value(N >= 1, "estimate_timevarying_bounds: N must be positive");
  require_value(dt > 0.0, "estimate_timevarying_bounds: dt must be positive");
  const Index T = e_ini.size();
  const Vector a = (e_ini.tail(T - 1) - e_ini.head(T - 1)) / dt;
  const double mean = a.mean();
  const double lo = a(a.size() - 1) + (a.minCoeff() - mean);
  const double hi = a(a.size() - 1) + (a.maxCoeff() - mean);
  const double end = e_ini(T - 1);
  DisturbancePolytope p;
  p.eps_min.resize(N);
  p.eps_max.resize(N);
  for (Index k = 1; k <= N; ++k) {
    p.eps_min(k - 1) = end + lo * static_cast<double>(k) * dt;
    p.eps_max(k - 1) = end + hi * static_cast<double>(k) * dt;
  }
  return p;
}

DownsampleMap downsample_map(Index N, Index Ts) {
  require_value(N >= 2, "downsample_map: N must be at least 2");
  if (Ts < 1 || Ts > N) throw ValueError("downsample_map: Ts must lie in [1, N]");
  const Index kt = (N - 2) / Ts;
  DownsampleMap m;
  m.Ts = Ts;
  m.n_eps = kt + 2;
  m.E = Matrix::Zero(N, m.n_eps);
  for (Index k = 1; k <= N; ++k) {
    // Columns are 1-based in the interpolation formula; shift by one when writing.
    if (k <= kt * Ts) {
      const Index kb = (k - 1) / Ts;
      const double w = static_cast<double>((k - 1) % Ts) / static_cast<double>(Ts);
      m.E(k - 1, kb) += 1.0 - w;
      m.E(k - 1, kb + 1) += w;
    } else {
      const double w = static_cast<double>(k - kt * Ts - 1) / static_cast<double>(N - kt * Ts - 1);
      m.E(k - 1, kt) += 1.0 - w;
      m.E(k - 1, kt + 1) += w;
    }
  }
  return m;
}

std::vector<Index> downsample_anchors(Index N, Index Ts) {
  const DownsampleMap m = downsample_map(N, Ts);
  std::vector<Index> a;
  for (Index j = 0; j + 1 < m.n_eps; ++j) a.push_back(j * Ts);
  a.push_back(N - 1);
  return a;
}

DisturbancePolytope apply_downsampling(const DisturbancePolytope& poly, Index Ts) {
  poly.validate();
  require_value(!poly.downsample, "apply_downsampling: polytope is already down-sampled");
  const Index N = poly.dim();
  DisturbancePolytope out;
  out.downsample = downsample_map(N, Ts);
  const auto anchors = downsample_anchors(N, Ts);
  const Index ne = static_cast<Index>(anchors.size());
  out.eps_min.resize(ne);
  out.eps_max.resize(ne);
  for (Index j = 0; j < ne; ++j) {
    out.eps_min(j) = poly.eps_min(anchors[static_cast<std::size_t>(j)]);
    out.eps_max(j) = poly.eps_max(anchors[static_cast<std::size_t>(j)]);
  }
  return out;
}

std::vector<Vector> enumerate_vertices(const DisturbancePolytope& poly, std::size_t cap) {
  poly.validate();
  std::vector<Index> free_axes;
  for (Index i = 0; i < poly.dim(); ++i)
    if (poly.eps_min(i) != poly.eps_max(i)) free_axes.push_back(i);
  if (free_axes.size() >= 63 || (std::size_t{1} << free_axes.size()) > cap)
    throw ValueError("enumerate_vertices: " + std::to_string(free_axes.size()) +
                     " free coordinates exceed the vertex cap; use down-sampling (larger Ts)");
  const std::size_t count = std::size_t{1} << free_axes.size();
  std::vector<Vector> out;
  out.reserve(count);
  for (std::size_t mask = 0; mask < count; ++mask) {
    Vector v = poly.eps_min;
    for (std::size_t b = 0; b < free_axes.size(); ++b)
      if (mask & (std::size_t{1} << (free_axes.size() - 1 - b))) v(free_axes[b]) = poly.eps_max(free_axes[b]);
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace rdeep

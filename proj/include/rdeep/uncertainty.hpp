#pragma once

#include "rdeep/common.hpp"

#include <cstddef>
#include <optional>
#include <vector>

namespace rdeep {

struct DownsampleMap {
  Index Ts = 1;
  Index n_eps = 0;
  Matrix E;  // N x n_eps interpolation weights
};

/// Box W = {eps : eps_min <= eps <= eps_max}; with a down-sampling map the box lives in R^{n_eps}.
struct DisturbancePolytope {
  Vector eps_min;
  Vector eps_max;
  std::optional<DownsampleMap> downsample;

  Index dim() const { return eps_min.size(); }
  void validate() const;
  /// Inequality form A x <= b with A = [I; -I], b = [eps_max; -eps_min].
  Matrix A() const;
  Vector b() const;
  bool contains(const Vector& eps, double tol = 0.0) const;
};

DisturbancePolytope zero_polytope(Index N);
DisturbancePolytope estimate_constant_bounds(const Vector& e_ini, Index N);
DisturbancePolytope estimate_timevarying_bounds(const Vector& e_ini, Index N, double dt);

/// One anchor every Ts steps plus the final step, linear interpolation in between.
DownsampleMap downsample_map(Index N, Index Ts);
/// Anchor step indices (0-based) of the map.
std::vector<Index> downsample_anchors(Index N, Index Ts);
DisturbancePolytope apply_downsampling(const DisturbancePolytope& poly, Index Ts);

inline constexpr std::size_t kDefaultVertexCap = 4096;

/// Corners of the box; collapsed coordinates contribute a single value.
std::vector<Vector> enumerate_vertices(const DisturbancePolytope& poly, std::size_t cap = kDefaultVertexCap);

}  // namespace rdeep

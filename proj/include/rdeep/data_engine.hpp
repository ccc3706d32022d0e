#pragma once

#include "rdeep/common.hpp"
#include "rdeep/traffic_sim.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>

namespace rdeep {

/// Sampled multichannel signal, one column per sample.
struct SignalSeries {
  Matrix values;  // m x T
  double dt = 0.05;

  SignalSeries() = default;
  SignalSeries(Matrix v, double dt_) : values(std::move(v)), dt(dt_) { validate(); }
  /// Scalar series from a plain vector.
  static SignalSeries scalar(const Vector& v, double dt = 0.05);

  Index dim() const { return values.rows(); }
  Index length() const { return values.cols(); }
  void validate() const;
};

/// Relative singular-value tolerance used for every numerical rank decision.
inline constexpr double kRankTolerance = 1e-9;

Index numerical_rank(const Matrix& A, double rel_tol = kRankTolerance);

/// Block-Hankel matrix of depth L: column j stacks samples j..j+L-1.
Matrix build_hankel(const SignalSeries& series, Index L);

bool is_persistently_exciting(const SignalSeries& series, Index order);

struct HankelDims {
  Index T_ini = 0;
  Index N = 0;
  Index n = 0;  // outputs per step are n + 1
  Index T = 0;
  Index q = 0;
};

struct HankelBlocks {
  Matrix Up, Uf, Ep, Ef, Yp, Yf;
  HankelDims dims;
  bool pe_warning = false;  // input not persistently exciting of order L + 2n
};

HankelBlocks partition(const SignalSeries& u, const SignalSeries& e, const SignalSeries& y, Index T_ini, Index N);

struct OfflineDataset {
  SignalSeries u, e, y;
  Index n() const { return y.dim() - 1; }
  Index length() const { return u.length(); }
};

struct CollectionConfig {
  SimConfig sim;
  double v_equilibrium = 15.0;
  double input_amp = 1.0;        // excitation half-width and input clip, m/s^2
  double disturbance_amp = 1.0;  // half-width of the head velocity perturbation, m/s
  bool stabilize = true;         // add the OVM feedback law to the random excitation
};

/// Excites the platoon around equilibrium and records (u, eps, y). Deterministic in seed.
OfflineDataset collect_offline_data(const CollectionConfig& cfg, Index T, std::uint64_t seed);

void write_dataset_csv(std::ostream& out, const OfflineDataset& data);
void write_dataset_csv(const std::string& path, const OfflineDataset& data);
/// expected_n < 0 skips the column-count check.
OfflineDataset read_dataset_csv(std::istream& in, Index expected_n = -1, double dt = 0.05);
OfflineDataset read_dataset_csv(const std::string& path, Index expected_n = -1, double dt = 0.05);

}  // namespace rdeep

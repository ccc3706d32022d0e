#include "rdeep/data_engine.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <vector>

namespace rdeep {

SignalSeries SignalSeries::scalar(const Vector& v, double dt) {
  return SignalSeries(Matrix(v.transpose()), dt);
}

void SignalSeries::validate() const {
  require_dims(values.rows() >= 1, "SignalSeries: dimension must be at least 1");
  require_dims(values.cols() >= 1, "SignalSeries: needs at least one sample");
  require_value(dt > 0.0, "SignalSeries: dt must be positive");
}

Index numerical_rank(const Matrix& A, double rel_tol) {
  if (A.size() == 0) return 0;
  Eigen::BDCSVD<Matrix> svd(A);
  const Vector& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  const double cut = rel_tol * s(0);
  Index r = 0;
  for (Index i = 0; i < s.size(); ++i)
    if (s(i) > cut) ++r;
  return r;
}

Matrix build_hankel(const SignalSeries& series, Index L) {
  series.validate();
  const Index T = series.length();
  const Index m = series.dim();
  if (L < 1 || L >= T) throw DimensionError("build_hankel: need 1 <= L < T");
  const Index cols = T - L + 1;
  Matrix H(m * L, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < L; ++i) H.block(i * m, j, m, 1) = series.values.col(i + j);
  return H;
}

bool is_persistently_exciting(const SignalSeries& series, Index order) {
  const Matrix H = build_hankel(series, order);
  return numerical_rank(H) == series.dim() * order;
}

HankelBlocks partition(const SignalSeries& u, const SignalSeries& e, const SignalSeries& y, Index T_ini, Index N) {
  u.validate();
  e.validate();
  y.validate();
  require_dims(u.length() == e.length() && u.length() == y.length(), "partition: series lengths differ");
  require_dims(u.dim() == 1 && e.dim() == 1, "partition: u and e must be scalar series");
  require_dims(y.dim() >= 1, "partition: empty output");
  require_value(T_ini >= 1 && N >= 1, "partition: T_ini and N must be positive");
  const Index T = u.length();
  const Index L = T_ini + N;
  if (T < L + 1) throw DimensionError("partition: T must be at least T_ini + N + 1");

  const Index p = y.dim();
  const Matrix Hu = build_hankel(u, L);
  const Matrix He = build_hankel(e, L);
  const Matrix Hy = build_hankel(y, L);

  HankelBlocks b;
  b.dims = {T_ini, N, p - 1, T, T - L + 1};
  b.Up = Hu.topRows(T_ini);
  b.Uf = Hu.bottomRows(N);
  b.Ep = He.topRows(T_ini);
  b.Ef = He.bottomRows(N);
  b.Yp = Hy.topRows(p * T_ini);
  b.Yf = Hy.bottomRows(p * N);

  const Index pe_order = L + 2 * b.dims.n;
  b.pe_warning = pe_order >= T || !is_persistently_exciting(u, pe_order);
  return b;
}

OfflineDataset collect_offline_data(const CollectionConfig& cfg, Index T, std::uint64_t seed) {
  require_value(T >= 1, "collect_offline_data: T must be positive");
  const double dt = cfg.sim.dt;
  // The leader holds the equilibrium velocity for the whole run.
  ScenarioScript leader(cfg.v_equilibrium, {{static_cast<double>(T + 1) * dt, ScenarioScript::Mode::hold_velocity,
                                             cfg.v_equilibrium}},
                        dt);
  TrafficSimulator sim(cfg.sim, leader, seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> excite(-cfg.input_amp, cfg.input_amp);
  std::uniform_real_distribution<double> disturb(-cfg.disturbance_amp, cfg.disturbance_amp);

  const double v_star = cfg.v_equilibrium;
  const double s_star = equilibrium_spacing(v_star, cfg.sim.ovm);
  const Index p = static_cast<Index>(cfg.sim.n_followers) + 2;

  Matrix U(1, T), E(1, T), Y(p, T);
  for (Index k = 0; k < T; ++k) {
    sim.pin_head_velocity(v_star + disturb(rng));
    const MeasuredOutput m = measure_output(sim, v_star, s_star);
    double u = excite(rng);
    if (cfg.stabilize) u += sim.cav_ovm_acceleration();
    u = std::clamp(u, -cfg.input_amp, cfg.input_amp);
    U(0, k) = u;
    E(0, k) = m.eps;
    Y.col(k) = m.y;
    sim.step(u);
    if (sim.collided()) {
      std::ostringstream msg;
      msg << "collect_offline_data: collision at step " << k << " (seed " << seed << ")";
      throw SimulationError(msg.str());
    }
  }
  return {SignalSeries(U, dt), SignalSeries(E, dt), SignalSeries(Y, dt)};
}

void write_dataset_csv(std::ostream& out, const OfflineDataset& data) {
  const Index p = data.y.dim();
  out << "k,u,eps";
  for (Index i = 1; i <= p; ++i) out << ",y" << i;
  out << '\n' << std::setprecision(17);
  for (Index k = 0; k < data.length(); ++k) {
    out << k << ',' << data.u.values(0, k) << ',' << data.e.values(0, k);
    for (Index i = 0; i < p; ++i) out << ',' << data.y.values(i, k);
    out << '\n';
  }
}

void write_dataset_csv(const std::string& path, const OfflineDataset& data) {
  std::ofstream f(path);
  if (!f) throw FormatError("cannot open " + path + " for writing");
  write_dataset_csv(f, data);
}

static std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

OfflineDataset read_dataset_csv(std::istream& in, Index expected_n, double dt) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("dataset csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv(line);
  if (header.size() < 4 || header[0] != "k" || header[1] != "u" || header[2] != "eps")
    throw FormatError("dataset csv: header must start with k,u,eps,y1");
  const Index p = static_cast<Index>(header.size()) - 3;
  for (Index i = 0; i < p; ++i)
    if (header[static_cast<std::size_t>(i + 3)] != "y" + std::to_string(i + 1))
      throw FormatError("dataset csv: unexpected column " + header[static_cast<std::size_t>(i + 3)]);
  if (expected_n >= 0 && p != expected_n + 1)
    throw FormatError("dataset csv: expected " + std::to_string(expected_n + 1) + " output columns, found " +
                      std::to_string(p));

  std::vector<std::vector<double>> rows;
  Index lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (static_cast<Index>(cells.size()) != p + 3)
      throw FormatError("dataset csv: wrong column count on line " + std::to_string(lineno));
    std::vector<double> r;
    for (const auto& c : cells) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(c, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != c.size() || c.empty()) throw FormatError("dataset csv: bad number '" + c + "' on line " + std::to_string(lineno));
      r.push_back(v);
    }
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw FormatError("dataset csv: no samples");
  const Index T = static_cast<Index>(rows.size());
  Matrix U(1, T), E(1, T), Y(p, T);
  for (Index k = 0; k < T; ++k) {
    const auto& r = rows[static_cast<std::size_t>(k)];
    U(0, k) = r[1];
    E(0, k) = r[2];
    for (Index i = 0; i < p; ++i) Y(i, k) = r[static_cast<std::size_t>(i + 3)];
  }
  return {SignalSeries(U, dt), SignalSeries(E, dt), SignalSeries(Y, dt)};
}

OfflineDataset read_dataset_csv(const std::string& path, Index expected_n, double dt) {
  std::ifstream f(path);
  if (!f) throw FormatError("cannot open " + path);
  return read_dataset_csv(f, expected_n, dt);
}

}  // namespace rdeep

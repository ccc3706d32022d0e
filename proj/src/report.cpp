#include "rdeep/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace rdeep {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out))
    throw FormatError("config: '" + key + "' expects a number, got '" + v + "'");
  return out;
}

long to_long(const std::string& key, const std::string& v) {
  long out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw FormatError("config: '" + key + "' expects an integer, got '" + v + "'");
  return out;
}

template <class F>
auto reparse(F&& f, const std::string& key) {
  try {
    return f();
  } catch (const ValueError& e) {
    throw FormatError("config: '" + key + "': " + e.what());
  }
}

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

void set_config_value(ControllerConfig& cfg, const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (key == "T_ini") {
    cfg.T_ini = to_long(key, v);
  } else if (key == "N") {
    cfg.N = to_long(key, v);
  } else if (key == "Ts") {
    cfg.Ts = to_long(key, v);
  } else if (key == "equilibrium_window") {
    cfg.equilibrium_window = to_long(key, v);
  } else if (key == "fallback_steps") {
    cfg.fallback_steps = static_cast<int>(to_long(key, v));
  } else if (key == "s_min") {
    cfg.s_min = to_double(key, v);
  } else if (key == "s_max") {
    cfg.s_max = to_double(key, v);
  } else if (key == "u_min") {
    cfg.u_min = to_double(key, v);
  } else if (key == "u_max") {
    cfg.u_max = to_double(key, v);
  } else if (key == "dt") {
    cfg.dt = to_double(key, v);
  } else if (key == "estimator") {
    cfg.estimator = reparse([&] { return parse_estimator(v); }, key);
  } else if (key == "method") {
    cfg.method = reparse([&] { return parse_robust_method(v); }, key);
  } else if (key == "r") {
    cfg.weights.r = to_double(key, v);
  } else if (key == "lambda_g") {
    cfg.weights.lambda_g = to_double(key, v);
  } else if (key == "lambda_y") {
    cfg.weights.lambda_y = to_double(key, v);
  } else if (key == "q_v") {
    const double q = to_double(key, v);
    for (Index i = 0; i + 1 < cfg.weights.q_step.size(); ++i) cfg.weights.q_step(i) = q;
  } else if (key == "q_s") {
    if (cfg.weights.q_step.size() > 0) cfg.weights.q_step(cfg.weights.q_step.size() - 1) = to_double(key, v);
  } else if (key == "solver_tol") {
    cfg.solver.tol = to_double(key, v);
  } else if (key == "solver_max_iterations") {
    cfg.solver.max_iterations = static_cast<int>(to_long(key, v));
  } else if (key == "solver_backend") {
    cfg.solver.backend = v;
  } else {
    throw FormatError("config: unknown key '" + key + "'");
  }
}

void apply_config(std::istream& in, ControllerConfig& cfg) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    try {
      set_config_value(cfg, key, line.substr(eq + 1));
    } catch (const FormatError& e) {
      throw FormatError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void apply_config_file(const std::string& path, ControllerConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config file " + path);
  apply_config(in, cfg);
}

void write_config(std::ostream& out, const ControllerConfig& cfg) {
  const Index nq = cfg.weights.q_step.size();
  out << "T_ini = " << cfg.T_ini << '\n'
      << "N = " << cfg.N << '\n'
      << "Ts = " << cfg.Ts << '\n'
      << "equilibrium_window = " << cfg.equilibrium_window << '\n'
      << "fallback_steps = " << cfg.fallback_steps << '\n'
      << "s_min = " << num(cfg.s_min) << '\n'
      << "s_max = " << num(cfg.s_max) << '\n'
      << "u_min = " << num(cfg.u_min) << '\n'
      << "u_max = " << num(cfg.u_max) << '\n'
      << "dt = " << num(cfg.dt) << '\n'
      << "estimator = " << to_string(cfg.estimator) << '\n'
      << "method = " << to_string(cfg.method) << '\n'
      << "r = " << num(cfg.weights.r) << '\n'
      << "lambda_g = " << num(cfg.weights.lambda_g) << '\n'
      << "lambda_y = " << num(cfg.weights.lambda_y) << '\n';
  if (nq > 1) out << "q_v = " << num(cfg.weights.q_step(0)) << '\n';
  if (nq > 0) out << "q_s = " << num(cfg.weights.q_step(nq - 1)) << '\n';
  out << "solver_tol = " << num(cfg.solver.tol) << '\n'
      << "solver_max_iterations = " << cfg.solver.max_iterations << '\n'
      << "solver_backend = " << cfg.solver.backend << '\n';
}

// ---------------------------------------------------------------------------

SummaryRows run_summary(const RunConfig& cfg, const RunResult& r) {
  double fuel = 0.0;
  for (double f : r.cf_fuel) fuel += f;
  int controlled = 0, iters = 0;
  for (const StepLog& s : r.steps)
    if (s.controlled) {
      ++controlled;
      iters += s.iterations;
    }
  SummaryRows rows{
      {"controller", to_string(cfg.controller)},
      {"estimator", to_string(cfg.ctrl.estimator)},
      {"method", to_string(cfg.ctrl.method)},
      {"Ts", std::to_string(cfg.ctrl.Ts)},
      {"seed", std::to_string(cfg.seed)},
      {"steps", std::to_string(r.steps_run)},
      {"controlled_steps", std::to_string(controlled)},
      {"fallbacks", std::to_string(r.fallbacks)},
      {"collision", r.collision ? "1" : "0"},
      {"min_spacing", num(r.safety.min_spacing)},
      {"max_spacing", num(r.safety.max_spacing)},
      {"violation", r.safety.violation ? "1" : "0"},
      {"emergency", r.safety.emergency ? "1" : "0"},
      {"fuel_ml", num(fuel)},
      {"mean_iterations", num(controlled ? static_cast<double>(iters) / controlled : 0.0)},
  };
  return rows;
}

void write_summary_csv(std::ostream& out, const SummaryRows& rows) {
  out << "metric,value\n";
  for (const auto& [k, v] : rows) out << k << ',' << v << '\n';
}

// ---------------------------------------------------------------------------

namespace {

double nice_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (m * mag >= raw) return m * mag;
  return 10.0 * mag;
}

std::string esc(const std::string& s) {
  std::string o;
  for (char c : s) {
    if (c == '&') o += "&amp;";
    else if (c == '<') o += "&lt;";
    else if (c == '>') o += "&gt;";
    else o += c;
  }
  return o;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

}  // namespace

void write_svg_chart(std::ostream& out, const std::string& title, const std::string& x_label, const std::string& y_label,
                     const std::vector<PlotSeries>& series, int width, int height) {
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const PlotSeries& s : series)
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (!(x0 <= x1)) x0 = 0.0, x1 = 1.0;
  if (!(y0 <= y1)) y0 = 0.0, y1 = 1.0;
  if (x1 - x0 < 1e-12) x1 = x0 + 1.0;
  if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
  const double ystep = nice_step(y1 - y0, 6);
  y0 = std::floor(y0 / ystep) * ystep;
  y1 = std::ceil(y1 / ystep) * ystep;
  const double xstep = nice_step(x1 - x0, 8);

  const double L = 70, R = 150, T = 40, B = 50;
  const double pw = width - L - R, ph = height - T - B;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return T + (y1 - y) / (y1 - y0) * ph; };

  out << std::fixed << std::setprecision(2);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << width / 2.0 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << esc(title)
      << "</text>\n";
  for (double y = y0; y <= y1 + 1e-9 * ystep; y += ystep) {
    out << "<line x1=\"" << L << "\" y1=\"" << py(y) << "\" x2=\"" << L + pw << "\" y2=\"" << py(y)
        << "\" stroke=\"#e0e0e0\"/>\n";
    out << "<text x=\"" << L - 6 << "\" y=\"" << py(y) + 4 << "\" text-anchor=\"end\">" << std::setprecision(3)
        << std::defaultfloat << y << std::fixed << std::setprecision(2) << "</text>\n";
  }
  for (double x = std::ceil(x0 / xstep) * xstep; x <= x1 + 1e-9 * xstep; x += xstep) {
    out << "<line x1=\"" << px(x) << "\" y1=\"" << T + ph << "\" x2=\"" << px(x) << "\" y2=\"" << T + ph + 5
        << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << px(x) << "\" y=\"" << T + ph + 18 << "\" text-anchor=\"middle\">" << std::setprecision(4)
        << std::defaultfloat << x << std::fixed << std::setprecision(2) << "</text>\n";
  }
  out << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  out << "<text x=\"" << L + pw / 2 << "\" y=\"" << height - 10 << "\" text-anchor=\"middle\">" << esc(x_label)
      << "</text>\n";
  out << "<text transform=\"translate(18," << T + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">" << esc(y_label)
      << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const PlotSeries& s = series[k];
    const char* color = kPalette[k % (sizeof(kPalette) / sizeof(kPalette[0]))];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i)
      if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) out << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
    out << "\"/>\n";
    const double ly = T + 14 + 18.0 * static_cast<double>(k);
    out << "<line x1=\"" << L + pw + 12 << "\" y1=\"" << ly << "\" x2=\"" << L + pw + 36 << "\" y2=\"" << ly
        << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << L + pw + 42 << "\" y=\"" << ly + 4 << "\">" << esc(s.label) << "</text>\n";
  }
  out << "</svg>\n";
  out << std::defaultfloat;
}

std::vector<PlotSeries> trajectory_series(const std::vector<TrajectoryRow>& rows, bool spacing) {
  std::map<int, PlotSeries> by_id;
  for (const TrajectoryRow& r : rows) {
    const double v = spacing ? r.spacing : r.velocity;
    if (!std::isfinite(v)) continue;
    PlotSeries& s = by_id[r.veh_id];
    if (s.label.empty()) s.label = "veh " + std::to_string(r.veh_id) + " (" + to_string(r.role) + ")";
    s.x.push_back(r.t);
    s.y.push_back(v);
  }
  std::vector<PlotSeries> out;
  for (auto& [id, s] : by_id) out.push_back(std::move(s));
  return out;
}

}  // namespace rdeep

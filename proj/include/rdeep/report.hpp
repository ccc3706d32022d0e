#pragma once

#include "rdeep/harness.hpp"

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace rdeep {

/// Sets one ControllerConfig field from its textual form. Unknown keys and bad values throw FormatError.
void set_config_value(ControllerConfig& cfg, const std::string& key, const std::string& value);

/// Reads flat `key = value` lines onto cfg; blank lines and `#` comments are skipped.
void apply_config(std::istream& in, ControllerConfig& cfg);
void apply_config_file(const std::string& path, ControllerConfig& cfg);

/// Current values in the same format apply_config reads.
void write_config(std::ostream& out, const ControllerConfig& cfg);

using SummaryRows = std::vector<std::pair<std::string, std::string>>;

SummaryRows run_summary(const RunConfig& cfg, const RunResult& r);
void write_summary_csv(std::ostream& out, const SummaryRows& rows);

struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
};

/// Static line chart with axes, ticks and a legend.
void write_svg_chart(std::ostream& out, const std::string& title, const std::string& x_label, const std::string& y_label,
                     const std::vector<PlotSeries>& series, int width = 800, int height = 400);

/// Velocity and spacing traces per vehicle, taken from a recorded trajectory.
std::vector<PlotSeries> trajectory_series(const std::vector<TrajectoryRow>& rows, bool spacing);

}  // namespace rdeep

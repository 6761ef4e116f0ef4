#pragma once

#include <maipp/types.hpp>

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace maipp {

using Polyline = std::vector<Vec2>;

/// Unit-square axes with one colored polyline per agent.
std::string svg_trajectories(const std::vector<Polyline>& agents, const std::string& title = "");

/// r x r heatmap (row-major, x fastest, y up) with a gray-to-red scale.
std::string svg_heatmap(const Eigen::VectorXd& values, int resolution, const std::string& title = "");

/// Trace versus distance travelled.
std::string svg_trace_curve(const std::vector<std::pair<double, double>>& curve, const std::string& title = "");

// Readers for episode dumps; all throw std::invalid_argument on malformed input.
std::vector<Polyline> read_trajectories_csv(std::istream& is);
Eigen::VectorXd read_grid_csv(std::istream& is, int& resolution);
std::vector<std::pair<double, double>> read_curve_csv(std::istream& is);
void write_curve_csv(std::ostream& os, const std::vector<std::pair<double, double>>& curve);

}  // namespace maipp

#pragma once

#include <maipp/types.hpp>

#include <vector>

namespace maipp {

/// Points at which measurements fall while travelling a polyline, given the
/// distance already travelled since the last measurement. Updates `carry` to
/// the distance travelled since the last emitted point.
std::vector<Vec2> points_along(const std::vector<Vec2>& polyline, double interval, double& carry);

inline std::vector<Vec2> points_along(const std::vector<Vec2>& polyline, double interval) {
  double carry = 0.0;
  return points_along(polyline, interval, carry);
}

double polyline_length(const std::vector<Vec2>& polyline);

/// Prefix of a polyline with the given arc length (clamped to the total).
std::vector<Vec2> polyline_prefix(const std::vector<Vec2>& polyline, double length);

}  // namespace maipp

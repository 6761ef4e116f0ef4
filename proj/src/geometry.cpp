#include <maipp/geometry.hpp>

#include <stdexcept>

namespace maipp {

namespace {
constexpr double kArcTol = 1e-12;
}

std::vector<Vec2> points_along(const std::vector<Vec2>& polyline, double interval, double& carry) {
  if (!(interval > 0)) throw std::invalid_argument("points_along: interval must be positive");
  std::vector<Vec2> out;
  for (std::size_t s = 1; s < polyline.size(); ++s) {
    const Vec2 a = polyline[s - 1];
    const Vec2 b = polyline[s];
    const double len = (b - a).norm();
    double offset = interval - carry;
    while (offset <= len + kArcTol) {
      const double t = len > 0 ? std::min(offset / len, 1.0) : 1.0;
      out.push_back(a + t * (b - a));
      offset += interval;
    }
    carry = len - (offset - interval);
    if (carry < 0) carry = 0;
  }
  return out;
}

double polyline_length(const std::vector<Vec2>& polyline) {
  double l = 0.0;
  for (std::size_t s = 1; s < polyline.size(); ++s) l += (polyline[s] - polyline[s - 1]).norm();
  return l;
}

std::vector<Vec2> polyline_prefix(const std::vector<Vec2>& polyline, double length) {
  std::vector<Vec2> out;
  if (polyline.empty()) return out;
  out.push_back(polyline.front());
  double left = length;
  for (std::size_t s = 1; s < polyline.size() && left > 0; ++s) {
    const Vec2 a = polyline[s - 1];
    const Vec2 b = polyline[s];
    const double len = (b - a).norm();
    if (len <= left) {
      out.push_back(b);
      left -= len;
    } else {
      out.push_back(a + (left / len) * (b - a));
      left = 0;
    }
  }
  return out;
}

}  // namespace maipp

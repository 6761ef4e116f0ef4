#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <vector>

namespace maipp {

/// Locations stored one per row.
template <typename Scalar>
using Points = Eigen::Matrix<Scalar, Eigen::Dynamic, 2>;

using Points2d = Points<double>;
using Vec2 = Eigen::Vector2d;
using Rng = std::mt19937_64;

inline Points2d to_points(const std::vector<Vec2>& v) {
  Points2d p(static_cast<Eigen::Index>(v.size()), 2);
  for (std::size_t i = 0; i < v.size(); ++i) p.row(static_cast<Eigen::Index>(i)) = v[i].transpose();
  return p;
}

/// Child stream derived from a seed and a tag; used to keep independent
/// random streams (actions, intent sampling, noise) decoupled.
inline Rng derive_rng(std::uint64_t seed, std::uint64_t tag_a, std::uint64_t tag_b = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag_a), static_cast<std::uint32_t>(tag_a >> 32),
                    static_cast<std::uint32_t>(tag_b), static_cast<std::uint32_t>(tag_b >> 32)};
  return Rng(seq);
}

inline bool in_unit_square(const Vec2& p) {
  return p.x() >= 0.0 && p.x() <= 1.0 && p.y() >= 0.0 && p.y() <= 1.0;
}

}  // namespace maipp

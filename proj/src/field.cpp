#include <maipp/field.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace maipp {

void FieldConfig::validate() const {
  if (min_components < 1 || min_components > max_components)
    throw std::invalid_argument("field config: invalid component count range");
  if (!(min_std > 0) || min_std > max_std) throw std::invalid_argument("field config: invalid std range");
  if (!(min_weight > 0) || min_weight > max_weight)
    throw std::invalid_argument("field config: invalid weight range");
  if (grid_resolution < 1) throw std::invalid_argument("field config: grid resolution must be positive");
}

Points2d grid_points(int resolution) {
  Points2d g(static_cast<Eigen::Index>(resolution) * resolution, 2);
  for (int r = 0; r < resolution; ++r) {
    for (int c = 0; c < resolution; ++c) {
      g(r * resolution + c, 0) = (c + 0.5) / resolution;
      g(r * resolution + c, 1) = (r + 0.5) / resolution;
    }
  }
  return g;
}

GroundTruth::GroundTruth(std::vector<GaussianComponent> components, int grid_resolution)
    : components_(std::move(components)), normalizer_(0.0) {
  if (components_.empty()) throw std::invalid_argument("ground truth needs at least one component");
  for (const auto& c : components_) {
    if (!(c.std > 0) || !(c.weight > 0)) throw std::invalid_argument("component std and weight must be positive");
  }
  const Points2d grid = grid_points(grid_resolution);
  for (Eigen::Index i = 0; i < grid.rows(); ++i) normalizer_ = std::max(normalizer_, raw(grid.row(i).transpose()));
  if (!(normalizer_ > 0)) throw std::invalid_argument("ground truth vanishes on the grid");
}

double GroundTruth::raw(const Vec2& loc) const {
  double v = 0.0;
  for (const auto& c : components_) {
    const double s2 = c.std * c.std;
    v += c.weight / (2.0 * std::numbers::pi * s2) * std::exp(-(loc - c.mean).squaredNorm() / (2.0 * s2));
  }
  return v;
}

GroundTruth generate_ground_truth(Rng& rng, const FieldConfig& cfg) {
  cfg.validate();
  std::uniform_int_distribution<int> count(cfg.min_components, cfg.max_components);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> stdev(cfg.min_std, cfg.max_std);
  std::uniform_real_distribution<double> weight(cfg.min_weight, cfg.max_weight);
  const int n = count(rng);
  std::vector<GaussianComponent> comps;
  comps.reserve(n);
  for (int i = 0; i < n; ++i) {
    GaussianComponent c;
    c.mean.x() = unit(rng);
    c.mean.y() = unit(rng);
    c.std = stdev(rng);
    c.weight = weight(rng);
    comps.push_back(c);
  }
  return GroundTruth(std::move(comps), cfg.grid_resolution);
}

double query(const GroundTruth& gt, const Vec2& loc) {
  if (!in_unit_square(loc)) throw std::invalid_argument("query: location outside [0,1]^2");
  // Off-grid peaks can exceed the grid maximum.
  return std::clamp(gt.raw(loc) / gt.normalizer(), 0.0, 1.0);
}

double measure(const GroundTruth& gt, const Vec2& loc, double noise_std, Rng& rng) {
  if (noise_std < 0) throw std::invalid_argument("measure: negative noise std");
  const double v = query(gt, loc);
  if (noise_std == 0) return v;
  std::normal_distribution<double> noise(0.0, noise_std);
  return v + noise(rng);
}

Eigen::VectorXd rasterize(const GroundTruth& gt, int resolution) {
  const Points2d grid = grid_points(resolution);
  Eigen::VectorXd out(grid.rows());
  for (Eigen::Index i = 0; i < grid.rows(); ++i) out(i) = query(gt, grid.row(i).transpose());
  return out;
}

}  // namespace maipp

#pragma once

#include <maipp/types.hpp>

#include <vector>

namespace maipp {

struct FieldConfig {
  int min_components = 8;
  int max_components = 12;
  double min_std = 0.05;
  double max_std = 0.2;
  double min_weight = 0.5;
  double max_weight = 1.0;
  int grid_resolution = 30;

  void validate() const;
};

struct GaussianComponent {
  Vec2 mean;
  double std;
  double weight;

  bool operator==(const GaussianComponent&) const = default;
};

/// Hidden interest map: an isotropic Gaussian mixture scaled so that its
/// maximum over the inference grid is one. Immutable once built.
class GroundTruth {
 public:
  GroundTruth(std::vector<GaussianComponent> components, int grid_resolution = 30);

  const std::vector<GaussianComponent>& components() const { return components_; }
  double normalizer() const { return normalizer_; }

  /// Unnormalized mixture density.
  double raw(const Vec2& loc) const;

 private:
  std::vector<GaussianComponent> components_;
  double normalizer_;
};

GroundTruth generate_ground_truth(Rng& rng, const FieldConfig& cfg = {});

/// Normalized interest in [0,1]. Throws for locations outside [0,1]^2.
double query(const GroundTruth& gt, const Vec2& loc);

double measure(const GroundTruth& gt, const Vec2& loc, double noise_std, Rng& rng);

/// Cell centers of an r x r grid over [0,1]^2, row-major with x varying fastest.
Points2d grid_points(int resolution);

/// Normalized field sampled at the grid cell centers (row-major).
Eigen::VectorXd rasterize(const GroundTruth& gt, int resolution);

}  // namespace maipp

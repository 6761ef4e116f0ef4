#pragma once

#include <maipp/gp.hpp>

#include <iosfwd>
#include <vector>

namespace maipp {

using GpHyper = GpHyperParams<double>;

struct Posterior {
  Eigen::VectorXd mean;        // over the inference grid
  Eigen::MatrixXd covariance;  // grid x grid
};

/// GP belief over a fixed r x r inference grid. A value type: measurements are
/// appended, then `refit()` recomputes the cached grid mean and variances.
class BeliefState {
 public:
  explicit BeliefState(GpHyper hyper = {}, int resolution = 30);

  void add(const Vec2& loc, double value);
  void set_measurements(Points2d locations, Eigen::VectorXd values);

  /// Recomputes the factorization and grid caches.
  void refit();
  bool valid() const { return valid_; }

  const Points2d& locations() const { return x_; }
  const Eigen::VectorXd& values() const { return y_; }
  const GpHyper& hyper() const { return hyper_; }
  const Points2d& grid() const { return grid_; }
  int resolution() const { return resolution_; }
  Eigen::Index size() const { return x_.rows(); }

  // Cached quantities; require valid().
  const TargetPosterior<double>& grid_posterior() const;
  const Eigen::VectorXd& mean() const;
  const Eigen::VectorXd& variance() const { return grid_posterior().variances(); }
  double trace() const { return grid_posterior().trace(); }

  /// Mean and variance evaluated directly at arbitrary points.
  Eigen::VectorXd mean_at(const Points2d& pts) const;
  Eigen::VectorXd variance_at(const Points2d& pts) const;
  TargetPosterior<double> posterior_at(const Points2d& pts) const;

 private:
  GpHyper hyper_;
  int resolution_;
  Points2d grid_;
  Points2d x_{0, 2};
  Eigen::VectorXd y_{0};
  bool valid_ = false;
  GpConditioner<double> cond_;
  TargetPosterior<double> grid_post_;
  Eigen::VectorXd alpha_;  // L^{-1} y
  Eigen::VectorXd mean_;
};

Posterior posterior(const BeliefState& belief);

/// Full grid covariance as if measurements were also taken at `extra`.
Eigen::MatrixXd hypothetical_covariance(const BeliefState& belief, const Points2d& extra);

std::vector<int> high_interest_set(const Eigen::VectorXd& mean, const Eigen::VectorXd& variance,
                                   double threshold, double beta);
std::vector<int> high_interest_set(const Eigen::VectorXd& mean, const Eigen::MatrixXd& covariance,
                                   double threshold, double beta);

double restricted_trace(const Eigen::VectorXd& variance, const std::vector<int>& idx);
double info_gain(const Eigen::MatrixXd& before, const Eigen::MatrixXd& after, const std::vector<int>& idx);

/// Row-major r x r CSV of a grid vector.
void write_grid_csv(std::ostream& os, const Eigen::VectorXd& values, int resolution);

}  // namespace maipp

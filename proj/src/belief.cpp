#include <maipp/belief.hpp>
#include <maipp/field.hpp>

#include <ostream>
#include <stdexcept>

namespace maipp {

BeliefState::BeliefState(GpHyper hyper, int resolution)
    : hyper_(hyper), resolution_(resolution), grid_(grid_points(resolution)) {
  hyper_.validate();
}

void BeliefState::add(const Vec2& loc, double value) {
  x_.conservativeResize(x_.rows() + 1, 2);
  x_.row(x_.rows() - 1) = loc.transpose();
  y_.conservativeResize(y_.size() + 1);
  y_(y_.size() - 1) = value;
  valid_ = false;
}

void BeliefState::set_measurements(Points2d locations, Eigen::VectorXd values) {
  if (locations.rows() != values.size()) throw std::invalid_argument("belief: |X| != |Y|");
  x_ = std::move(locations);
  y_ = std::move(values);
  valid_ = false;
}

void BeliefState::refit() {
  cond_ = GpConditioner<double>(x_, hyper_);
  grid_post_ = TargetPosterior<double>(cond_, grid_);
  alpha_ = cond_.whiten(y_);
  mean_ = grid_post_.mean(y_);
  if (!mean_.allFinite() || !grid_post_.variances().allFinite())
    throw std::runtime_error("belief refit produced non-finite values");
  valid_ = true;
}

const TargetPosterior<double>& BeliefState::grid_posterior() const {
  if (!valid_) throw std::logic_error("belief: refit() required");
  return grid_post_;
}

const Eigen::VectorXd& BeliefState::mean() const {
  if (!valid_) throw std::logic_error("belief: refit() required");
  return mean_;
}

TargetPosterior<double> BeliefState::posterior_at(const Points2d& pts) const {
  if (!valid_) throw std::logic_error("belief: refit() required");
  return TargetPosterior<double>(cond_, pts);
}

Eigen::VectorXd BeliefState::mean_at(const Points2d& pts) const {
  if (!valid_) throw std::logic_error("belief: refit() required");
  if (size() == 0) return Eigen::VectorXd::Zero(pts.rows());
  return cond_.whiten(kernel_matrix(x_, pts, hyper_)).transpose() * alpha_;
}

Eigen::VectorXd BeliefState::variance_at(const Points2d& pts) const { return posterior_at(pts).variances(); }

Posterior posterior(const BeliefState& belief) {
  BeliefState b = belief;
  if (!b.valid()) b.refit();
  return {b.mean(), b.grid_posterior().covariance()};
}

Eigen::MatrixXd hypothetical_covariance(const BeliefState& belief, const Points2d& extra) {
  for (Eigen::Index i = 0; i < extra.rows(); ++i) {
    if (!in_unit_square(extra.row(i).transpose()))
      throw std::invalid_argument("hypothetical_covariance: location outside [0,1]^2");
  }
  BeliefState b = belief;
  if (!b.valid()) b.refit();
  return b.grid_posterior().with_extra(extra).covariance();
}

std::vector<int> high_interest_set(const Eigen::VectorXd& mean, const Eigen::VectorXd& variance,
                                   double threshold, double beta) {
  if (mean.size() != variance.size()) throw std::invalid_argument("high_interest_set: size mismatch");
  std::vector<int> idx;
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    if (mean(i) + beta * variance(i) >= threshold) idx.push_back(static_cast<int>(i));
  }
  return idx;
}

std::vector<int> high_interest_set(const Eigen::VectorXd& mean, const Eigen::MatrixXd& covariance,
                                   double threshold, double beta) {
  return high_interest_set(mean, Eigen::VectorXd(covariance.diagonal()), threshold, beta);
}

double restricted_trace(const Eigen::VectorXd& variance, const std::vector<int>& idx) {
  double t = 0.0;
  for (int i : idx) t += variance(i);
  return t;
}

double info_gain(const Eigen::MatrixXd& before, const Eigen::MatrixXd& after, const std::vector<int>& idx) {
  return restricted_trace(before.diagonal(), idx) - restricted_trace(after.diagonal(), idx);
}

void write_grid_csv(std::ostream& os, const Eigen::VectorXd& values, int resolution) {
  if (values.size() != static_cast<Eigen::Index>(resolution) * resolution)
    throw std::invalid_argument("write_grid_csv: size mismatch");
  os.precision(17);
  for (int r = 0; r < resolution; ++r) {
    for (int c = 0; c < resolution; ++c) {
      if (c) os << ',';
      os << values(r * resolution + c);
    }
    os << '\n';
  }
}

}  // namespace maipp

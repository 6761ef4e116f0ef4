#include <maipp/field.hpp>

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace maipp;

namespace {

double mixture_oracle(const std::vector<GaussianComponent>& comps, const Vec2& p) {
  double s = 0.0;
  for (const auto& c : comps) {
    const double dx = p.x() - c.mean.x(), dy = p.y() - c.mean.y();
    s += c.weight * std::exp(-(dx * dx + dy * dy) / (2 * c.std * c.std)) / (2 * std::numbers::pi * c.std * c.std);
  }
  return s;
}

}  // namespace

TEST_CASE("generated fields have 8 to 12 components and are reproducible") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng a(seed), b(seed);
    const GroundTruth ga = generate_ground_truth(a);
    const GroundTruth gb = generate_ground_truth(b);
    CHECK(ga.components().size() >= 8);
    CHECK(ga.components().size() <= 12);
    CHECK(ga.components() == gb.components());
    for (const auto& c : ga.components()) {
      CHECK(c.std >= 0.05);
      CHECK(c.std <= 0.2);
      CHECK(c.weight >= 0.5);
      CHECK(c.weight <= 1.0);
      CHECK(in_unit_square(c.mean));
    }
  }
}

TEST_CASE("grid maximum of the normalized field is one") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const GroundTruth gt = generate_ground_truth(rng);
    const Eigen::VectorXd grid = rasterize(gt, 30);
    CHECK(grid.size() == 900);
    CHECK(std::abs(grid.maxCoeff() - 1.0) <= 1e-12);
    CHECK(grid.minCoeff() >= 0.0);
  }
}

TEST_CASE("single centered component peaks at one") {
  const GroundTruth gt({{Vec2(0.5, 0.5), 0.1, 1.0}});
  CHECK(query(gt, Vec2(0.5, 0.5)) == 1.0);
  // Radial symmetry.
  CHECK(query(gt, Vec2(0.6, 0.5)) == doctest::Approx(query(gt, Vec2(0.5, 0.4))).epsilon(1e-14));
  CHECK(query(gt, Vec2(0.7, 0.5)) < query(gt, Vec2(0.6, 0.5)));
}

TEST_CASE("query matches a brute-force mixture density") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const GroundTruth gt = generate_ground_truth(rng);
    double norm = 0.0;
    const Points2d g = testing::oracle_grid(30);
    for (Eigen::Index i = 0; i < g.rows(); ++i) norm = std::max(norm, mixture_oracle(gt.components(), g.row(i)));
    for (int k = 0; k < 20; ++k) {
      const Vec2 p = testing::random_point(rng);
      const double expect = std::min(1.0, mixture_oracle(gt.components(), p) / norm);
      CHECK(query(gt, p) == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("query rejects points outside the unit square") {
  const GroundTruth gt({{Vec2(0.5, 0.5), 0.1, 1.0}});
  CHECK_THROWS_AS(query(gt, Vec2(-0.01, 0.5)), std::invalid_argument);
  CHECK_THROWS_AS(query(gt, Vec2(0.5, 1.01)), std::invalid_argument);
  CHECK_NOTHROW(query(gt, Vec2(1.0, 0.0)));
}

TEST_CASE("noiseless measurement equals query") {
  Rng rng(3);
  const GroundTruth gt = generate_ground_truth(rng);
  for (int k = 0; k < 50; ++k) {
    const Vec2 p = testing::random_point(rng);
    CHECK(measure(gt, p, 0.0, rng) == query(gt, p));
  }
  CHECK_THROWS_AS(measure(gt, Vec2(0.5, 0.5), -0.1, rng), std::invalid_argument);
}

TEST_CASE("measurement noise has the requested moments") {
  Rng rng(5);
  const GroundTruth gt = generate_ground_truth(rng);
  const Vec2 p(0.3, 0.7);
  const double truth = query(gt, p);
  const double sd = 0.1;
  const int n = 10000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = measure(gt, p, sd, rng);
    sum += v;
    sq += v * v;
  }
  const double mean = sum / n;
  const double sample_sd = std::sqrt(sq / n - mean * mean);
  CHECK(std::abs(mean - truth) <= 4 * sd / 100);
  CHECK(std::abs(sample_sd - sd) <= 0.05 * sd);
}

TEST_CASE("invalid field configs are rejected") {
  Rng rng(0);
  FieldConfig c;
  c.min_components = 5;
  c.max_components = 4;
  CHECK_THROWS_AS(generate_ground_truth(rng, c), std::invalid_argument);
  c = {};
  c.min_std = 0.0;
  CHECK_THROWS_AS(generate_ground_truth(rng, c), std::invalid_argument);
  c = {};
  c.min_std = 0.3;
  c.max_std = 0.2;
  CHECK_THROWS_AS(generate_ground_truth(rng, c), std::invalid_argument);
}

TEST_CASE("grid points are row-major cell centers") {
  const Points2d g = grid_points(30);
  CHECK(g.rows() == 900);
  CHECK(g(0, 0) == doctest::Approx(1.0 / 60));
  CHECK(g(1, 0) == doctest::Approx(3.0 / 60));
  CHECK(g(1, 1) == doctest::Approx(1.0 / 60));
  CHECK(g(30, 1) == doctest::Approx(3.0 / 60));
  CHECK((g - testing::oracle_grid(30)).cwiseAbs().maxCoeff() == 0.0);
}

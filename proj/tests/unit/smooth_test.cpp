#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <random>

#include "helpers.hpp"
#include "scenforge/smooth.hpp"

using namespace scenforge;

namespace {

double binom(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Linear least squares via the normal equations: (B^T B) P = B^T Y.
std::vector<Vec2> normal_equations(const std::vector<Vec2>& pts, const std::vector<double>& t, int n) {
  Eigen::MatrixXd B(pts.size(), n + 1);
  Eigen::MatrixXd Y(pts.size(), 2);
  for (std::size_t r = 0; r < pts.size(); ++r) {
    for (int i = 0; i <= n; ++i) B(r, i) = binom(n, i) * std::pow(1 - t[r], n - i) * std::pow(t[r], i);
    Y(r, 0) = pts[r].x;
    Y(r, 1) = pts[r].y;
  }
  const Eigen::MatrixXd P = (B.transpose() * B).ldlt().solve(B.transpose() * Y);
  std::vector<Vec2> out;
  for (int i = 0; i <= n; ++i) out.push_back({P(i, 0), P(i, 1)});
  return out;
}

std::vector<Vec2> zigzag(int n) {
  std::vector<Vec2> pts;
  for (int i = 0; i < n; ++i) pts.push_back({i * 1.0, (i % 2 ? 0.3 : -0.3) + 0.02 * i * i});
  return pts;
}

std::vector<double> uniform_times(std::size_t n) {
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = i * 0.1;
  return t;
}

}  // namespace

TEST(Bezier, LinearMidpoint) {
  const BezierCurve c{1, {{0, 0}, {1, 1}}, {}};
  const auto p = bezier_eval(c, 0.5);
  EXPECT_DOUBLE_EQ(p.x, 0.5);
  EXPECT_DOUBLE_EQ(p.y, 0.5);
}

TEST(Bezier, QuadraticHandWeights) {
  const BezierCurve c{2, {{0, 0}, {1, 0}, {1, 1}}, {}};
  const auto p = bezier_eval(c, 0.5);
  EXPECT_DOUBLE_EQ(p.x, 0.75);
  EXPECT_DOUBLE_EQ(p.y, 0.25);
  EXPECT_DOUBLE_EQ(bernstein(2, 1, 0.5), 0.5);
}

TEST(Bezier, EndpointsAndDomain) {
  const BezierCurve c{3, {{1, 2}, {5, -1}, {0, 7}, {3, 3}}, {}};
  EXPECT_EQ(bezier_eval(c, 0.0).x, 1.0);
  EXPECT_EQ(bezier_eval(c, 1.0).y, 3.0);
  EXPECT_THROW(bezier_eval(c, 1.0001), ArgumentError);
  EXPECT_THROW(bezier_eval(c, -0.1), ArgumentError);
  const double h = 1e-6;
  const auto d = bezier_derivative(c, 0.4);
  EXPECT_NEAR(d.x, (bezier_eval(c, 0.4 + h).x - bezier_eval(c, 0.4 - h).x) / (2 * h), 1e-6);
}

TEST(TimeMap, NormalizedToUnitInterval) {
  const std::vector<double> ts = {2.0, 2.5, 4.0};
  EXPECT_EQ(normalized_time_map(ts), (std::vector<double>{0.0, 0.25, 1.0}));
}

TEST(FitBezier, CollinearExact) {
  const std::vector<Vec2> pts = {{0, 0}, {0.5, 0.5}, {1, 1}};
  const std::vector<double> t = {0, 0.5, 1};
  BezierFitOptions opt;
  opt.degree = 1;
  const auto fit = fit_bezier(pts, t, opt);
  EXPECT_LT(fit.sse, 1e-12);
  EXPECT_NEAR(fit.curve.control_points[0].x, 0.0, 1e-6);
  EXPECT_NEAR(fit.curve.control_points[1].y, 1.0, 1e-6);
}

TEST(FitBezier, MatchesNormalEquations) {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> g(0, 1);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + trial % 4;
    std::vector<Vec2> pts;
    for (int i = 0; i < 30; ++i) pts.push_back({i + 0.5 * g(rng), std::sin(i * 0.2) * 5 + 0.5 * g(rng)});
    const auto t = normalized_time_map(uniform_times(pts.size()));
    BezierFitOptions opt;
    opt.degree = n;
    opt.minimizer.max_iterations = 2000;
    opt.minimizer.gradient_tolerance = 1e-10;
    const auto fit = fit_bezier(pts, t, opt);
    const auto oracle = normal_equations(pts, t, n);
    for (int i = 0; i <= n; ++i) {
      EXPECT_NEAR(fit.curve.control_points[i].x, oracle[i].x, 1e-6) << trial;
      EXPECT_NEAR(fit.curve.control_points[i].y, oracle[i].y, 1e-6) << trial;
    }
  }
}

TEST(FitBezier, TooFewPoints) {
  const std::vector<Vec2> pts = {{0, 0}, {1, 1}};
  const std::vector<double> t = {0, 1};
  EXPECT_THROW(fit_bezier(pts, t, {}), ArgumentError);
}

TEST(FitBezier, BoundsHonoured) {
  const auto pts = zigzag(20);
  const auto t = normalized_time_map(uniform_times(pts.size()));
  BezierFitOptions opt;
  opt.degree = 3;
  opt.bounds = BoxBounds{std::vector<double>(8, -1.0), std::vector<double>(8, 1.0)};
  const auto fit = fit_bezier(pts, t, opt);
  for (const auto& p : fit.curve.control_points) {
    EXPECT_GE(p.x, -1.0);
    EXPECT_LE(p.x, 1.0);
    EXPECT_GE(p.y, -1.0);
    EXPECT_LE(p.y, 1.0);
  }
  EXPECT_LE(fit.sse, fit.initial_sse);
}

TEST(FitBezier, IterationCapFlagsBestSoFar) {
  const auto pts = zigzag(40);
  const auto t = normalized_time_map(uniform_times(pts.size()));
  BezierFitOptions opt;
  opt.degree = 6;
  opt.minimizer.max_iterations = 1;
  const auto fit = fit_bezier(pts, t, opt);
  EXPECT_FALSE(fit.converged);
  EXPECT_LE(fit.sse, fit.initial_sse);
}

TEST(Sse, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0, 1);
  const auto pts = zigzag(25);
  const auto t = normalized_time_map(uniform_times(pts.size()));
  std::vector<double> c(10);
  for (auto& x : c) x = 3 * g(rng);
  std::vector<double> grad;
  bezier_sse(c, pts, t, &grad);
  for (std::size_t k = 0; k < c.size(); ++k) {
    auto up = c, down = c;
    up[k] += 1e-5;
    down[k] -= 1e-5;
    const double fd = (bezier_sse(up, pts, t) - bezier_sse(down, pts, t)) / 2e-5;
    EXPECT_LT(std::abs(fd - grad[k]) / std::max(std::abs(fd), 1e-8), 1e-6);
  }
}

TEST(Minimizer, Rosenbrock) {
  const Objective f = [](std::span<const double> x, std::vector<double>& g) {
    g = {-2 * (1 - x[0]) - 400 * x[0] * (x[1] - x[0] * x[0]), 200 * (x[1] - x[0] * x[0])};
    return (1 - x[0]) * (1 - x[0]) + 100 * (x[1] - x[0] * x[0]) * (x[1] - x[0] * x[0]);
  };
  MinimizerOptions opt;
  opt.max_iterations = 500;
  const auto r = minimize_lbfgsb(f, {-1.2, 1.0}, std::nullopt, opt);
  EXPECT_NEAR(r.x[0], 1.0, 1e-5);
  EXPECT_NEAR(r.x[1], 1.0, 1e-5);
  const auto boxed = minimize_lbfgsb(f, {-1.2, 1.0}, BoxBounds{{-2, -2}, {0.5, 2}}, opt);
  EXPECT_NEAR(boxed.x[0], 0.5, 1e-6);
  EXPECT_NEAR(boxed.x[1], 0.25, 1e-4);
}

TEST(HeadingStats, StraightLine) {
  std::vector<Vec2> pts;
  for (int i = 0; i < 10; ++i) pts.push_back({i * 1.0, i * 2.0});
  const auto s = heading_stats(pts);
  EXPECT_EQ(s.max_abs_heading_change_per_step, 0.0);
  EXPECT_EQ(s.max_curvature, 0.0);
}

TEST(HeadingStats, QuarterCircleCurvature) {
  std::vector<Vec2> pts;
  for (int d = 0; d <= 90; ++d) pts.push_back({10 * std::cos(d * kPi / 180), 10 * std::sin(d * kPi / 180)});
  const auto s = heading_stats(pts);
  EXPECT_NEAR(s.max_curvature, 0.1, 0.002);
  EXPECT_NEAR(s.max_abs_heading_change_per_step, kPi / 180, 1e-9);
  EXPECT_NEAR(s.total_heading, kPi / 2 - kPi / 180, 1e-9);
}

TEST(HeadingStats, DuplicatesSkipped) {
  const std::vector<Vec2> pts = {{0, 0}, {1, 0}, {1, 0}, {2, 0}, {3, 0}};
  EXPECT_EQ(heading_stats(pts).skipped_duplicates, 1u);
}

TEST(SmoothTrajectory, ZigzagHeadingChangeDrops) {
  Trajectory t;
  t.agent_id = "z";
  const auto pts = zigzag(40);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    TrackFrame f;
    f.agent_id = "z";
    f.frame_index = static_cast<int>(i);
    f.timestamp = i * 0.1;
    f.x = pts[i].x;
    f.y = pts[i].y;
    t.frames.push_back(f);
  }
  const auto s = smooth_trajectory(t);
  ASSERT_EQ(s.frames.size(), t.frames.size());
  std::vector<Vec2> smoothed;
  for (const auto& f : s.frames) smoothed.push_back({f.x, f.y});
  EXPECT_LT(heading_stats(smoothed).max_abs_heading_change_per_step, heading_stats(pts).max_abs_heading_change_per_step);
  EXPECT_NEAR(s.frames[5].heading, std::atan2(s.frames[5].vy, s.frames[5].vx), 1e-9);
}

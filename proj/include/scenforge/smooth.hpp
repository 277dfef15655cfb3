#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "scenforge/ingest.hpp"

namespace scenforge {

struct BezierCurve {
  int degree = 1;
  std::vector<Vec2> control_points;  // degree + 1 points
  std::vector<double> t_samples;     // strictly increasing within [0, 1]
};

double bernstein(int n, int i, double t);

/// Evaluates sum_i C(n,i) (1-t)^(n-i) t^i P_i. Throws for t outside [0,1].
Vec2 bezier_eval(const BezierCurve& curve, double t);

/// First derivative with respect to t.
Vec2 bezier_derivative(const BezierCurve& curve, double t);

/// t = (tau - tau_0) / (tau_end - tau_0).
std::vector<double> normalized_time_map(std::span<const double> timestamps);

/// Sum of squared position errors for a flattened control vector
/// [x0, y0, x1, y1, ...]; the gradient is written when requested.
double bezier_sse(std::span<const double> control, std::span<const Vec2> points,
                  std::span<const double> t_map, std::vector<double>* gradient = nullptr);

struct BoxBounds {
  std::vector<double> lower;  // per flattened control coordinate
  std::vector<double> upper;
};

struct MinimizerOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-8;
  int history = 10;
};

struct MinimizerResult {
  std::vector<double> x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

using Objective = std::function<double(std::span<const double>, std::vector<double>&)>;

/// Limited-memory quasi-Newton minimizer with optional box constraints
/// handled by projection and an active-set restriction of the search
/// direction.
MinimizerResult minimize_lbfgsb(const Objective& objective, std::vector<double> x0,
                                const std::optional<BoxBounds>& bounds,
                                const MinimizerOptions& options = {});

struct BezierFitOptions {
  int degree = 5;
  MinimizerOptions minimizer;
  std::optional<BoxBounds> bounds;
};

struct BezierFit {
  BezierCurve curve;
  double sse = 0.0;
  double initial_sse = 0.0;
  int iterations = 0;
  bool converged = false;  // false: best-so-far returned after the iteration cap
};

BezierFit fit_bezier(std::span<const Vec2> points, std::span<const double> t_map,
                     const BezierFitOptions& options = {});

struct HeadingStats {
  double max_abs_heading_change_per_step = 0.0;
  double total_heading = 0.0;
  double max_curvature = 0.0;
  std::size_t skipped_duplicates = 0;
};

HeadingStats heading_stats(std::span<const Vec2> points);

/// Refits a trajectory's positions with a Bezier curve and re-derives
/// heading and velocity from the curve.
Trajectory smooth_trajectory(const Trajectory& trajectory, const BezierFitOptions& options = {});

}  // namespace scenforge

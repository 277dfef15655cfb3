#include "scenforge/smooth.hpp"

#include <algorithm>
#include <deque>
#include <numeric>

namespace scenforge {

double bernstein(int n, int i, double t) {
  if (i < 0 || i > n) return 0.0;
  double c = 1.0;
  for (int k = 1; k <= i; ++k) c = c * (n - i + k) / k;
  return c * std::pow(1.0 - t, n - i) * std::pow(t, i);
}

Vec2 bezier_eval(const BezierCurve& curve, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw ArgumentError("bezier parameter t must lie in [0,1]");
  const int n = curve.degree;
  if (static_cast<int>(curve.control_points.size()) != n + 1)
    throw ArgumentError("bezier curve needs degree+1 control points");
  Vec2 p{};
  for (int i = 0; i <= n; ++i) p = p + curve.control_points[i] * bernstein(n, i, t);
  return p;
}

Vec2 bezier_derivative(const BezierCurve& curve, double t) {
  const int n = curve.degree;
  Vec2 d{};
  for (int i = 0; i < n; ++i)
    d = d + (curve.control_points[i + 1] - curve.control_points[i]) * (n * bernstein(n - 1, i, t));
  return d;
}

std::vector<double> normalized_time_map(std::span<const double> timestamps) {
  if (timestamps.size() < 2) throw ArgumentError("time map needs at least two samples");
  const double t0 = timestamps.front();
  const double span = timestamps.back() - t0;
  if (!(span > 0.0)) throw ArgumentError("timestamps must increase");
  std::vector<double> out;
  out.reserve(timestamps.size());
  for (double t : timestamps) out.push_back(std::clamp((t - t0) / span, 0.0, 1.0));
  return out;
}

double bezier_sse(std::span<const double> control, std::span<const Vec2> points,
                  std::span<const double> t_map, std::vector<double>* gradient) {
  const int n = static_cast<int>(control.size() / 2) - 1;
  if (gradient) gradient->assign(control.size(), 0.0);
  std::vector<double> basis(n + 1);
  double sse = 0.0;
  for (std::size_t k = 0; k < points.size(); ++k) {
    double bx = 0.0;
    double by = 0.0;
    for (int i = 0; i <= n; ++i) {
      basis[i] = bernstein(n, i, t_map[k]);
      bx += basis[i] * control[2 * i];
      by += basis[i] * control[2 * i + 1];
    }
    const double ex = bx - points[k].x;
    const double ey = by - points[k].y;
    sse += ex * ex + ey * ey;
    if (gradient) {
      for (int i = 0; i <= n; ++i) {
        (*gradient)[2 * i] += 2.0 * ex * basis[i];
        (*gradient)[2 * i + 1] += 2.0 * ey * basis[i];
      }
    }
  }
  return sse;
}

namespace {

void project(std::vector<double>& x, const std::optional<BoxBounds>& b) {
  if (!b) return;
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], b->lower[i], b->upper[i]);
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double projected_gradient_norm(const std::vector<double>& x, const std::vector<double>& g,
                               const std::optional<BoxBounds>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double step = x[i] - g[i];
    if (b) step = std::clamp(step, b->lower[i], b->upper[i]);
    m = std::max(m, std::abs(x[i] - step));
  }
  return m;
}

}  // namespace

MinimizerResult minimize_lbfgsb(const Objective& objective, std::vector<double> x0,
                                const std::optional<BoxBounds>& bounds,
                                const MinimizerOptions& options) {
  const std::size_t dim = x0.size();
  if (bounds && (bounds->lower.size() != dim || bounds->upper.size() != dim))
    throw ArgumentError("bounds dimension mismatch");
  MinimizerResult r;
  r.x = std::move(x0);
  project(r.x, bounds);
  std::vector<double> g;
  r.value = objective(r.x, g);

  struct Pair {
    std::vector<double> s, y;
    double rho;
  };
  std::deque<Pair> memory;
  std::vector<double> d(dim), x_new(dim), g_new;

  for (r.iterations = 0; r.iterations < options.max_iterations; ++r.iterations) {
    if (projected_gradient_norm(r.x, g, bounds) < options.gradient_tolerance) {
      r.converged = true;
      return r;
    }
    // Variables pinned at a bound with the gradient pointing outward stay fixed.
    std::vector<bool> active(dim, false);
    if (bounds) {
      for (std::size_t i = 0; i < dim; ++i) {
        active[i] = (r.x[i] <= bounds->lower[i] && g[i] > 0.0) ||
                    (r.x[i] >= bounds->upper[i] && g[i] < 0.0);
      }
    }
    // Two-loop recursion.
    std::vector<double> q = g;
    for (std::size_t i = 0; i < dim; ++i)
      if (active[i]) q[i] = 0.0;
    std::vector<double> alpha(memory.size());
    for (std::size_t k = memory.size(); k-- > 0;) {
      alpha[k] = memory[k].rho * dot(memory[k].s, q);
      for (std::size_t i = 0; i < dim; ++i) q[i] -= alpha[k] * memory[k].y[i];
    }
    double gamma = 1.0;
    if (!memory.empty()) {
      const auto& last = memory.back();
      gamma = dot(last.s, last.y) / dot(last.y, last.y);
    }
    for (auto& v : q) v *= gamma;
    for (std::size_t k = 0; k < memory.size(); ++k) {
      const double beta = memory[k].rho * dot(memory[k].y, q);
      for (std::size_t i = 0; i < dim; ++i) q[i] += memory[k].s[i] * (alpha[k] - beta);
    }
    for (std::size_t i = 0; i < dim; ++i) d[i] = active[i] ? 0.0 : -q[i];
    if (dot(d, g) >= 0.0) {
      memory.clear();
      for (std::size_t i = 0; i < dim; ++i) d[i] = active[i] ? 0.0 : -g[i];
    }

    // Backtracking Armijo search along the projected path.
    double step = memory.empty() ? std::min(1.0, 1.0 / std::sqrt(dot(g, g) + 1e-300)) : 1.0;
    double f_new = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t i = 0; i < dim; ++i) x_new[i] = r.x[i] + step * d[i];
      project(x_new, bounds);
      f_new = objective(x_new, g_new);
      double decrease = 0.0;
      for (std::size_t i = 0; i < dim; ++i) decrease += g[i] * (x_new[i] - r.x[i]);
      if (f_new <= r.value + 1e-4 * decrease) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    Pair p{std::vector<double>(dim), std::vector<double>(dim), 0.0};
    double moved = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      p.s[i] = x_new[i] - r.x[i];
      p.y[i] = g_new[i] - g[i];
      moved = std::max(moved, std::abs(p.s[i]));
    }
    const double sy = dot(p.s, p.y);
    r.x = x_new;
    r.value = f_new;
    g = g_new;
    if (moved == 0.0) break;
    if (sy > 1e-16 * std::sqrt(dot(p.y, p.y) * dot(p.s, p.s))) {
      p.rho = 1.0 / sy;
      memory.push_back(std::move(p));
      if (static_cast<int>(memory.size()) > options.history) memory.pop_front();
    }
  }
  r.converged = projected_gradient_norm(r.x, g, bounds) < options.gradient_tolerance;
  return r;
}

BezierFit fit_bezier(std::span<const Vec2> points, std::span<const double> t_map,
                     const BezierFitOptions& options) {
  const int n = options.degree;
  if (n < 1) throw ArgumentError("bezier degree must be >= 1");
  if (points.size() < static_cast<std::size_t>(n + 1))
    throw ArgumentError("fit_bezier needs at least degree+1 points");
  if (t_map.size() != points.size()) throw ArgumentError("t_map must align with points");
  for (std::size_t k = 1; k < t_map.size(); ++k)
    if (!(t_map[k] > t_map[k - 1])) throw ArgumentError("t_map must be strictly increasing");

  std::vector<double> x0(2 * (n + 1));
  const std::size_t last = points.size() - 1;
  for (int i = 0; i <= n; ++i) {
    const std::size_t k = static_cast<std::size_t>(std::llround(static_cast<double>(i) * last / n));
    x0[2 * i] = points[k].x;
    x0[2 * i + 1] = points[k].y;
  }
  BezierFit fit;
  {
    std::vector<double> x = x0;
    project(x, options.bounds);
    fit.initial_sse = bezier_sse(x, points, t_map);
  }
  Objective f = [&](std::span<const double> x, std::vector<double>& g) {
    return bezier_sse(x, points, t_map, &g);
  };
  auto res = minimize_lbfgsb(f, x0, options.bounds, options.minimizer);
  fit.curve.degree = n;
  fit.curve.t_samples.assign(t_map.begin(), t_map.end());
  for (int i = 0; i <= n; ++i) fit.curve.control_points.push_back({res.x[2 * i], res.x[2 * i + 1]});
  fit.sse = res.value;
  fit.iterations = res.iterations;
  fit.converged = res.converged;
  return fit;
}

HeadingStats heading_stats(std::span<const Vec2> points) {
  if (points.size() < 3) throw ArgumentError("heading_stats needs at least three points");
  HeadingStats stats;
  std::vector<Vec2> pts;
  pts.reserve(points.size());
  for (const auto& p : points) {
    if (!pts.empty() && pts.back() == p) {
      ++stats.skipped_duplicates;
      continue;
    }
    pts.push_back(p);
  }
  std::vector<double> headings;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const Vec2 d = pts[i] - pts[i - 1];
    headings.push_back(std::atan2(d.y, d.x));
  }
  for (std::size_t i = 1; i < headings.size(); ++i) {
    const double dh = wrap_angle(headings[i] - headings[i - 1]);
    stats.total_heading += dh;
    stats.max_abs_heading_change_per_step = std::max(stats.max_abs_heading_change_per_step, std::abs(dh));
  }
  for (std::size_t i = 2; i < pts.size(); ++i) {
    const Vec2 a = pts[i - 2], b = pts[i - 1], c = pts[i];
    const double denom = (b - a).norm() * (c - b).norm() * (c - a).norm();
    if (denom <= 0.0) continue;
    const double k = 2.0 * std::abs((b - a).cross(c - a)) / denom;
    stats.max_curvature = std::max(stats.max_curvature, k);
  }
  return stats;
}

Trajectory smooth_trajectory(const Trajectory& trajectory, const BezierFitOptions& options) {
  std::vector<double> times;
  for (const auto& f : trajectory.frames) times.push_back(f.timestamp);
  const auto t_map = normalized_time_map(times);
  const auto path = trajectory.path();
  const auto fit = fit_bezier(path, t_map, options);
  const double duration = times.back() - times.front();
  Trajectory out = trajectory;
  for (std::size_t k = 0; k < out.frames.size(); ++k) {
    auto& f = out.frames[k];
    const Vec2 p = bezier_eval(fit.curve, t_map[k]);
    const Vec2 v = bezier_derivative(fit.curve, t_map[k]) * (1.0 / duration);
    f.x = p.x;
    f.y = p.y;
    f.vx = v.x;
    f.vy = v.y;
    if (v.norm() > 1e-9) f.heading = wrap_angle(std::atan2(v.y, v.x));
  }
  return out;
}

}  // namespace scenforge

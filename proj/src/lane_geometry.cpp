#include <algorithm>
#include <array>
#include <filesystem>
#include <limits>

#include "scenforge/sim.hpp"

namespace scenforge {

LanePath::LanePath(std::vector<Vec2> points) : pts_(std::move(points)) {
  if (pts_.size() < 2) throw ValidationError("lane path needs at least two points");
  cum_.assign(pts_.size(), 0.0);
  for (std::size_t i = 1; i < pts_.size(); ++i) cum_[i] = cum_[i - 1] + (pts_[i] - pts_[i - 1]).norm();
}

std::size_t LanePath::segment_for(double s) const {
  auto it = std::upper_bound(cum_.begin(), cum_.end(), s);
  std::size_t k = it == cum_.begin() ? 0 : static_cast<std::size_t>(it - cum_.begin()) - 1;
  return std::min(k, pts_.size() - 2);
}

Vec2 LanePath::point_at(double s) const {
  const std::size_t k = segment_for(s);
  const Vec2 a = pts_[k];
  const Vec2 b = pts_[k + 1];
  const double seg = cum_[k + 1] - cum_[k];
  return a + (b - a) * ((s - cum_[k]) / seg);
}

double LanePath::heading_at(double s) const {
  const std::size_t k = segment_for(s);
  const Vec2 d = pts_[k + 1] - pts_[k];
  return std::atan2(d.y, d.x);
}

Vec2 LanePath::pose(double s, double d) const {
  const double h = heading_at(s);
  return point_at(s) + Vec2{-std::sin(h), std::cos(h)} * d;
}

LanePath::Frenet LanePath::project(Vec2 p) const {
  Frenet best;
  double best_dist = std::numeric_limits<double>::infinity();
  const std::size_t last = pts_.size() - 2;
  for (std::size_t k = 0; k <= last; ++k) {
    const Vec2 a = pts_[k];
    const Vec2 ab = pts_[k + 1] - a;
    const double len = ab.norm();
    double t = (p - a).dot(ab) / (len * len);
    // the end segments extend indefinitely
    const double lo = k == 0 ? -std::numeric_limits<double>::infinity() : 0.0;
    const double hi = k == last ? std::numeric_limits<double>::infinity() : 1.0;
    t = std::clamp(t, lo, hi);
    const Vec2 foot = a + ab * t;
    const double dist = (p - foot).norm();
    if (dist < best_dist - 1e-12) {
      best_dist = dist;
      best.s = cum_[k] + t * len;
      best.d = ab.cross(p - a) / len;
    }
  }
  return best;
}

MapLibrary load_map_library(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw DataError("map directory not found: " + dir);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  MapLibrary lib;
  for (const auto& f : files) lib.emplace(f.stem().string(), parse_lane_map(read_file(f.string())));
  return lib;
}

double idm_acceleration(const IdmParams& p, double speed, std::optional<double> gap,
                        double leader_speed) {
  const double free_term = std::pow(speed / p.v0, 4.0);
  if (!gap) return p.a_max * (1.0 - free_term);
  const double dv = speed - leader_speed;
  const double s_star =
      p.s0 + std::max(0.0, speed * p.time_headway + speed * dv / (2.0 * std::sqrt(p.a_max * p.b)));
  const double s = std::max(*gap, 0.01);
  return p.a_max * (1.0 - free_term - (s_star / s) * (s_star / s));
}

Box footprint(const VehicleState& v) { return {{v.x, v.y}, v.heading, v.length, v.width}; }

namespace {

std::array<Vec2, 4> corners(const Box& b) {
  const Vec2 u{std::cos(b.heading), std::sin(b.heading)};
  const Vec2 n{-u.y, u.x};
  const Vec2 hu = u * (b.length / 2.0);
  const Vec2 hn = n * (b.width / 2.0);
  return {b.center + hu + hn, b.center + hu - hn, b.center - hu - hn, b.center - hu + hn};
}

}  // namespace

bool boxes_overlap(const Box& a, const Box& b) {
  const auto ca = corners(a);
  const auto cb = corners(b);
  const Vec2 axes[4] = {{std::cos(a.heading), std::sin(a.heading)},
                        {-std::sin(a.heading), std::cos(a.heading)},
                        {std::cos(b.heading), std::sin(b.heading)},
                        {-std::sin(b.heading), std::cos(b.heading)}};
  for (const Vec2& ax : axes) {
    double amin = ca[0].dot(ax), amax = amin;
    double bmin = cb[0].dot(ax), bmax = bmin;
    for (int i = 1; i < 4; ++i) {
      amin = std::min(amin, ca[i].dot(ax));
      amax = std::max(amax, ca[i].dot(ax));
      bmin = std::min(bmin, cb[i].dot(ax));
      bmax = std::max(bmax, cb[i].dot(ax));
    }
    if (amax < bmin || bmax < amin) return false;
  }
  return true;
}

}  // namespace scenforge

#include "scenforge/safety_metrics.hpp"

#include <algorithm>
#include <limits>

namespace scenforge {

std::optional<double> ttc(const TrackFrame& follower, const TrackFrame& leader,
                          double gap, double closing_epsilon) {
  if (gap <= 0.0) return 0.0;
  const Vec2 u{std::cos(follower.heading), std::sin(follower.heading)};
  const double closing = follower.velocity().dot(u) - leader.velocity().dot(u);
  if (closing <= closing_epsilon) return std::nullopt;
  return gap / closing;
}

double bumper_gap(const TrackFrame& follower, const TrackFrame& leader) {
  return (leader.position() - follower.position()).norm() -
         0.5 * (follower.length + leader.length);
}

namespace {

struct SegmentHit {
  double ta = 0.0;  // parameter along segment a
  double tb = 0.0;
};

// Earliest point of segment a (smallest ta) that also lies on segment b.
std::optional<SegmentHit> intersect_segments(Vec2 a0, Vec2 a1, Vec2 b0, Vec2 b1) {
  constexpr double kEps = 1e-12;
  const Vec2 r = a1 - a0;
  const Vec2 s = b1 - b0;
  const double denom = r.cross(s);
  const Vec2 qp = b0 - a0;
  const double scale = std::max({r.norm(), s.norm(), 1.0});
  if (std::abs(denom) > kEps * scale * scale) {
    const double ta = qp.cross(s) / denom;
    const double tb = qp.cross(r) / denom;
    const double tol = 1e-12;
    if (ta >= -tol && ta <= 1 + tol && tb >= -tol && tb <= 1 + tol)
      return SegmentHit{std::clamp(ta, 0.0, 1.0), std::clamp(tb, 0.0, 1.0)};
    return std::nullopt;
  }
  if (std::abs(qp.cross(r)) > kEps * scale * scale) return std::nullopt;  // parallel
  // Collinear: project b's endpoints on a and take the overlap start.
  const double rr = r.dot(r);
  if (rr == 0.0) return std::nullopt;
  double t0 = qp.dot(r) / rr;
  double t1 = (b1 - a0).dot(r) / rr;
  if (t0 > t1) std::swap(t0, t1);
  if (t1 < 0.0 || t0 > 1.0) return std::nullopt;
  const double ta = std::max(t0, 0.0);
  const Vec2 p = a0 + r * ta;
  const double ss = s.dot(s);
  const double tb = ss > 0.0 ? std::clamp((p - b0).dot(s) / ss, 0.0, 1.0) : 0.0;
  return SegmentHit{ta, tb};
}

}  // namespace

std::optional<ConflictPoint> find_conflict_point(std::span<const Vec2> path_a,
                                                 std::span<const Vec2> path_b) {
  if (path_a.size() < 2 || path_b.size() < 2) return std::nullopt;
  double arc_a = 0.0;
  for (std::size_t i = 0; i + 1 < path_a.size(); ++i) {
    const double len_a = (path_a[i + 1] - path_a[i]).norm();
    std::optional<ConflictPoint> best;
    double arc_b = 0.0;
    for (std::size_t j = 0; j + 1 < path_b.size(); ++j) {
      const double len_b = (path_b[j + 1] - path_b[j]).norm();
      auto hit = intersect_segments(path_a[i], path_a[i + 1], path_b[j], path_b[j + 1]);
      if (hit) {
        const double arc = arc_a + hit->ta * len_a;
        if (!best || arc < best->arc_a) {
          best = ConflictPoint{path_a[i] + (path_a[i + 1] - path_a[i]) * hit->ta, arc,
                               arc_b + hit->tb * len_b};
        }
      }
      arc_b += len_b;
    }
    if (best) return best;
    arc_a += len_a;
  }
  return std::nullopt;
}

namespace {

struct Occupancy {
  double enter = 0.0;
  double exit = 0.0;
};

std::optional<Occupancy> occupancy(const Trajectory& t, Vec2 cp, double radius) {
  std::optional<Occupancy> occ;
  for (const auto& f : t.frames) {
    if ((f.position() - cp).norm() <= radius) {
      if (!occ) occ = Occupancy{f.timestamp, f.timestamp};
      occ->exit = f.timestamp;
    }
  }
  return occ;
}

double half_length(const Trajectory& t) {
  return t.frames.empty() ? 0.0 : 0.5 * t.frames.front().length;
}

}  // namespace

std::optional<PetResult> pet(const Trajectory& a, const Trajectory& b,
                             const ConflictPoint& cp,
                             std::optional<double> occupy_radius) {
  auto oa = occupancy(a, cp.position, occupy_radius.value_or(half_length(a)));
  auto ob = occupancy(b, cp.position, occupy_radius.value_or(half_length(b)));
  if (!oa || !ob) return std::nullopt;
  // The first agent is the one that enters first; ties go to the earlier exit.
  const bool a_first = oa->enter < ob->enter ||
                       (oa->enter == ob->enter && oa->exit <= ob->exit);
  const Occupancy& first = a_first ? *oa : *ob;
  const Occupancy& second = a_first ? *ob : *oa;
  const double diff = second.enter - first.exit;
  if (diff <= 0.0) return PetResult{0.0, true};
  return PetResult{diff, false};
}

double yaw_change(std::span<const TrackFrame> frames) {
  double total = 0.0;
  for (std::size_t i = 1; i < frames.size(); ++i)
    total += wrap_angle(frames[i].heading - frames[i - 1].heading);
  return total;
}

double yaw_change(const Trajectory& trajectory) { return yaw_change(trajectory.frames); }

}  // namespace scenforge

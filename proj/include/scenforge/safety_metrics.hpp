#pragma once

#include <optional>
#include <span>

#include "scenforge/ingest.hpp"

namespace scenforge {

struct RiskMetrics {
  std::optional<double> min_ttc;
  std::optional<double> min_pet;
  double max_yaw_change = 0.0;
  bool collision = false;

  bool operator==(const RiskMetrics&) const = default;
};

struct ConflictPoint {
  Vec2 position;
  double arc_a = 0.0;
  double arc_b = 0.0;
};

struct PetResult {
  double value = 0.0;    // seconds, clamped at 0
  bool overlap = false;  // both agents inside the conflict disk at once
};

inline constexpr double kClosingSpeedEpsilon = 0.1;

/// Gap over closing speed, where both speeds are projected on the follower's
/// heading. Empty when the pair is not closing faster than epsilon.
std::optional<double> ttc(const TrackFrame& follower, const TrackFrame& leader,
                          double gap, double closing_epsilon = kClosingSpeedEpsilon);

/// Bumper-to-bumper gap: center distance minus the two half-lengths.
double bumper_gap(const TrackFrame& follower, const TrackFrame& leader);

/// First intersection (smallest arc along path_a) of two polylines.
std::optional<ConflictPoint> find_conflict_point(std::span<const Vec2> path_a,
                                                 std::span<const Vec2> path_b);

/// Post-encroachment time around a conflict point. Occupancy is a disk of
/// occupy_radius, or half of each agent's own length when not given.
std::optional<PetResult> pet(const Trajectory& a, const Trajectory& b,
                             const ConflictPoint& cp,
                             std::optional<double> occupy_radius = std::nullopt);

/// Signed sum of shortest-angle heading increments (CCW positive).
double yaw_change(const Trajectory& trajectory);
double yaw_change(std::span<const TrackFrame> frames);

}  // namespace scenforge

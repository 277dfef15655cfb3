#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scenforge/common.hpp"

namespace scenforge {

enum class AgentKind { kVehicle, kPedestrian };

struct TrackFrame {
  std::string agent_id;
  long frame_index = 0;
  double timestamp = 0.0;  // seconds
  double x = 0.0;
  double y = 0.0;
  double vx = 0.0;
  double vy = 0.0;
  double heading = 0.0;  // (-pi, pi]
  double length = 4.5;
  double width = 2.0;
  std::optional<std::string> lane_id;

  Vec2 position() const { return {x, y}; }
  Vec2 velocity() const { return {vx, vy}; }
  double speed() const { return std::hypot(vx, vy); }
};

struct Trajectory {
  std::string agent_id;
  AgentKind kind = AgentKind::kVehicle;
  std::vector<TrackFrame> frames;

  /// Median spacing between consecutive timestamps.
  double frame_interval() const;
  bool has_uniform_spacing(double tolerance = 1e-6) const;
  std::vector<Vec2> path() const;
};

struct TrackParseResult {
  std::vector<Trajectory> trajectories;  // order of first appearance
  std::size_t dropped_rows = 0;          // missing/NaN kinematics, duplicates
  std::size_t dropped_agents = 0;        // fewer than two usable frames
};

/// Parses the trajectory CSV schema (track_id, frame_id, timestamp_ms,
/// agent_type, x, y, vx, vy, psi_rad, length, width). Extra columns are
/// ignored.
TrackParseResult parse_tracks(std::string_view csv);

/// Serializes trajectories in the same schema. A non-empty provenance adds a
/// trailing "provenance" column.
std::string write_tracks(std::span<const Trajectory> trajectories,
                         std::string_view provenance = {});

enum class LineType { kSolid, kDashed };
enum class SpeedClass { kNormal, kSlow };
enum class LaneControl { kNone, kClosure, kSignal };

struct Lane {
  std::string id;
  std::vector<Vec2> centerline;
  LineType line_type = LineType::kSolid;
  SpeedClass speed_class = SpeedClass::kNormal;
  std::vector<std::string> adjacent;  // sorted
  LaneControl control = LaneControl::kNone;
};

/// Validated lane map. Lanes are held sorted by id so every lookup is
/// independent of declaration order in the source document.
class LaneMap {
 public:
  LaneMap() = default;
  explicit LaneMap(std::vector<Lane> lanes);

  const std::vector<Lane>& lanes() const { return lanes_; }
  const Lane* find(std::string_view id) const;
  const Lane& at(std::string_view id) const;
  std::optional<std::size_t> index_of(std::string_view id) const;
  bool are_adjacent(std::string_view a, std::string_view b) const;

 private:
  std::vector<Lane> lanes_;
};

LaneMap parse_lane_map(std::string_view json_text);
std::string write_lane_map(const LaneMap& map);

struct PolylinePoint {
  double distance = 0.0;  // Euclidean distance from the query point
  double arc = 0.0;       // arc length of the foot point
  Vec2 foot;
  std::size_t segment = 0;
};

PolylinePoint closest_point(std::span<const Vec2> polyline, Vec2 p);

inline constexpr double kDefaultMaxLateral = 2.0;

/// Lane with the smallest perpendicular distance, if within max_lateral.
/// Ties go to the lexicographically smallest lane id.
std::optional<std::string> match_lane(Vec2 point, const LaneMap& map,
                                      double max_lateral = kDefaultMaxLateral);

void assign_lanes(Trajectory& trajectory, const LaneMap& map,
                  double max_lateral = kDefaultMaxLateral);

}  // namespace scenforge

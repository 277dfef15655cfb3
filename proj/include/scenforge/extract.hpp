#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scenforge/ingest.hpp"
#include "scenforge/safety_metrics.hpp"

namespace scenforge {

enum class ScenarioLabel {
  kFollow,
  kBrake,
  kLaneChange,
  kStraight,
  kTurnLeft,
  kTurnRight,
  kUTurn,
};

std::string_view to_string(ScenarioLabel label);
ScenarioLabel parse_scenario_label(std::string_view text);

struct ScenarioSegment {
  std::string ego_id;
  std::vector<std::string> partner_ids;
  std::size_t start = 0;  // inclusive frame indices into the ego trajectory
  std::size_t end = 0;
  double t_start = 0.0;
  double t_end = 0.0;
  ScenarioLabel label = ScenarioLabel::kFollow;
  std::optional<std::string> interaction_label;
  RiskMetrics risk;

  double duration() const { return t_end - t_start; }
  bool operator==(const ScenarioSegment&) const = default;
};

struct ExtractionConfig {
  double brake_decel_threshold = -1.0;  // m/s^2
  int brake_min_frames = 5;
  int follow_min_frames = 10;
  double motion_speed_min = 0.5;        // m/s
  double straight_yaw_max = kPi / 6.0;  // rad
  double uturn_yaw_min = 3.0 * kPi / 4.0;

  void validate() const;
};

/// Car-following segments: maximal runs with the same unique closest
/// same-lane leader ahead, with at least one of the pair moving.
std::vector<ScenarioSegment> detect_following(const Trajectory& ego,
                                              std::span<const Trajectory> others,
                                              const LaneMap& map,
                                              const ExtractionConfig& cfg = {});

/// Sustained deceleration runs inside a follow segment.
std::vector<ScenarioSegment> detect_braking(const ScenarioSegment& segment,
                                            const Trajectory& ego,
                                            const ExtractionConfig& cfg = {});

std::vector<ScenarioSegment> detect_lane_change(const Trajectory& ego,
                                                const LaneMap& map);

ScenarioLabel classify_maneuver(double yaw_change, const ExtractionConfig& cfg = {});

/// Labels the ego maneuver from its total yaw change and pairs it with the
/// background vehicle yielding the smallest PET.
ScenarioSegment classify_intersection(const Trajectory& ego,
                                      std::span<const Trajectory> others,
                                      const ExtractionConfig& cfg = {});

/// Min TTC over the segment's frames against its partners, min PET over
/// partner conflicts and the ego's absolute yaw change.
RiskMetrics assess_risk(const ScenarioSegment& segment, const Trajectory& ego,
                        std::span<const Trajectory> partners);

/// Longitudinal accelerations a[i] = (v[i]-v[i-1])/dt, with a[0] = 0.
std::vector<double> longitudinal_accelerations(const Trajectory& t);

/// Runs every detector with each vehicle of a recording as ego and attaches
/// risk metrics. Intersection maneuvers are labelled for egos that pass a
/// signal-controlled lane.
std::vector<ScenarioSegment> extract_scenarios(std::span<const Trajectory> tracks, const LaneMap& map,
                                               const ExtractionConfig& cfg = {});

std::string segment_to_json(const ScenarioSegment& segment);
ScenarioSegment segment_from_json(std::string_view line);

}  // namespace scenforge

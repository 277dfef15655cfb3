#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scenforge/common.hpp"
#include "scenforge/dsl.hpp"
#include "scenforge/ingest.hpp"
#include "scenforge/retrieval.hpp"

namespace scenforge {

/// Arc-length parametrised lane centreline. Queries beyond either end
/// extrapolate along the end segments.
class LanePath {
 public:
  LanePath() = default;
  explicit LanePath(std::vector<Vec2> points);

  double length() const { return cum_.empty() ? 0.0 : cum_.back(); }
  Vec2 point_at(double s) const;
  double heading_at(double s) const;
  Vec2 pose(double s, double d) const;  // d > 0 is left of the direction of travel

  struct Frenet {
    double s = 0.0;
    double d = 0.0;
  };
  Frenet project(Vec2 p) const;

 private:
  std::size_t segment_for(double s) const;

  std::vector<Vec2> pts_;
  std::vector<double> cum_;
};

using MapLibrary = std::map<std::string, LaneMap>;

/// Loads every *.json file of a directory; the key is the file stem.
MapLibrary load_map_library(const std::string& dir);

struct IdmParams {
  double v0 = 8.0;        // desired speed m/s
  double time_headway = 1.5;
  double s0 = 2.0;        // minimum gap m
  double a_max = 3.0;
  double b = 5.0;         // comfortable deceleration
};

/// a = a_max [1 - (v/v0)^4 - (s*/s)^2], s* = s0 + vT + v dv / (2 sqrt(a_max b)).
/// Without a leader the interaction term is dropped.
double idm_acceleration(const IdmParams& p, double speed, std::optional<double> gap,
                        double leader_speed);

struct SimParams {
  double dt = 0.1;
  int horizon = 300;
  IdmParams idm;
  double v_max = 20.0;
  double accel_command = 1.5;    // FASTER / SLOWER
  double emergency_decel = 6.0;  // EMERGENCY_BRAKE and the event threshold
  double accel_limit = 4.0;
  double decel_limit = 9.0;
  double lane_change_duration = 2.0;
  double max_steer = 0.6;        // rad
  double spawn_jitter_s = 1.0;   // uniform +- metres along the lane
  double spawn_jitter_v = 0.5;   // uniform +- m/s
  double offroad_margin = 1.0;   // lateral slack beyond half a lane before a violation
  double lane_half_width = 1.75;
};

enum class PolicyAction { kLaneLeft = 0, kIdle, kLaneRight, kFaster, kSlower, kEmergencyBrake };
inline constexpr int kNumActions = 6;
std::string_view to_string(PolicyAction a);

struct VehicleState {
  std::string id;
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double speed = 0.0;
  double accel = 0.0;
  std::string lane_id;
  std::optional<std::string> target_lane;
  double length = dsl::kDefaultVehicleLength;
  double width = dsl::kDefaultVehicleWidth;
};

struct ControllerSpec {
  enum class Kind { kScripted, kIdm, kPolicy };
  Kind kind = Kind::kIdm;
  dsl::Schedule schedule;  // kScripted
  std::string slot;        // kPolicy
};

struct ScenarioProgram {
  std::string name;
  std::string map_key;
  LaneMap map;
  std::vector<VehicleState> initial;
  std::vector<ControllerSpec> controllers;
  std::vector<dsl::VehicleRole> roles;
  std::vector<std::optional<std::size_t>> anchors;  // spawn anchor per vehicle
  std::size_t ego = 0;
  std::vector<std::string> ego_route;
  SimParams params;
  std::vector<std::string> context_keys;  // code-index fragments consulted while compiling

  std::vector<std::string> policy_slots() const;
  std::optional<std::size_t> index_of(std::string_view id) const;
};

/// Compile failures: unknown map key, unresolved anchor, initial overlap,
/// structural findings.
class CompileError : public DataError {
 public:
  explicit CompileError(const std::string& what) : DataError(what) {}
};

ScenarioProgram compile_scenario(const dsl::DslDocument& doc, const MapLibrary& maps,
                                 const RetrievalIndex* code_index = nullptr,
                                 const SimParams& params = {});

/// Oriented-rectangle overlap by the separating-axis test.
struct Box {
  Vec2 center;
  double heading = 0.0;
  double length = 0.0;
  double width = 0.0;
};
bool boxes_overlap(const Box& a, const Box& b);
Box footprint(const VehicleState& v);

enum class EventKind { kCollision, kLaneChange, kEmergencyBrake, kBehavior, kViolation };
std::string_view to_string(EventKind k);

struct SimEvent {
  int step = 0;
  EventKind kind = EventKind::kCollision;
  std::vector<std::string> vehicles;
  std::string detail;  // verb name for behavior events

  bool operator==(const SimEvent&) const = default;
};

enum class Termination { kNone, kCollision, kTimeout, kGoal };
std::string_view to_string(Termination t);
Termination parse_termination(std::string_view text);

struct VehicleFrame {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double speed = 0.0;
  bool operator==(const VehicleFrame&) const = default;
};

struct EpisodeVehicle {
  std::string id;
  std::string role;
  double length = 0.0;
  double width = 0.0;
  bool operator==(const EpisodeVehicle&) const = default;
};

struct EpisodeLog {
  std::uint64_t seed = 0;
  Termination termination = Termination::kNone;
  int steps = 0;
  std::vector<EpisodeVehicle> vehicles;
  std::vector<SimEvent> events;
  std::vector<std::vector<VehicleFrame>> frames;  // steps + 1 snapshots

  bool ego_collided(std::string_view ego_id = "ego") const;
  std::size_t count(EventKind kind) const;
  bool operator==(const EpisodeLog&) const = default;
};

std::string episode_to_json(const EpisodeLog& log);
EpisodeLog episode_from_json(std::string_view text);

struct StepOutcome {
  std::vector<SimEvent> events;
  Termination termination = Termination::kNone;
};

/// One running episode. Policy-controlled vehicles receive their discrete
/// action through step(); all other controllers are internal.
class Simulation {
 public:
  Simulation(const ScenarioProgram& program, std::uint64_t seed);

  const ScenarioProgram& program() const { return *program_; }
  const std::vector<VehicleState>& vehicles() const { return vehicles_; }
  int step_count() const { return step_; }
  double time() const { return step_ * program_->params.dt; }
  bool done() const { return termination_ != Termination::kNone; }
  Termination termination() const { return termination_; }

  /// Vehicle indices driven by each policy slot.
  const std::map<std::string, std::vector<std::size_t>>& slots() const { return slots_; }

  StepOutcome step(const std::map<std::string, PolicyAction>& actions);

  /// Normalised features for a vehicle; `focus` (if set) is always listed
  /// first among the neighbours.
  std::vector<double> observe(std::size_t vehicle, std::optional<std::size_t> focus = {}) const;
  static std::size_t observation_size();
  /// Observation of the first vehicle of a slot; non-ego vehicles focus on the ego.
  std::vector<double> observe_slot(const std::string& slot) const;

  bool is_offroad(std::size_t vehicle) const;
  double route_progress() const;  // ego arc length remaining to the goal, metres

  EpisodeLog log() const;

 private:
  struct Agent {
    double nominal_speed = 0.0;    // IDM desired speed when no verb overrides it
    std::vector<double> starts;    // action start times, +inf when never reached
    std::vector<double> ends;
    std::vector<bool> started;
    double lat_offset0 = 0.0;      // lateral offset at the start of the current transition
    double lat_t0 = 0.0;
    double s = 0.0;                // Frenet coordinates on lane_id
    double d = 0.0;
    std::size_t route_index = 0;
    bool emergency = false;
  };

  double lateral_target(const Agent& a, double t) const;
  bool changing_lane(std::size_t i) const;
  void begin_lane_change(std::size_t i, const std::string& target, std::vector<SimEvent>& events);
  std::optional<std::string> side_lane(const std::string& lane, bool left) const;
  std::pair<std::optional<double>, double> leader(std::size_t i) const;
  double idm_accel(std::size_t i, const IdmParams& p) const;
  double scripted_accel(std::size_t i, std::vector<SimEvent>& events);
  double policy_accel(std::size_t i, PolicyAction a, std::vector<SimEvent>& events);
  void integrate(std::size_t i, double accel);
  void refresh_frenet(std::size_t i);
  void record_frame();
  const LanePath& path(const std::string& lane) const { return paths_.at(lane); }

  const ScenarioProgram* program_;
  std::uint64_t seed_;
  std::map<std::string, LanePath> paths_;
  std::map<std::string, std::pair<std::optional<std::string>, std::optional<std::string>>> sides_;
  std::vector<VehicleState> vehicles_;
  std::vector<Agent> agents_;
  std::map<std::string, std::vector<std::size_t>> slots_;
  std::vector<std::vector<VehicleFrame>> frames_;
  std::vector<SimEvent> events_;
  int step_ = 0;
  Termination termination_ = Termination::kNone;
};

/// Maps an observation to a discrete action.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual PolicyAction act(std::span<const double> observation, Rng& rng) const = 0;
};

class ConstantPolicy : public Policy {
 public:
  explicit ConstantPolicy(PolicyAction a) : action_(a) {}
  PolicyAction act(std::span<const double>, Rng&) const override { return action_; }

 private:
  PolicyAction action_;
};

using PolicyMap = std::map<std::string, const Policy*>;

/// Runs to termination. Throws ConfigError when a slot has no policy.
EpisodeLog run_episode(const ScenarioProgram& program, const PolicyMap& policies,
                       std::uint64_t seed);

/// Episode i uses seed derive_seed(master_seed, i); results are ordered by
/// index and do not depend on the worker count.
std::vector<EpisodeLog> run_episodes(const ScenarioProgram& program,
                                     const PolicyMap& policies,
                                     std::uint64_t master_seed, std::size_t count,
                                     std::size_t workers);

}  // namespace scenforge

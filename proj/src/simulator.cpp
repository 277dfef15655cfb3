#include <algorithm>
#include <array>
#include <limits>

#include "scenforge/sim.hpp"

namespace scenforge {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kMaxLanes = 4;
constexpr std::size_t kNeighbours = 4;
constexpr std::size_t kSelfFeatures = 13;
constexpr std::size_t kNeighbourFeatures = 5;
constexpr double kNeighbourRange = 60.0;

double smoothstep(double u) {
  u = std::clamp(u, 0.0, 1.0);
  return u * u * (3.0 - 2.0 * u);
}

}  // namespace

std::string_view to_string(PolicyAction a) {
  switch (a) {
    case PolicyAction::kLaneLeft: return "LANE_LEFT";
    case PolicyAction::kIdle: return "IDLE";
    case PolicyAction::kLaneRight: return "LANE_RIGHT";
    case PolicyAction::kFaster: return "FASTER";
    case PolicyAction::kSlower: return "SLOWER";
    case PolicyAction::kEmergencyBrake: return "EMERGENCY_BRAKE";
  }
  return "?";
}

Simulation::Simulation(const ScenarioProgram& program, std::uint64_t seed)
    : program_(&program), seed_(seed) {
  const auto& p = program.params;
  for (const auto& lane : program.map.lanes()) paths_.emplace(lane.id, LanePath(lane.centerline));
  for (const auto& lane : program.map.lanes()) {
    std::optional<std::string> left, right;
    const LanePath& own = paths_.at(lane.id);
    for (const auto& adj : lane.adjacent) {
      const auto& other = program.map.at(adj).centerline;
      const Vec2 mid = other[other.size() / 2];
      (own.project(mid).d > 0.0 ? left : right) = adj;
    }
    sides_[lane.id] = {left, right};
  }

  vehicles_ = program.initial;
  agents_.resize(vehicles_.size());
  Rng rng(derive_seed(seed, 0));
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<VehicleState> jittered = vehicles_;
  for (std::size_t i = 0; i < vehicles_.size(); ++i) {
    auto& v = jittered[i];
    const double ds = unit(rng) * p.spawn_jitter_s;
    const double dv = unit(rng) * p.spawn_jitter_v;
    const LanePath& lp = path(v.lane_id);
    const auto f = lp.project({v.x, v.y});
    const Vec2 pos = lp.pose(f.s + ds, f.d);
    v.x = pos.x;
    v.y = pos.y;
    v.speed = std::clamp(v.speed + dv, 0.0, p.v_max);
  }
  bool overlap = false;
  for (std::size_t i = 0; i < jittered.size() && !overlap; ++i)
    for (std::size_t j = i + 1; j < jittered.size() && !overlap; ++j)
      overlap = boxes_overlap(footprint(jittered[i]), footprint(jittered[j]));
  for (std::size_t i = 0; i < vehicles_.size(); ++i) {
    if (!overlap) {
      vehicles_[i].x = jittered[i].x;
      vehicles_[i].y = jittered[i].y;
    }
    vehicles_[i].speed = jittered[i].speed;
  }

  for (std::size_t i = 0; i < vehicles_.size(); ++i) {
    Agent& a = agents_[i];
    const double spawn_speed = program.initial[i].speed;
    a.nominal_speed = spawn_speed > 0.5 ? spawn_speed : p.idm.v0;
    refresh_frenet(i);
    a.lat_offset0 = a.d;
    a.lat_t0 = 0.0;
    const auto& c = program.controllers[i];
    if (c.kind == ControllerSpec::Kind::kPolicy) slots_[c.slot].push_back(i);
    if (c.kind == ControllerSpec::Kind::kScripted) {
      const auto& actions = c.schedule.actions;
      const std::size_t n = actions.size();
      a.starts.assign(n, kInf);
      a.ends.assign(n, kInf);
      a.started.assign(n, false);
      for (std::size_t k = 0; k < n; ++k) {
        if (auto at = actions[k].number_arg("at")) {
          a.starts[k] = *at;
        } else if (k == 0) {
          a.starts[k] = 0.0;
        } else if (actions[k - 1].duration) {
          a.starts[k] = a.starts[k - 1] + *actions[k - 1].duration;
        }
      }
      for (std::size_t k = 0; k < n; ++k) {
        if (actions[k].duration) {
          a.ends[k] = a.starts[k] + *actions[k].duration;
        } else {
          for (std::size_t m = k + 1; m < n; ++m) {
            if (a.starts[m] > a.starts[k] && a.starts[m] < kInf) {
              a.ends[k] = a.starts[m];
              break;
            }
          }
        }
      }
    }
    if (i == program.ego) {
      const auto& route = program.ego_route;
      auto it = std::find(route.begin(), route.end(), vehicles_[i].lane_id);
      a.route_index = it == route.end() ? 0 : static_cast<std::size_t>(it - route.begin());
    }
  }
  record_frame();
}

void Simulation::refresh_frenet(std::size_t i) {
  const auto f = path(vehicles_[i].lane_id).project({vehicles_[i].x, vehicles_[i].y});
  agents_[i].s = f.s;
  agents_[i].d = f.d;
}

double Simulation::lateral_target(const Agent& a, double t) const {
  const double u = (t - a.lat_t0) / program_->params.lane_change_duration;
  return a.lat_offset0 * (1.0 - smoothstep(u));
}

bool Simulation::changing_lane(std::size_t i) const {
  return vehicles_[i].target_lane.has_value();
}

std::optional<std::string> Simulation::side_lane(const std::string& lane, bool left) const {
  auto it = sides_.find(lane);
  if (it == sides_.end()) return std::nullopt;
  return left ? it->second.first : it->second.second;
}

void Simulation::begin_lane_change(std::size_t i, const std::string& target,
                                   std::vector<SimEvent>& events) {
  auto& v = vehicles_[i];
  if (v.lane_id == target || changing_lane(i)) return;
  v.lane_id = target;
  v.target_lane = target;
  refresh_frenet(i);
  agents_[i].lat_offset0 = agents_[i].d;
  agents_[i].lat_t0 = time();
  events.push_back({step_, EventKind::kLaneChange, {v.id}, target});
}

std::pair<std::optional<double>, double> Simulation::leader(std::size_t i) const {
  const auto& me = vehicles_[i];
  const Agent& a = agents_[i];
  const LanePath& lp = path(me.lane_id);
  const double lo = std::min(a.d, 0.0) - me.width / 2.0;
  const double hi = std::max(a.d, 0.0) + me.width / 2.0;
  std::optional<double> best;
  double best_speed = 0.0;
  for (std::size_t j = 0; j < vehicles_.size(); ++j) {
    if (j == i) continue;
    const auto& o = vehicles_[j];
    const auto f = lp.project({o.x, o.y});
    if (f.s <= a.s) continue;
    if (f.d + o.width / 2.0 < lo || f.d - o.width / 2.0 > hi) continue;
    const double gap = f.s - a.s - (me.length + o.length) / 2.0;
    if (!best || gap < *best) {
      best = gap;
      best_speed = o.speed * std::cos(o.heading - lp.heading_at(f.s));
    }
  }
  return {best, best_speed};
}

double Simulation::idm_accel(std::size_t i, const IdmParams& p) const {
  const auto [gap, lead_speed] = leader(i);
  const double a = idm_acceleration(p, vehicles_[i].speed, gap, lead_speed);
  return std::clamp(a, -program_->params.decel_limit, program_->params.accel_limit);
}

double Simulation::scripted_accel(std::size_t i, std::vector<SimEvent>& events) {
  const auto& params = program_->params;
  Agent& a = agents_[i];
  const auto& actions = program_->controllers[i].schedule.actions;
  const double t = time() + 1e-9;
  IdmParams idm = params.idm;
  idm.v0 = a.nominal_speed;

  std::optional<std::size_t> active;
  for (std::size_t k = 0; k < actions.size(); ++k)
    if (a.starts[k] <= t && t < a.ends[k]) active = k;
  if (!active) return idm_accel(i, idm);

  const auto& act = actions[*active];
  const bool first_step = !a.started[*active];
  if (first_step) {
    a.started[*active] = true;
    events.push_back({step_, EventKind::kBehavior, {vehicles_[i].id}, act.verb});
  }
  const std::string& verb = act.verb;
  if (verb == "brake" || verb == "sudden_brake") {
    return -std::min(act.number_arg("decel").value_or(params.emergency_decel), params.decel_limit);
  }
  if (verb == "idle") return 0.0;
  if (verb == "tailgate") {
    idm.s0 = std::max(0.1, act.number_arg("gap").value_or(0.5));
    idm.time_headway = 0.3;
    idm.v0 = a.nominal_speed * 1.3;
    return idm_accel(i, idm);
  }
  if (verb == "speeding") {
    idm.v0 = std::max(params.idm.v0, a.nominal_speed) * act.number_arg("factor").value_or(1.3);
    return idm_accel(i, idm);
  }
  if (verb == "lane_change") {
    if (first_step) {
      const bool left = act.text_arg("direction").value_or("left") != "right";
      if (auto lane = side_lane(vehicles_[i].lane_id, left)) begin_lane_change(i, *lane, events);
    }
    return idm_accel(i, idm);
  }
  if (verb == "cut_in") {
    std::size_t anchor = program_->anchors[i].value_or(program_->ego);
    if (anchor == i) anchor = program_->ego;
    const auto trigger = act.number_arg("trigger");
    bool fire = !changing_lane(i) && !a.started.empty();
    if (trigger) {
      const auto f = path(vehicles_[i].lane_id).project({vehicles_[anchor].x, vehicles_[anchor].y});
      fire = fire && std::abs(f.s - a.s) <= *trigger;
    }
    if (fire && vehicles_[anchor].lane_id != vehicles_[i].lane_id) {
      begin_lane_change(i, vehicles_[anchor].lane_id, events);
    } else if (fire && first_step) {
      const bool from_left = act.text_arg("side").value_or("left") != "right";
      if (auto lane = side_lane(vehicles_[i].lane_id, !from_left)) begin_lane_change(i, *lane, events);
    }
    return idm_accel(i, idm);
  }
  if (auto speed = act.number_arg("speed")) idm.v0 = std::max(0.1, *speed);
  return idm_accel(i, idm);
}

double Simulation::policy_accel(std::size_t i, PolicyAction action, std::vector<SimEvent>& events) {
  const auto& params = program_->params;
  switch (action) {
    case PolicyAction::kLaneLeft:
    case PolicyAction::kLaneRight:
      if (!changing_lane(i)) {
        if (auto lane = side_lane(vehicles_[i].lane_id, action == PolicyAction::kLaneLeft))
          begin_lane_change(i, *lane, events);
      }
      return 0.0;
    case PolicyAction::kIdle: return 0.0;
    case PolicyAction::kFaster: return params.accel_command;
    case PolicyAction::kSlower: return -params.accel_command;
    case PolicyAction::kEmergencyBrake: return -params.emergency_decel;
  }
  return 0.0;
}

void Simulation::integrate(std::size_t i, double accel) {
  const auto& params = program_->params;
  auto& v = vehicles_[i];
  Agent& a = agents_[i];
  const double dt = params.dt;

  const double speed = std::clamp(v.speed + accel * dt, 0.0, params.v_max);
  v.accel = (speed - v.speed) / dt;

  // pure-pursuit steering toward the lateral reference
  const LanePath& lp = path(v.lane_id);
  const double wheelbase = 0.6 * v.length;
  const double lookahead = std::max(4.0, speed * 0.8);
  const double t_ahead = time() + lookahead / std::max(speed, 1.0);
  const Vec2 target = lp.pose(a.s + lookahead, lateral_target(a, t_ahead));
  const Vec2 to = target - Vec2{v.x, v.y};
  const double alpha = wrap_angle(std::atan2(to.y, to.x) - v.heading);
  const double ld = std::max(to.norm(), 1e-6);
  const double steer = std::clamp(std::atan(2.0 * wheelbase * std::sin(alpha) / ld),
                                  -params.max_steer, params.max_steer);

  v.x += speed * std::cos(v.heading) * dt;
  v.y += speed * std::sin(v.heading) * dt;
  v.heading = wrap_angle(v.heading + speed / wheelbase * std::tan(steer) * dt);
  v.speed = speed;
  refresh_frenet(i);
  if (v.target_lane && time() + dt - a.lat_t0 >= params.lane_change_duration) v.target_lane.reset();
}

StepOutcome Simulation::step(const std::map<std::string, PolicyAction>& actions) {
  StepOutcome out;
  if (done()) return out;
  const auto& params = program_->params;
  const std::size_t n = vehicles_.size();

  std::vector<double> accel(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = program_->controllers[i];
    switch (c.kind) {
      case ControllerSpec::Kind::kPolicy: {
        auto it = actions.find(c.slot);
        accel[i] = policy_accel(i, it == actions.end() ? PolicyAction::kIdle : it->second, out.events);
        break;
      }
      case ControllerSpec::Kind::kScripted:
        accel[i] = scripted_accel(i, out.events);
        break;
      case ControllerSpec::Kind::kIdm: {
        IdmParams idm = params.idm;
        idm.v0 = agents_[i].nominal_speed;
        accel[i] = idm_accel(i, idm);
        break;
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) integrate(i, accel[i]);
  ++step_;

  // ego route continuation
  {
    const std::size_t e = program_->ego;
    Agent& a = agents_[e];
    const auto& route = program_->ego_route;
    if (a.route_index + 1 < route.size() && vehicles_[e].lane_id == route[a.route_index] &&
        a.s >= path(route[a.route_index]).length()) {
      ++a.route_index;
      vehicles_[e].lane_id = route[a.route_index];
      refresh_frenet(e);
      a.lat_offset0 = a.d;
      a.lat_t0 = time();
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    Agent& a = agents_[i];
    const bool emergency = vehicles_[i].accel <= -params.emergency_decel + 1e-9;
    if (emergency && !a.emergency)
      out.events.push_back({step_, EventKind::kEmergencyBrake, {vehicles_[i].id}, ""});
    a.emergency = emergency;
    if (is_offroad(i))
      out.events.push_back({step_, EventKind::kViolation, {vehicles_[i].id}, "offroad"});
  }

  bool collided = false;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (boxes_overlap(footprint(vehicles_[i]), footprint(vehicles_[j]))) {
        out.events.push_back({step_, EventKind::kCollision, {vehicles_[i].id, vehicles_[j].id}, ""});
        collided = true;
      }
    }
  }
  for (auto& e : out.events) e.step = step_;
  record_frame();

  if (collided) {
    termination_ = Termination::kCollision;
  } else if (route_progress() <= 1.0) {
    termination_ = Termination::kGoal;
  } else if (step_ >= params.horizon) {
    termination_ = Termination::kTimeout;
  }
  out.termination = termination_;
  events_.insert(events_.end(), out.events.begin(), out.events.end());
  return out;
}

bool Simulation::is_offroad(std::size_t i) const {
  const Vec2 p{vehicles_[i].x, vehicles_[i].y};
  const double limit = program_->params.lane_half_width + program_->params.offroad_margin;
  for (const auto& [id, lp] : paths_)
    if (std::abs(lp.project(p).d) <= limit) return false;
  return true;
}

double Simulation::route_progress() const {
  const std::size_t e = program_->ego;
  const Agent& a = agents_[e];
  const auto& route = program_->ego_route;
  const std::string& lane = vehicles_[e].lane_id;
  if (a.route_index + 1 >= route.size() || lane != route[a.route_index]) {
    const LanePath& last = path(route.back());
    return last.length() - last.project({vehicles_[e].x, vehicles_[e].y}).s;
  }
  double rest = path(lane).length() - a.s;
  for (std::size_t k = a.route_index + 1; k < route.size(); ++k) rest += path(route[k]).length();
  return rest;
}

std::size_t Simulation::observation_size() {
  return kSelfFeatures + kNeighbours * kNeighbourFeatures;
}

std::vector<double> Simulation::observe(std::size_t i, std::optional<std::size_t> focus) const {
  std::vector<double> obs;
  obs.reserve(observation_size());
  const auto& me = vehicles_[i];
  const Agent& a = agents_[i];
  const LanePath& lp = path(me.lane_id);
  obs.push_back(me.x / 100.0);
  obs.push_back(me.y / 100.0);
  obs.push_back(me.heading / kPi);
  obs.push_back(me.speed / 20.0);
  obs.push_back(a.d / 4.0);
  obs.push_back(wrap_angle(me.heading - lp.heading_at(a.s)) / kPi);
  std::array<double, kMaxLanes> onehot{};
  if (auto idx = program_->map.index_of(me.lane_id); idx && *idx < kMaxLanes) onehot[*idx] = 1.0;
  obs.insert(obs.end(), onehot.begin(), onehot.end());
  obs.push_back(changing_lane(i) ? 1.0 : 0.0);
  obs.push_back(i == program_->ego ? std::min(route_progress(), 200.0) / 100.0 : 0.0);
  obs.push_back(me.accel / 6.0);

  std::vector<std::pair<double, std::size_t>> near;
  for (std::size_t j = 0; j < vehicles_.size(); ++j) {
    if (j == i) continue;
    const double dist = std::hypot(vehicles_[j].x - me.x, vehicles_[j].y - me.y);
    if (focus && j == *focus) {
      near.push_back({-1.0, j});
    } else if (dist <= kNeighbourRange) {
      near.push_back({dist, j});
    }
  }
  std::sort(near.begin(), near.end());
  const double c = std::cos(me.heading), s = std::sin(me.heading);
  const Vec2 my_vel{me.speed * c, me.speed * s};
  for (std::size_t k = 0; k < kNeighbours; ++k) {
    if (k >= near.size()) {
      obs.insert(obs.end(), kNeighbourFeatures, 0.0);
      continue;
    }
    const auto& o = vehicles_[near[k].second];
    const Vec2 dp{o.x - me.x, o.y - me.y};
    const Vec2 dv = Vec2{o.speed * std::cos(o.heading), o.speed * std::sin(o.heading)} - my_vel;
    obs.push_back(1.0);
    obs.push_back(std::clamp((c * dp.x + s * dp.y) / 50.0, -2.0, 2.0));
    obs.push_back(std::clamp((-s * dp.x + c * dp.y) / 50.0, -2.0, 2.0));
    obs.push_back((c * dv.x + s * dv.y) / 20.0);
    obs.push_back((-s * dv.x + c * dv.y) / 20.0);
  }
  return obs;
}

std::vector<double> Simulation::observe_slot(const std::string& slot) const {
  const std::size_t i = slots_.at(slot).front();
  if (i == program_->ego) return observe(i);
  return observe(i, program_->ego);
}

void Simulation::record_frame() {
  std::vector<VehicleFrame> f;
  f.reserve(vehicles_.size());
  for (const auto& v : vehicles_) f.push_back({v.x, v.y, v.heading, v.speed});
  frames_.push_back(std::move(f));
}

EpisodeLog Simulation::log() const {
  EpisodeLog log;
  log.seed = seed_;
  log.termination = termination_;
  log.steps = step_;
  for (std::size_t i = 0; i < vehicles_.size(); ++i) {
    log.vehicles.push_back({vehicles_[i].id, std::string(dsl::to_string(program_->roles[i])),
                            vehicles_[i].length, vehicles_[i].width});
  }
  log.events = events_;
  log.frames = frames_;
  return log;
}

}  // namespace scenforge

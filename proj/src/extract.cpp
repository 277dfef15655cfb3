#include "scenforge/extract.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <nlohmann/json.hpp>
#include <unordered_map>

namespace scenforge {
namespace {

constexpr std::array<std::string_view, 7> kLabelNames = {
    "follow", "brake", "lane_change", "straight", "turn_left", "turn_right", "u_turn"};

long long time_key(double t) { return std::llround(t * 1000.0); }

using FrameIndex = std::unordered_map<long long, std::size_t>;

FrameIndex index_frames(const Trajectory& t) {
  FrameIndex idx;
  for (std::size_t i = 0; i < t.frames.size(); ++i) idx.emplace(time_key(t.frames[i].timestamp), i);
  return idx;
}

double signed_speed(const TrackFrame& f) {
  return f.velocity().dot({std::cos(f.heading), std::sin(f.heading)});
}

ScenarioSegment make_segment(const Trajectory& ego, std::size_t start, std::size_t end,
                             ScenarioLabel label) {
  ScenarioSegment s;
  s.ego_id = ego.agent_id;
  s.start = start;
  s.end = end;
  s.t_start = ego.frames[start].timestamp;
  s.t_end = ego.frames[end].timestamp;
  s.label = label;
  return s;
}

}  // namespace

std::string_view to_string(ScenarioLabel label) {
  return kLabelNames[static_cast<std::size_t>(label)];
}

ScenarioLabel parse_scenario_label(std::string_view text) {
  for (std::size_t i = 0; i < kLabelNames.size(); ++i)
    if (kLabelNames[i] == text) return static_cast<ScenarioLabel>(i);
  throw DataError("unknown scenario label: " + std::string(text));
}

void ExtractionConfig::validate() const {
  if (brake_min_frames < 1) throw ConfigError("brake_min_frames must be >= 1");
  if (follow_min_frames < 1) throw ConfigError("follow_min_frames must be >= 1");
  for (double v : {brake_decel_threshold, motion_speed_min, straight_yaw_max, uturn_yaw_min})
    if (!std::isfinite(v)) throw ConfigError("extraction thresholds must be finite");
}

std::vector<ScenarioSegment> detect_following(const Trajectory& ego,
                                              std::span<const Trajectory> others,
                                              const LaneMap& map,
                                              const ExtractionConfig& cfg) {
  cfg.validate();
  std::vector<FrameIndex> other_idx;
  other_idx.reserve(others.size());
  for (const auto& o : others) other_idx.push_back(index_frames(o));

  const std::size_t n = ego.frames.size();
  std::vector<std::optional<std::size_t>> leader(n);
  for (std::size_t i = 0; i < n; ++i) {
    const TrackFrame& ef = ego.frames[i];
    if (!ef.lane_id) continue;
    const Lane* lane = map.find(*ef.lane_id);
    if (!lane) continue;
    const double ego_arc = closest_point(lane->centerline, ef.position()).arc;
    const long long key = time_key(ef.timestamp);
    double best = std::numeric_limits<double>::infinity();
    std::optional<std::size_t> best_k;
    bool unique = true;
    for (std::size_t k = 0; k < others.size(); ++k) {
      if (others[k].agent_id == ego.agent_id) continue;
      auto it = other_idx[k].find(key);
      if (it == other_idx[k].end()) continue;
      const TrackFrame& of = others[k].frames[it->second];
      if (of.lane_id != ef.lane_id) continue;
      const double ahead = closest_point(lane->centerline, of.position()).arc - ego_arc;
      if (ahead <= 0.0) continue;
      if (ahead < best - 1e-9) {
        best = ahead;
        best_k = k;
        unique = true;
      } else if (std::abs(ahead - best) <= 1e-9) {
        unique = false;
      }
    }
    if (!best_k || !unique) continue;
    const TrackFrame& lf = others[*best_k].frames[other_idx[*best_k].at(key)];
    if (ef.speed() <= cfg.motion_speed_min && lf.speed() <= cfg.motion_speed_min) continue;
    leader[i] = best_k;
  }

  std::vector<ScenarioSegment> out;
  std::size_t i = 0;
  while (i < n) {
    if (!leader[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < n && leader[j + 1] == leader[i]) ++j;
    if (static_cast<int>(j - i + 1) >= cfg.follow_min_frames) {
      ScenarioSegment seg = make_segment(ego, i, j, ScenarioLabel::kFollow);
      const Trajectory& partner = others[*leader[i]];
      seg.partner_ids = {partner.agent_id};
      seg.risk = assess_risk(seg, ego, std::span<const Trajectory>(&partner, 1));
      out.push_back(std::move(seg));
    }
    i = j + 1;
  }
  return out;
}

std::vector<double> longitudinal_accelerations(const Trajectory& t) {
  std::vector<double> acc(t.frames.size(), 0.0);
  for (std::size_t i = 1; i < t.frames.size(); ++i) {
    const double dt = t.frames[i].timestamp - t.frames[i - 1].timestamp;
    acc[i] = (signed_speed(t.frames[i]) - signed_speed(t.frames[i - 1])) / dt;
  }
  return acc;
}

std::vector<ScenarioSegment> detect_braking(const ScenarioSegment& segment,
                                            const Trajectory& ego,
                                            const ExtractionConfig& cfg) {
  cfg.validate();
  std::vector<ScenarioSegment> out;
  if (segment.label != ScenarioLabel::kFollow) return out;
  const auto acc = longitudinal_accelerations(ego);
  const std::size_t last = std::min(segment.end, ego.frames.size() - 1);
  std::size_t i = segment.start + 1;
  while (i <= last) {
    if (!(acc[i] < cfg.brake_decel_threshold)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 <= last && acc[j + 1] < cfg.brake_decel_threshold) ++j;
    // Frames i..j decelerate; the event spans the velocity samples i-1..j.
    if (static_cast<int>(j - i + 1) >= cfg.brake_min_frames) {
      ScenarioSegment seg = make_segment(ego, i - 1, j, ScenarioLabel::kBrake);
      seg.partner_ids = segment.partner_ids;
      seg.risk = segment.risk;
      out.push_back(std::move(seg));
    }
    i = j + 1;
  }
  return out;
}

std::vector<ScenarioSegment> detect_lane_change(const Trajectory& ego, const LaneMap& map) {
  std::vector<ScenarioSegment> out;
  for (std::size_t i = 1; i < ego.frames.size(); ++i) {
    const auto& prev = ego.frames[i - 1].lane_id;
    const auto& cur = ego.frames[i].lane_id;
    if (!prev || !cur || *prev == *cur) continue;
    if (!map.are_adjacent(*prev, *cur)) continue;
    out.push_back(make_segment(ego, i - 1, i, ScenarioLabel::kLaneChange));
  }
  return out;
}

ScenarioLabel classify_maneuver(double yaw, const ExtractionConfig& cfg) {
  const double a = std::abs(yaw);
  if (a >= cfg.uturn_yaw_min) return ScenarioLabel::kUTurn;
  if (a < cfg.straight_yaw_max) return ScenarioLabel::kStraight;
  return yaw > 0.0 ? ScenarioLabel::kTurnLeft : ScenarioLabel::kTurnRight;
}

ScenarioSegment classify_intersection(const Trajectory& ego,
                                      std::span<const Trajectory> others,
                                      const ExtractionConfig& cfg) {
  cfg.validate();
  if (ego.frames.size() < 2) throw ArgumentError("classify_intersection needs >= 2 frames");
  const double yaw = yaw_change(ego);
  ScenarioSegment seg = make_segment(ego, 0, ego.frames.size() - 1, classify_maneuver(yaw, cfg));
  const auto ego_path = ego.path();

  std::optional<std::size_t> partner;
  PetResult partner_pet;
  for (std::size_t k = 0; k < others.size(); ++k) {
    if (others[k].agent_id == ego.agent_id || others[k].frames.size() < 2) continue;
    const auto other_path = others[k].path();
    auto cp = find_conflict_point(ego_path, other_path);
    if (!cp) continue;
    auto p = pet(ego, others[k], *cp);
    if (!p) continue;
    if (!partner || p->value < partner_pet.value) {
      partner = k;
      partner_pet = *p;
    }
  }
  seg.risk.max_yaw_change = std::abs(yaw);
  if (partner) {
    const Trajectory& bg = others[*partner];
    seg.partner_ids = {bg.agent_id};
    seg.interaction_label = "ego-" + std::string(to_string(seg.label)) + "/bg-" +
                            std::string(to_string(classify_maneuver(yaw_change(bg), cfg)));
    seg.risk = assess_risk(seg, ego, std::span<const Trajectory>(&bg, 1));
  }
  return seg;
}

RiskMetrics assess_risk(const ScenarioSegment& segment, const Trajectory& ego,
                        std::span<const Trajectory> partners) {
  RiskMetrics risk;
  if (ego.frames.empty()) return risk;
  const std::size_t end = std::min(segment.end, ego.frames.size() - 1);
  const std::size_t start = std::min(segment.start, end);
  std::span<const TrackFrame> frames(ego.frames.data() + start, end - start + 1);
  risk.max_yaw_change = std::abs(yaw_change(frames));

  Trajectory ego_part;
  ego_part.agent_id = ego.agent_id;
  ego_part.kind = ego.kind;
  ego_part.frames.assign(frames.begin(), frames.end());
  const auto ego_path = ego_part.path();

  for (const auto& partner : partners) {
    if (partner.agent_id == ego.agent_id) continue;
    const FrameIndex idx = index_frames(partner);
    for (const auto& ef : frames) {
      auto it = idx.find(time_key(ef.timestamp));
      if (it == idx.end()) continue;
      const TrackFrame& pf = partner.frames[it->second];
      const Vec2 heading{std::cos(ef.heading), std::sin(ef.heading)};
      if ((pf.position() - ef.position()).dot(heading) <= 0.0) continue;  // not ahead
      const double gap = bumper_gap(ef, pf);
      if (gap <= 0.0) risk.collision = true;
      if (auto t = ttc(ef, pf, gap)) {
        if (!risk.min_ttc || *t < *risk.min_ttc) risk.min_ttc = *t;
      }
    }
    if (partner.frames.size() < 2 || ego_path.size() < 2) continue;
    if (auto cp = find_conflict_point(ego_path, partner.path())) {
      if (auto p = pet(ego_part, partner, *cp)) {
        if (p->overlap) risk.collision = true;
        if (!risk.min_pet || p->value < *risk.min_pet) risk.min_pet = p->value;
      }
    }
  }
  return risk;
}

std::vector<ScenarioSegment> extract_scenarios(std::span<const Trajectory> tracks, const LaneMap& map,
                                               const ExtractionConfig& cfg) {
  cfg.validate();
  std::vector<ScenarioSegment> out;
  auto partners_of = [&](const ScenarioSegment& seg) {
    std::vector<Trajectory> p;
    for (const auto& t : tracks)
      if (std::find(seg.partner_ids.begin(), seg.partner_ids.end(), t.agent_id) != seg.partner_ids.end())
        p.push_back(t);
    return p;
  };
  for (const auto& ego : tracks) {
    if (ego.kind != AgentKind::kVehicle || ego.frames.size() < 2) continue;
    for (auto& seg : detect_following(ego, tracks, map, cfg)) {
      const auto partners = partners_of(seg);
      for (auto& brake : detect_braking(seg, ego, cfg)) {
        brake.risk = assess_risk(brake, ego, partners);
        out.push_back(std::move(brake));
      }
      seg.risk = assess_risk(seg, ego, partners);
      out.push_back(std::move(seg));
    }
    for (auto& seg : detect_lane_change(ego, map)) {
      seg.risk = assess_risk(seg, ego, tracks);
      out.push_back(std::move(seg));
    }
    const bool signalised = std::any_of(ego.frames.begin(), ego.frames.end(), [&](const TrackFrame& f) {
      const Lane* lane = f.lane_id ? map.find(*f.lane_id) : nullptr;
      return lane && lane->control == LaneControl::kSignal;
    });
    if (signalised) out.push_back(classify_intersection(ego, tracks, cfg));
  }
  return out;
}

namespace {

nlohmann::ordered_json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

std::string segment_to_json(const ScenarioSegment& s) {
  nlohmann::ordered_json j;
  j["ego_id"] = s.ego_id;
  j["partner_ids"] = s.partner_ids;
  j["frame_range"] = {s.start, s.end};
  j["time_range"] = {s.t_start, s.t_end};
  j["label"] = to_string(s.label);
  j["interaction_label"] =
      s.interaction_label ? nlohmann::ordered_json(*s.interaction_label) : nlohmann::ordered_json(nullptr);
  j["risk"] = {{"min_ttc", optional_json(s.risk.min_ttc)},
               {"min_pet", optional_json(s.risk.min_pet)},
               {"max_yaw_change", s.risk.max_yaw_change},
               {"collision", s.risk.collision}};
  return j.dump();
}

ScenarioSegment segment_from_json(std::string_view line) {
  try {
    const auto j = nlohmann::json::parse(line);
    ScenarioSegment s;
    s.ego_id = j.at("ego_id").get<std::string>();
    s.partner_ids = j.at("partner_ids").get<std::vector<std::string>>();
    s.start = j.at("frame_range").at(0).get<std::size_t>();
    s.end = j.at("frame_range").at(1).get<std::size_t>();
    s.t_start = j.at("time_range").at(0).get<double>();
    s.t_end = j.at("time_range").at(1).get<double>();
    s.label = parse_scenario_label(j.at("label").get<std::string>());
    if (!j.at("interaction_label").is_null())
      s.interaction_label = j["interaction_label"].get<std::string>();
    const auto& r = j.at("risk");
    if (!r.at("min_ttc").is_null()) s.risk.min_ttc = r["min_ttc"].get<double>();
    if (!r.at("min_pet").is_null()) s.risk.min_pet = r["min_pet"].get<double>();
    s.risk.max_yaw_change = r.at("max_yaw_change").get<double>();
    s.risk.collision = r.at("collision").get<bool>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed segment record: ") + e.what());
  }
}

}  // namespace scenforge

#include "scenforge/corpus.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

namespace scenforge {

using ojson = nlohmann::ordered_json;

std::string_view to_string(AdversarialBehavior b) {
  switch (b) {
    case AdversarialBehavior::kSuddenBrake: return "sudden_brake";
    case AdversarialBehavior::kTailgate: return "tailgate";
    case AdversarialBehavior::kUnsafeLaneChange: return "unsafe_lane_change";
    case AdversarialBehavior::kSpeeding: return "speeding";
  }
  return "?";
}

AdversarialBehavior parse_adversarial_behavior(std::string_view text) {
  for (auto b : {AdversarialBehavior::kSuddenBrake, AdversarialBehavior::kTailgate,
                 AdversarialBehavior::kUnsafeLaneChange, AdversarialBehavior::kSpeeding})
    if (to_string(b) == text) return b;
  throw DataError("unknown adversarial behavior '" + std::string(text) + "'");
}

std::string render_condition(const AdversarialCondition& c) {
  const std::string d = format_number(c.distance);
  const std::string rel(dsl::to_string(c.relation));
  switch (c.behavior) {
    case AdversarialBehavior::kSuddenBrake:
      return "sudden braking at " + d + " m distance from the " + rel;
    case AdversarialBehavior::kTailgate:
      return "tailgating at " + d + " m distance from the " + rel;
    case AdversarialBehavior::kUnsafeLaneChange:
      return "lateral cut-in at " + d + " m from the " + rel;
    case AdversarialBehavior::kSpeeding:
      return "speeding at " + d + " m distance from the " + rel;
  }
  return {};
}

AdversarialPalette AdversarialPalette::standard() {
  AdversarialPalette p;
  p.behaviors = {AdversarialBehavior::kSuddenBrake, AdversarialBehavior::kTailgate,
                 AdversarialBehavior::kUnsafeLaneChange, AdversarialBehavior::kSpeeding};
  p.relations = {dsl::Relation::kRear, dsl::Relation::kFront, dsl::Relation::kLeft,
                 dsl::Relation::kRight};
  p.params[AdversarialBehavior::kSuddenBrake] = {{"decel", {4.0, 8.0}}, {"duration", {1.0, 3.0}}};
  p.params[AdversarialBehavior::kUnsafeLaneChange] = {{"duration", {1.0, 3.0}}};
  p.params[AdversarialBehavior::kSpeeding] = {{"factor", {1.2, 1.6}}};
  return p;
}

namespace {

double snap(double v, double step) {
  if (!(step > 0.0)) return v;
  return std::round(v / step) * step;
}

}  // namespace

AdversarialCondition synthesize_adversarial(const ScenarioSegment& segment, std::uint64_t seed,
                                            const AdversarialPalette& palette) {
  if (palette.behaviors.empty()) throw ConfigError("adversarial palette has no behaviors");
  if (palette.relations.empty()) throw ConfigError("adversarial palette has no relations");
  if (!(palette.distance_min > 0.0) || palette.distance_max < palette.distance_min)
    throw ConfigError("adversarial palette distance range invalid");

  const std::string key = segment.ego_id + "#" + std::to_string(segment.start);
  Rng rng(derive_seed(seed, fnv1a(key)));
  AdversarialCondition c;
  c.behavior = palette.behaviors[std::uniform_int_distribution<std::size_t>(
      0, palette.behaviors.size() - 1)(rng)];
  c.relation = palette.relations[std::uniform_int_distribution<std::size_t>(
      0, palette.relations.size() - 1)(rng)];
  const double raw = std::uniform_real_distribution<double>(palette.distance_min,
                                                            palette.distance_max)(rng);
  c.distance = std::clamp(snap(raw, palette.distance_step), palette.distance_min,
                          palette.distance_max);
  if (palette.distance_min == palette.distance_max) c.distance = palette.distance_min;
  if (auto it = palette.params.find(c.behavior); it != palette.params.end()) {
    for (const auto& [name, range] : it->second) {
      const double v = range.hi > range.lo
                           ? std::uniform_real_distribution<double>(range.lo, range.hi)(rng)
                           : range.lo;
      c.params[name] = std::round(v * 10.0) / 10.0;
    }
  }
  return c;
}

std::string summarize_behavior(const ScenarioSegment& s) {
  const std::string dur = format_fixed1(s.duration());
  std::string out;
  switch (s.label) {
    case ScenarioLabel::kFollow:
      out = "The ego vehicle follows a leading vehicle for " + dur + " s";
      break;
    case ScenarioLabel::kBrake:
      out = "The ego vehicle brakes behind a leading vehicle for " + dur + " s";
      break;
    case ScenarioLabel::kLaneChange:
      out = "The ego vehicle changes into an adjacent lane over " + dur + " s";
      break;
    case ScenarioLabel::kStraight:
      out = "The ego vehicle drives straight through the intersection over " + dur + " s";
      break;
    case ScenarioLabel::kTurnLeft:
      out = "The ego vehicle turns left at the intersection over " + dur + " s";
      break;
    case ScenarioLabel::kTurnRight:
      out = "The ego vehicle turns right at the intersection over " + dur + " s";
      break;
    case ScenarioLabel::kUTurn:
      out = "The ego vehicle makes a U-turn over " + dur + " s";
      break;
  }
  std::vector<std::string> metrics;
  if (s.risk.min_ttc) metrics.push_back("a minimum TTC of " + format_fixed1(*s.risk.min_ttc) + " s");
  if (s.risk.min_pet) metrics.push_back("a minimum PET of " + format_fixed1(*s.risk.min_pet) + " s");
  if (!metrics.empty()) {
    out += " with " + metrics[0];
    if (metrics.size() > 1) out += " and " + metrics[1];
  }
  return out + ".";
}

std::string describe_road(const LaneMap& map, const std::vector<std::string>& lane_ids) {
  if (lane_ids.empty()) throw ArgumentError("describe_road needs at least one lane");
  std::vector<std::string> phrases;
  for (const auto& id : lane_ids) {
    const Lane& lane = map.at(id);
    std::string p = lane.speed_class == SpeedClass::kSlow ? "a slow-speed lane" : "a lane";
    p += lane.line_type == LineType::kDashed ? " with dashed markings" : " with solid markings";
    p += " (" + id + ")";
    if (lane.control == LaneControl::kClosure) p += " under a temporary road closure";
    if (lane.control == LaneControl::kSignal) p += " controlled by a traffic signal";
    phrases.push_back(std::move(p));
  }
  std::string out = "The road has ";
  for (std::size_t i = 0; i < phrases.size(); ++i) {
    if (i) out += i + 1 == phrases.size() ? " and " : ", ";
    out += phrases[i];
  }
  return out + ".";
}

std::string assemble_description(const DescriptionParts& parts) {
  auto require = [](const std::string& v, const char* name) {
    if (trim(v).empty()) throw ValidationError(std::string(name) + " empty");
  };
  require(parts.scene_type, "scene_type");
  require(parts.behavior_summary, "behavior_summary");
  require(parts.road_description, "road_description");
  require(parts.adversarial_text, "adversarial_text");
  require(parts.provenance.dataset, "provenance");

  std::string out = trim(parts.behavior_summary);
  out += " " + trim(parts.road_description);
  out += " An adversarial vehicle introduces " + trim(parts.adversarial_text) + ".";
  out += " Scene type " + trim(parts.scene_type);
  if (!parts.provenance.source_file.empty()) {
    out += ", extracted from " + parts.provenance.source_file + " frames " +
           std::to_string(parts.provenance.frame_start) + "-" +
           std::to_string(parts.provenance.frame_end);
  }
  out += " [" + trim(parts.provenance.dataset) + "]";
  return out;
}

void validate_record(const ScenarioRecord& r) {
  auto require = [](const std::string& v, const char* name) {
    if (trim(v).empty()) throw ValidationError(std::string(name) + " empty");
  };
  require(r.scene_type, "scene_type");
  require(r.behavior_summary, "behavior_summary");
  require(r.road_description, "road_description");
  require(r.adversarial_text, "adversarial_text");
  require(r.description, "description");
  if (!(r.adversarial.distance > 0.0)) throw ValidationError("adversarial distance must be positive");
  try {
    dsl::parse_geometry_section(r.dsl_geometry);
    dsl::parse_spawn_section(r.dsl_spawn);
    dsl::parse_behavior_section(r.dsl_behavior);
  } catch (const dsl::DslError& e) {
    throw ValidationError(std::string("record snippet does not parse: ") + e.what());
  }
}

namespace {

std::string ego_action(const ScenarioSegment& s) {
  switch (s.label) {
    case ScenarioLabel::kFollow: return "follow";
    case ScenarioLabel::kBrake: return "brake(decel=3)";
    case ScenarioLabel::kLaneChange: return "lane_change(direction=left)";
    case ScenarioLabel::kStraight: return "go_straight";
    case ScenarioLabel::kTurnLeft: return "turn_left";
    case ScenarioLabel::kTurnRight: return "turn_right";
    case ScenarioLabel::kUTurn: return "u_turn";
  }
  return "go_straight";
}

std::string adversary_actions(const AdversarialCondition& c) {
  auto param = [&](const char* name, double fallback) {
    auto it = c.params.find(name);
    return format_number(it == c.params.end() ? fallback : it->second);
  };
  switch (c.behavior) {
    case AdversarialBehavior::kSuddenBrake:
      return "go_straight(duration=2) -> sudden_brake(decel=" + param("decel", 6.0) +
             ", duration=" + param("duration", 2.0) + ")";
    case AdversarialBehavior::kTailgate:
      return "tailgate(gap=" + format_number(c.distance) + ")";
    case AdversarialBehavior::kUnsafeLaneChange: {
      const bool right = c.relation == dsl::Relation::kRight;
      return "go_straight(duration=1) -> cut_in(side=" + std::string(right ? "right" : "left") +
             ", duration=" + param("duration", 2.0) + ")";
    }
    case AdversarialBehavior::kSpeeding:
      return "speeding(factor=" + param("factor", 1.3) + ")";
  }
  return "go_straight";
}

}  // namespace

ScenarioRecord build_record(const RecordInputs& in, const LaneMap& map, std::uint64_t seed,
                            const AdversarialPalette& palette) {
  if (in.lane_ids.empty()) throw ArgumentError("record needs at least one route lane");
  ScenarioRecord r;
  r.scene_type = std::string(to_string(in.segment.label));
  r.behavior_summary = summarize_behavior(in.segment);
  r.road_description = describe_road(map, in.lane_ids);
  r.adversarial = synthesize_adversarial(in.segment, seed, palette);
  r.adversarial_text = render_condition(r.adversarial);
  r.provenance = in.provenance;
  r.risk = in.segment.risk;
  r.description = assemble_description(
      {r.scene_type, r.behavior_summary, r.road_description, r.adversarial_text, r.provenance});

  std::string route = "[";
  for (std::size_t i = 0; i < in.lane_ids.size(); ++i)
    route += (i ? ", \"" : "\"") + in.lane_ids[i] + "\"";
  route += "]";
  r.dsl_geometry = "geometry {\n  map: \"" + in.map_key + "\";\n  ego_route: " + route +
                   ";\n  source: \"" + in.provenance.dataset + "\";\n  scene: " + r.scene_type +
                   ";\n}\n";
  r.dsl_spawn = "spawn {\n  vehicle ego { role: ego; lane: \"" + in.lane_ids.front() +
                "\"; s: " + format_number(in.ego_arc_s) + "; speed: " +
                format_number(in.ego_speed) + "; }\n  vehicle adv1 { role: adversarial; anchor: ego; relation: " +
                std::string(dsl::to_string(r.adversarial.relation)) +
                "; offset: " + format_number(r.adversarial.distance) + "; speed: " +
                format_number(in.ego_speed) + "; }\n}\n";
  r.dsl_behavior = "behavior {\n  ego: " + ego_action(in.segment) + ";\n  adv1: " +
                   adversary_actions(r.adversarial) + ";\n}\n";
  validate_record(r);
  return r;
}

namespace {

ojson optional_json(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }

std::optional<double> optional_from(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

std::string record_to_json(const ScenarioRecord& r) {
  ojson adv;
  adv["behavior"] = to_string(r.adversarial.behavior);
  adv["relation"] = dsl::to_string(r.adversarial.relation);
  adv["distance"] = r.adversarial.distance;
  adv["params"] = ojson::object();
  for (const auto& [k, v] : r.adversarial.params) adv["params"][k] = v;
  adv["text"] = r.adversarial_text;

  ojson meta;
  meta["scene_type"] = r.scene_type;
  meta["behavior_summary"] = r.behavior_summary;
  meta["road_description"] = r.road_description;
  meta["adversarial"] = adv;
  meta["provenance"] = {{"dataset", r.provenance.dataset},
                        {"source", r.provenance.source_file},
                        {"frames", {r.provenance.frame_start, r.provenance.frame_end}}};
  meta["risk"] = {{"min_ttc", optional_json(r.risk.min_ttc)},
                  {"min_pet", optional_json(r.risk.min_pet)},
                  {"max_yaw_change", r.risk.max_yaw_change},
                  {"collision", r.risk.collision}};

  ojson j;
  j["description"] = r.description;
  j["geometry.snippet"] = r.dsl_geometry;
  j["spawn.snippet"] = r.dsl_spawn;
  j["behavior.snippet"] = r.dsl_behavior;
  j["meta"] = meta;
  return j.dump();
}

ScenarioRecord record_from_json(std::string_view line) {
  const auto j = nlohmann::json::parse(line);
  ScenarioRecord r;
  r.description = j.at("description").get<std::string>();
  r.dsl_geometry = j.at("geometry.snippet").get<std::string>();
  r.dsl_spawn = j.at("spawn.snippet").get<std::string>();
  r.dsl_behavior = j.at("behavior.snippet").get<std::string>();
  const auto& m = j.at("meta");
  r.scene_type = m.at("scene_type").get<std::string>();
  r.behavior_summary = m.at("behavior_summary").get<std::string>();
  r.road_description = m.at("road_description").get<std::string>();
  const auto& a = m.at("adversarial");
  r.adversarial.behavior = parse_adversarial_behavior(a.at("behavior").get<std::string>());
  auto rel = dsl::parse_relation(a.at("relation").get<std::string>());
  if (!rel) throw DataError("unknown relation in corpus record");
  r.adversarial.relation = *rel;
  r.adversarial.distance = a.at("distance").get<double>();
  for (const auto& [k, v] : a.at("params").items()) r.adversarial.params[k] = v.get<double>();
  r.adversarial_text = a.at("text").get<std::string>();
  const auto& p = m.at("provenance");
  r.provenance.dataset = p.at("dataset").get<std::string>();
  r.provenance.source_file = p.at("source").get<std::string>();
  r.provenance.frame_start = p.at("frames").at(0).get<std::size_t>();
  r.provenance.frame_end = p.at("frames").at(1).get<std::size_t>();
  const auto& risk = m.at("risk");
  r.risk.min_ttc = optional_from(risk.at("min_ttc"));
  r.risk.min_pet = optional_from(risk.at("min_pet"));
  r.risk.max_yaw_change = risk.at("max_yaw_change").get<double>();
  r.risk.collision = risk.at("collision").get<bool>();
  return r;
}

std::string save_corpus(const std::vector<ScenarioRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    validate_record(r);
    out += record_to_json(r);
    out += '\n';
  }
  return out;
}

std::vector<ScenarioRecord> load_corpus(std::string_view text) {
  std::vector<ScenarioRecord> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      out.push_back(record_from_json(line));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("corpus line " + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("corpus line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

CorpusStore::CorpusStore(std::string path) : path_(std::move(path)) {}

void CorpusStore::append(const std::vector<ScenarioRecord>& records) const {
  const std::string payload = save_corpus(records);
  const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd < 0) throw DataError("cannot open corpus file " + path_);
  if (::flock(fd, LOCK_EX) != 0) {
    ::close(fd);
    throw DataError("cannot lock corpus file " + path_);
  }
  std::size_t written = 0;
  bool ok = true;
  while (written < payload.size()) {
    const ssize_t n = ::write(fd, payload.data() + written, payload.size() - written);
    if (n <= 0) {
      ok = false;
      break;
    }
    written += static_cast<std::size_t>(n);
  }
  ::flock(fd, LOCK_UN);
  ::close(fd);
  if (!ok) throw DataError("short write to corpus file " + path_);
}

std::vector<ScenarioRecord> CorpusStore::load() const {
  std::ifstream in(path_);
  if (!in) return {};
  std::stringstream ss;
  ss << in.rdbuf();
  return load_corpus(ss.str());
}

MemoryBank::MemoryBank(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("memory bank capacity must be positive");
}

void MemoryBank::add(ScenarioRecord record) {
  std::lock_guard lock(mu_);
  items_.push_back(std::move(record));
  while (items_.size() > capacity_) items_.pop_front();
}

std::vector<ScenarioRecord> MemoryBank::snapshot() const {
  std::lock_guard lock(mu_);
  return {items_.begin(), items_.end()};
}

std::size_t MemoryBank::size() const {
  std::lock_guard lock(mu_);
  return items_.size();
}

}  // namespace scenforge

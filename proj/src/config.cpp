#include "scenforge/config.hpp"

#include <filesystem>
#include <nlohmann/json.hpp>
#include <set>

namespace scenforge {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Reads the keys of one section and rejects any it does not know.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError("config section '" + name_ + "' must be an object");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (const auto& [k, v] : j_.items())
      if (!used_.count(k)) throw ConfigError("unknown config key '" + name_ + "." + k + "'");
  }

  template <typename T>
  void get(const char* key, T& out) {
    used_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config key '" + name_ + "." + key + "' has the wrong type");
    }
  }

  const json* sub(const char* key) {
    used_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> used_;
};

void read_paths(Section s, PathsConfig& p) {
  s.get("tracks", p.tracks);
  s.get("lane_map", p.lane_map);
  s.get("maps", p.maps);
  s.get("corpus", p.corpus);
  s.get("index", p.index);
  s.get("checkpoints", p.checkpoints);
  s.get("reports", p.reports);
  s.get("episodes", p.episodes);
}

void read_extraction(Section s, ExtractionConfig& c) {
  s.get("brake_decel_threshold", c.brake_decel_threshold);
  s.get("brake_min_frames", c.brake_min_frames);
  s.get("follow_min_frames", c.follow_min_frames);
  s.get("motion_speed_min", c.motion_speed_min);
  s.get("straight_yaw_max", c.straight_yaw_max);
  s.get("uturn_yaw_min", c.uturn_yaw_min);
}

void read_backend(Section s, BackendConfig& b) {
  std::string mode = b.mode == BackendConfig::Mode::kReplay ? "replay" : "http";
  s.get("mode", mode);
  if (mode == "replay") b.mode = BackendConfig::Mode::kReplay;
  else if (mode == "http") b.mode = BackendConfig::Mode::kHttpChat;
  else throw ConfigError("backend.mode must be 'replay' or 'http'");
  s.get("endpoint", b.endpoint);
  s.get("model", b.model);
  s.get("temperature", b.temperature);
  s.get("sample_count", b.sample_count);
  s.get("timeout_seconds", b.timeout_seconds);
  s.get("replay_dir", b.replay_dir);
}

void read_sim(Section s, SimParams& p) {
  s.get("dt", p.dt);
  s.get("horizon", p.horizon);
  s.get("v_max", p.v_max);
  s.get("accel_command", p.accel_command);
  s.get("emergency_decel", p.emergency_decel);
  s.get("accel_limit", p.accel_limit);
  s.get("decel_limit", p.decel_limit);
  s.get("lane_change_duration", p.lane_change_duration);
  s.get("max_steer", p.max_steer);
  s.get("spawn_jitter_s", p.spawn_jitter_s);
  s.get("spawn_jitter_v", p.spawn_jitter_v);
  s.get("offroad_margin", p.offroad_margin);
  s.get("lane_half_width", p.lane_half_width);
  if (const json* idm = s.sub("idm")) {
    Section i(*idm, "sim.idm");
    i.get("v0", p.idm.v0);
    i.get("time_headway", p.idm.time_headway);
    i.get("s0", p.idm.s0);
    i.get("a_max", p.idm.a_max);
    i.get("b", p.idm.b);
  }
}

void read_ppo(Section s, PpoConfig& c) {
  s.get("learning_rate", c.learning_rate);
  s.get("rollout_length", c.rollout_length);
  s.get("minibatch", c.minibatch);
  s.get("clip", c.clip);
  s.get("gamma", c.gamma);
  s.get("lambda", c.lambda);
  s.get("entropy_coef", c.entropy_coef);
  s.get("value_coef", c.value_coef);
  s.get("epochs", c.epochs);
  s.get("reset_interval", c.reset_interval);
  std::string scope = c.reset_scope == ResetScope::kFull ? "full" : "output";
  s.get("reset_scope", scope);
  if (scope == "full") c.reset_scope = ResetScope::kFull;
  else if (scope == "output") c.reset_scope = ResetScope::kOutputLayers;
  else throw ConfigError("ppo.reset_scope must be 'full' or 'output'");
  s.get("max_grad_norm", c.max_grad_norm);
  s.get("hidden", c.hidden);
  s.get("normalize_advantages", c.normalize_advantages);
}

void read_rewards(Section s, RewardConfig& r) {
  s.get("ego_collision", r.ego_collision);
  s.get("ego_goal", r.ego_goal);
  s.get("ego_emergency_brake", r.ego_emergency_brake);
  s.get("ego_smoothness", r.ego_smoothness);
  s.get("ego_step", r.ego_step);
  s.get("charge_remaining_steps", r.charge_remaining_steps);
  s.get("adv_collision", r.adv_collision);
  s.get("adv_ego_emergency_brake", r.adv_ego_emergency_brake);
  s.get("adv_violation", r.adv_violation);
  s.get("adv_step", r.adv_step);
}

void require_input(const RunConfig& c, const std::string& key, const std::string& path) {
  if (path.empty()) return;
  if (!fs::exists(c.resolve(path))) throw ConfigError(key + " not found: " + c.resolve(path));
}

void require_output(const RunConfig& c, const std::string& key, const std::string& path) {
  if (path.empty()) return;
  const fs::path p = fs::absolute(c.resolve(path));
  if (!fs::exists(p.parent_path())) throw ConfigError(key + " parent directory missing: " + p.string());
}

}  // namespace

std::string RunConfig::resolve(const std::string& path) const {
  if (path.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(base_dir) / path).lexically_normal().string();
}

void RunConfig::validate() const {
  extraction.validate();
  train.ppo.validate();
  if (generation.backend.sample_count < 1) throw ConfigError("backend.sample_count must be at least 1");
  if (!(generation.backend.timeout_seconds > 0.0)) throw ConfigError("backend.timeout_seconds must be positive");
  if (!(generation.theta > 0.0 && generation.theta <= 1.0)) throw ConfigError("voting.theta must lie in (0, 1]");
  if (generation.top_k < 1) throw ConfigError("retrieval.k must be at least 1");
  if (repair_attempts < 1) throw ConfigError("generation.repair_attempts must be at least 1");
  if (!(sim.dt > 0.0) || sim.horizon < 1) throw ConfigError("sim.dt must be positive and sim.horizon >= 1");
  if (train.num_envs < 1 || train.total_steps < 0) throw ConfigError("train.num_envs >= 1 and train.total_steps >= 0");
  if (eval.episodes < 1 || eval.workers < 1) throw ConfigError("evaluate.episodes and evaluate.workers must be >= 1");
  if (seeds.train.empty() || seeds.eval.empty()) throw ConfigError("seeds.train and seeds.eval must be non-empty");
  if (loop.rounds < 0 || loop.adversary_steps < 0 || loop.ego_steps < 0)
    throw ConfigError("loop values must be non-negative");
  Histogram(eval.bins.ttc);
  Histogram(eval.bins.pet);
  require_input(*this, "paths.tracks", paths.tracks);
  require_input(*this, "paths.lane_map", paths.lane_map);
  require_input(*this, "paths.maps", paths.maps);
  require_input(*this, "paths.episodes", paths.episodes);
  require_input(*this, "backend.replay_dir", generation.backend.replay_dir);
  require_output(*this, "paths.corpus", paths.corpus);
  require_output(*this, "paths.index", paths.index);
  require_output(*this, "paths.checkpoints", paths.checkpoints);
  require_output(*this, "paths.reports", paths.reports);
}

RunConfig config_from_json(std::string_view text, const std::string& base_dir) {
  const json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config is not valid JSON");
  RunConfig c;
  c.base_dir = base_dir.empty() ? base_dir : fs::absolute(base_dir).lexically_normal().string();
  Section root(j, "config");
  if (const json* s = root.sub("paths")) read_paths(Section(*s, "paths"), c.paths);
  if (const json* s = root.sub("extraction")) read_extraction(Section(*s, "extraction"), c.extraction);
  root.get("dataset", c.dataset);
  if (const json* s = root.sub("retrieval")) {
    Section r(*s, "retrieval");
    r.get("k", c.generation.top_k);
  }
  if (const json* s = root.sub("backend")) read_backend(Section(*s, "backend"), c.generation.backend);
  if (const json* s = root.sub("voting")) {
    Section v(*s, "voting");
    std::string mode(to_string(c.generation.voting));
    v.get("mode", mode);
    c.generation.voting = parse_voting_mode(mode);
    v.get("theta", c.generation.theta);
  }
  if (const json* s = root.sub("generation")) {
    Section g(*s, "generation");
    std::string tmpl;
    g.get("template", tmpl);
    if (!tmpl.empty()) c.generation.template_text = read_file(c.resolve(tmpl));
    g.get("judge", c.generation.judge);
    g.get("repair_attempts", c.repair_attempts);
    if (const json* shots = g.sub("few_shots")) {
      if (!shots->is_array()) throw ConfigError("generation.few_shots must be an array");
      for (const auto& shot : *shots) {
        FewShot f;
        Section fs(shot, "generation.few_shots[]");
        fs.get("input", f.input);
        fs.get("output", f.output);
        c.generation.few_shots.push_back(std::move(f));
      }
    }
  }
  if (const json* s = root.sub("sim")) read_sim(Section(*s, "sim"), c.sim);
  if (const json* s = root.sub("ppo")) read_ppo(Section(*s, "ppo"), c.train.ppo);
  if (const json* s = root.sub("train")) {
    Section t(*s, "train");
    t.get("total_steps", c.train.total_steps);
    t.get("num_envs", c.train.num_envs);
    t.get("reset_enabled", c.train.reset_enabled);
    t.get("reset_ego", c.train.reset_ego);
    t.get("stats_path", c.train.stats_path);
    if (!c.train.stats_path.empty()) c.train.stats_path = c.resolve(c.train.stats_path);
  }
  if (const json* s = root.sub("rewards")) read_rewards(Section(*s, "rewards"), c.train.rewards);
  if (const json* s = root.sub("seeds")) {
    Section sd(*s, "seeds");
    sd.get("master", c.seeds.master);
    sd.get("train", c.seeds.train);
    sd.get("eval", c.seeds.eval);
  }
  if (const json* s = root.sub("evaluate")) {
    Section e(*s, "evaluate");
    e.get("episodes", c.eval.episodes);
    e.get("workers", c.eval.workers);
    e.get("ttc_bins", c.eval.bins.ttc);
    e.get("pet_bins", c.eval.bins.pet);
  }
  if (const json* s = root.sub("loop")) {
    Section l(*s, "loop");
    l.get("rounds", c.loop.rounds);
    l.get("query", c.loop.query);
    l.get("adversary_steps", c.loop.adversary_steps);
    l.get("ego_steps", c.loop.ego_steps);
    l.get("episodes", c.loop.episodes);
  }
  if (!c.generation.backend.replay_dir.empty())
    c.generation.backend.replay_dir = c.resolve(c.generation.backend.replay_dir);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error&) {
    throw ConfigError("cannot read config file " + path);
  }
  const auto dir = fs::path(path).parent_path();
  return config_from_json(text, dir.empty() ? "." : dir.string());
}

std::string RunConfig::to_json() const {
  nlohmann::ordered_json j;
  j["paths"] = {{"tracks", resolve(paths.tracks)},           {"lane_map", resolve(paths.lane_map)},
                {"maps", resolve(paths.maps)},               {"corpus", resolve(paths.corpus)},
                {"index", resolve(paths.index)},             {"checkpoints", resolve(paths.checkpoints)},
                {"reports", resolve(paths.reports)},         {"episodes", resolve(paths.episodes)}};
  j["extraction"] = {{"brake_decel_threshold", extraction.brake_decel_threshold},
                     {"brake_min_frames", extraction.brake_min_frames},
                     {"follow_min_frames", extraction.follow_min_frames},
                     {"motion_speed_min", extraction.motion_speed_min},
                     {"straight_yaw_max", extraction.straight_yaw_max},
                     {"uturn_yaw_min", extraction.uturn_yaw_min}};
  j["dataset"] = dataset;
  j["retrieval"] = {{"k", generation.top_k}};
  const auto& b = generation.backend;
  j["backend"] = {{"mode", b.mode == BackendConfig::Mode::kReplay ? "replay" : "http"},
                  {"endpoint", b.endpoint},
                  {"model", b.model},
                  {"temperature", b.temperature},
                  {"sample_count", b.sample_count},
                  {"timeout_seconds", b.timeout_seconds},
                  {"replay_dir", b.replay_dir}};
  j["voting"] = {{"mode", to_string(generation.voting)}, {"theta", generation.theta}};
  j["generation"] = {{"judge", generation.judge},
                     {"repair_attempts", repair_attempts},
                     {"few_shots", generation.few_shots.size()}};
  j["sim"] = {{"dt", sim.dt},
              {"horizon", sim.horizon},
              {"v_max", sim.v_max},
              {"accel_command", sim.accel_command},
              {"emergency_decel", sim.emergency_decel},
              {"accel_limit", sim.accel_limit},
              {"decel_limit", sim.decel_limit},
              {"lane_change_duration", sim.lane_change_duration},
              {"max_steer", sim.max_steer},
              {"spawn_jitter_s", sim.spawn_jitter_s},
              {"spawn_jitter_v", sim.spawn_jitter_v},
              {"offroad_margin", sim.offroad_margin},
              {"lane_half_width", sim.lane_half_width},
              {"idm",
               {{"v0", sim.idm.v0},
                {"time_headway", sim.idm.time_headway},
                {"s0", sim.idm.s0},
                {"a_max", sim.idm.a_max},
                {"b", sim.idm.b}}}};
  const auto& p = train.ppo;
  j["ppo"] = {{"learning_rate", p.learning_rate},
              {"rollout_length", p.rollout_length},
              {"minibatch", p.minibatch},
              {"clip", p.clip},
              {"gamma", p.gamma},
              {"lambda", p.lambda},
              {"entropy_coef", p.entropy_coef},
              {"value_coef", p.value_coef},
              {"epochs", p.epochs},
              {"reset_interval", p.reset_interval},
              {"reset_scope", p.reset_scope == ResetScope::kFull ? "full" : "output"},
              {"max_grad_norm", p.max_grad_norm},
              {"hidden", p.hidden},
              {"normalize_advantages", p.normalize_advantages}};
  j["train"] = {{"total_steps", train.total_steps},
                {"num_envs", train.num_envs},
                {"reset_enabled", train.reset_enabled},
                {"reset_ego", train.reset_ego},
                {"stats_path", train.stats_path}};
  const auto& r = train.rewards;
  j["rewards"] = {{"ego_collision", r.ego_collision},
                  {"ego_goal", r.ego_goal},
                  {"ego_emergency_brake", r.ego_emergency_brake},
                  {"ego_smoothness", r.ego_smoothness},
                  {"ego_step", r.ego_step},
                  {"charge_remaining_steps", r.charge_remaining_steps},
                  {"adv_collision", r.adv_collision},
                  {"adv_ego_emergency_brake", r.adv_ego_emergency_brake},
                  {"adv_violation", r.adv_violation},
                  {"adv_step", r.adv_step}};
  j["seeds"] = {{"master", seeds.master}, {"train", seeds.train}, {"eval", seeds.eval}};
  j["evaluate"] = {{"episodes", eval.episodes},
                   {"workers", eval.workers},
                   {"ttc_bins", eval.bins.ttc},
                   {"pet_bins", eval.bins.pet}};
  j["loop"] = {{"rounds", loop.rounds},
               {"query", loop.query},
               {"adversary_steps", loop.adversary_steps},
               {"ego_steps", loop.ego_steps},
               {"episodes", loop.episodes}};
  return j.dump(2);
}

}  // namespace scenforge

#include <algorithm>
#include <atomic>
#include <nlohmann/json.hpp>
#include <mutex>
#include <thread>

#include "scenforge/sim.hpp"

namespace scenforge {

std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::kCollision: return "collision";
    case EventKind::kLaneChange: return "lane_change";
    case EventKind::kEmergencyBrake: return "emergency_brake";
    case EventKind::kBehavior: return "behavior";
    case EventKind::kViolation: return "violation";
  }
  return "?";
}

namespace {

EventKind parse_event_kind(std::string_view text) {
  for (auto k : {EventKind::kCollision, EventKind::kLaneChange, EventKind::kEmergencyBrake,
                 EventKind::kBehavior, EventKind::kViolation})
    if (to_string(k) == text) return k;
  throw DataError("unknown event kind '" + std::string(text) + "'");
}

}  // namespace

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::kNone: return "none";
    case Termination::kCollision: return "collision";
    case Termination::kTimeout: return "timeout";
    case Termination::kGoal: return "goal";
  }
  return "?";
}

Termination parse_termination(std::string_view text) {
  for (auto t : {Termination::kNone, Termination::kCollision, Termination::kTimeout, Termination::kGoal})
    if (to_string(t) == text) return t;
  throw DataError("unknown termination '" + std::string(text) + "'");
}

bool EpisodeLog::ego_collided(std::string_view ego_id) const {
  if (termination != Termination::kCollision) return false;
  for (const auto& e : events)
    if (e.kind == EventKind::kCollision &&
        std::find(e.vehicles.begin(), e.vehicles.end(), ego_id) != e.vehicles.end())
      return true;
  return false;
}

std::size_t EpisodeLog::count(EventKind kind) const {
  return static_cast<std::size_t>(
      std::count_if(events.begin(), events.end(), [&](const auto& e) { return e.kind == kind; }));
}

std::string episode_to_json(const EpisodeLog& log) {
  nlohmann::ordered_json j;
  j["seed"] = log.seed;
  j["termination"] = to_string(log.termination);
  j["steps"] = log.steps;
  j["vehicles"] = nlohmann::ordered_json::array();
  for (const auto& v : log.vehicles)
    j["vehicles"].push_back({{"id", v.id}, {"role", v.role}, {"length", v.length}, {"width", v.width}});
  j["events"] = nlohmann::ordered_json::array();
  for (const auto& e : log.events) {
    nlohmann::ordered_json ev;
    ev["step"] = e.step;
    ev["kind"] = to_string(e.kind);
    ev["vehicles"] = e.vehicles;
    if (!e.detail.empty()) ev["detail"] = e.detail;
    j["events"].push_back(std::move(ev));
  }
  j["frames"] = nlohmann::ordered_json::array();
  for (const auto& frame : log.frames) {
    nlohmann::ordered_json f = nlohmann::ordered_json::array();
    for (const auto& v : frame) f.push_back({v.x, v.y, v.heading, v.speed});
    j["frames"].push_back(std::move(f));
  }
  return j.dump();
}

EpisodeLog episode_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    EpisodeLog log;
    log.seed = j.at("seed").get<std::uint64_t>();
    log.termination = parse_termination(j.at("termination").get<std::string>());
    log.steps = j.at("steps").get<int>();
    for (const auto& v : j.at("vehicles"))
      log.vehicles.push_back({v.at("id").get<std::string>(), v.at("role").get<std::string>(),
                              v.at("length").get<double>(), v.at("width").get<double>()});
    for (const auto& e : j.at("events")) {
      SimEvent ev;
      ev.step = e.at("step").get<int>();
      ev.kind = parse_event_kind(e.at("kind").get<std::string>());
      ev.vehicles = e.at("vehicles").get<std::vector<std::string>>();
      if (e.contains("detail")) ev.detail = e["detail"].get<std::string>();
      log.events.push_back(std::move(ev));
    }
    for (const auto& f : j.at("frames")) {
      std::vector<VehicleFrame> frame;
      for (const auto& v : f)
        frame.push_back({v.at(0).get<double>(), v.at(1).get<double>(), v.at(2).get<double>(),
                         v.at(3).get<double>()});
      log.frames.push_back(std::move(frame));
    }
    return log;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed episode log: ") + e.what());
  }
}

EpisodeLog run_episode(const ScenarioProgram& program, const PolicyMap& policies,
                       std::uint64_t seed) {
  for (const auto& slot : program.policy_slots()) {
    auto it = policies.find(slot);
    if (it == policies.end() || !it->second)
      throw ConfigError("policy slot '" + slot + "' is not bound");
  }
  Simulation sim(program, seed);
  Rng rng(derive_seed(seed, 1));
  std::map<std::string, PolicyAction> actions;
  while (!sim.done()) {
    actions.clear();
    for (const auto& [slot, idx] : sim.slots())
      actions[slot] = policies.at(slot)->act(sim.observe_slot(slot), rng);
    sim.step(actions);
  }
  return sim.log();
}

std::vector<EpisodeLog> run_episodes(const ScenarioProgram& program, const PolicyMap& policies,
                                     std::uint64_t master_seed, std::size_t count,
                                     std::size_t workers) {
  std::vector<EpisodeLog> logs(count);
  workers = std::max<std::size_t>(1, std::min(workers, count));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        logs[i] = run_episode(program, policies, derive_seed(master_seed, i));
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return logs;
}

}  // namespace scenforge

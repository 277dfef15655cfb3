#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>

#include "scenforge/rl.hpp"

namespace scenforge {

PolicyAction MlpPolicy::act(std::span<const double> observation, Rng& rng) const {
  Eigen::MatrixXd x = Eigen::Map<const Eigen::VectorXd>(observation.data(),
                                                        static_cast<Eigen::Index>(observation.size()));
  const Eigen::VectorXd logits = params_->policy.forward(x).col(0);
  Eigen::Index best = 0;
  if (deterministic_) {
    logits.maxCoeff(&best);
    return static_cast<PolicyAction>(best);
  }
  const Eigen::VectorXd p = log_softmax(logits).array().exp();
  std::discrete_distribution<int> dist(p.data(), p.data() + p.size());
  return static_cast<PolicyAction>(dist(rng));
}

double commanded_accel(PolicyAction a, const SimParams& p) {
  switch (a) {
    case PolicyAction::kFaster: return p.accel_command;
    case PolicyAction::kSlower: return -p.accel_command;
    case PolicyAction::kEmergencyBrake: return -p.emergency_decel;
    default: return 0.0;
  }
}

namespace {

bool involves(const SimEvent& e, const std::string& id) {
  return std::find(e.vehicles.begin(), e.vehicles.end(), id) != e.vehicles.end();
}

double adversarial_event_reward(const SimEvent& e, const std::string& ego_id,
                                const std::string& adversary_id, const RewardConfig& cfg) {
  switch (e.kind) {
    case EventKind::kCollision:
      return involves(e, ego_id) && involves(e, adversary_id) ? cfg.adv_collision : 0.0;
    case EventKind::kEmergencyBrake: return involves(e, ego_id) ? cfg.adv_ego_emergency_brake : 0.0;
    case EventKind::kViolation: return involves(e, adversary_id) ? cfg.adv_violation : 0.0;
    default: return 0.0;
  }
}

}  // namespace

double ego_step_reward(const StepOutcome& outcome, const std::string& ego_id, PolicyAction previous,
                       PolicyAction current, int step, int horizon, const SimParams& sim,
                       const RewardConfig& cfg) {
  double r = cfg.ego_step;
  r += cfg.ego_smoothness * std::abs(commanded_accel(current, sim) - commanded_accel(previous, sim)) /
       sim.emergency_decel;
  bool collided = false;
  for (const auto& e : outcome.events) {
    if (e.kind == EventKind::kEmergencyBrake && involves(e, ego_id)) r += cfg.ego_emergency_brake;
    if (e.kind == EventKind::kCollision && involves(e, ego_id)) collided = true;
  }
  if (collided) {
    r += cfg.ego_collision;
    if (cfg.charge_remaining_steps) r += cfg.ego_step * std::max(0, horizon - step);
  }
  if (outcome.termination == Termination::kGoal) r += cfg.ego_goal;
  return r;
}

double adversarial_step_reward(const StepOutcome& outcome, const std::string& ego_id,
                               const std::string& adversary_id, const RewardConfig& cfg) {
  double r = cfg.adv_step;
  bool hit = false;
  for (const auto& e : outcome.events) {
    if (e.kind == EventKind::kCollision) {
      // several overlapping pairs in one step still count as one collision
      if (!hit) {
        const double c = adversarial_event_reward(e, ego_id, adversary_id, cfg);
        hit = c != 0.0;
        r += c;
      }
      continue;
    }
    r += adversarial_event_reward(e, ego_id, adversary_id, cfg);
  }
  return r;
}

double adversarial_episode_reward(const EpisodeLog& log, const std::string& ego_id,
                                  const std::string& adversary_id, const RewardConfig& cfg) {
  std::map<int, StepOutcome> by_step;
  for (const auto& e : log.events) by_step[e.step].events.push_back(e);
  double total = cfg.adv_step * log.steps;
  for (const auto& [step, outcome] : by_step)
    total += adversarial_step_reward(outcome, ego_id, adversary_id, cfg) - cfg.adv_step;
  return total;
}

std::string stats_to_csv(const std::vector<TrainRecord>& history) {
  std::ostringstream out;
  out << "step,mean_reward,collision_rate,entropy\n";
  for (const auto& r : history)
    out << r.step << ',' << format_number(r.mean_reward) << ',' << format_number(r.collision_rate) << ','
        << format_number(r.entropy) << '\n';
  return out.str();
}

double collision_rate(const ScenarioProgram& program, const PolicyMap& policies, std::size_t episodes,
                      std::uint64_t seed, std::size_t workers) {
  if (episodes == 0) throw ArgumentError("collision_rate needs at least one episode");
  const auto logs = run_episodes(program, policies, seed, episodes, workers);
  const std::string& ego = program.initial.at(program.ego).id;
  std::size_t hits = 0;
  for (const auto& log : logs) hits += log.ego_collided(ego) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(episodes);
}

namespace {

struct Env {
  const ScenarioProgram* program = nullptr;
  std::unique_ptr<Simulation> sim;
  Rng rng;
  std::uint64_t stream = 0;
  std::uint64_t episodes = 0;
  std::string ego_id;
  std::string adversary_id;
  double episode_return = 0.0;
  PolicyAction previous = PolicyAction::kIdle;

  // current rollout segment
  std::vector<Eigen::VectorXd> obs;
  std::vector<int> actions;
  std::vector<double> log_probs, values, rewards;
  std::vector<bool> dones;

  void restart() {
    sim = std::make_unique<Simulation>(*program, derive_seed(stream, episodes++));
    episode_return = 0.0;
    previous = PolicyAction::kIdle;
  }
  void clear_segment() {
    obs.clear();
    actions.clear();
    log_probs.clear();
    values.clear();
    rewards.clear();
    dones.clear();
  }
};

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

enum class Learner { kAdversary, kEgo };

TrainResult train_slot(const std::vector<ScenarioProgram>& programs, Learner learner,
                       const std::map<std::string, const PolicyParams*>& frozen, const TrainConfig& cfg,
                       std::uint64_t seed, bool reset_enabled) {
  cfg.ppo.validate();
  if (programs.empty()) throw ConfigError("training needs at least one scenario program");
  if (cfg.num_envs < 1) throw ConfigError("num_envs must be positive");
  if (cfg.total_steps < 0) throw ConfigError("total_steps must be non-negative");
  const std::string slot = learner == Learner::kAdversary ? kAdversarySlot : kEgoSlot;

  std::map<std::string, std::unique_ptr<MlpPolicy>> others;
  for (const auto& p : programs) {
    const auto slots = p.policy_slots();
    if (std::find(slots.begin(), slots.end(), slot) == slots.end())
      throw ConfigError("scenario '" + p.name + "' has no '" + slot + "' policy slot");
    for (const auto& s : slots) {
      if (s == slot || others.count(s)) continue;
      auto it = frozen.find(s);
      if (it == frozen.end() || !it->second)
        throw ConfigError("policy slot '" + s + "' of scenario '" + p.name + "' is not bound");
      others[s] = std::make_unique<MlpPolicy>(*it->second);
    }
  }

  const int obs_dim = static_cast<int>(Simulation::observation_size());
  Rng init_rng(derive_seed(seed, 0));
  Rng update_rng(derive_seed(seed, 2));
  TrainResult result;
  result.params = PolicyParams::create(obs_dim, cfg.ppo.hidden, kNumActions, init_rng);
  PolicyParams& params = result.params;
  Adam adam(params.parameter_count(), cfg.ppo.learning_rate);

  std::vector<Env> envs(static_cast<std::size_t>(cfg.num_envs));
  for (std::size_t e = 0; e < envs.size(); ++e) {
    Env& env = envs[e];
    env.program = &programs[e % programs.size()];
    env.rng.seed(derive_seed(seed, 1000 + e));
    env.stream = derive_seed(seed, 100000 + e);
    env.ego_id = env.program->initial.at(env.program->ego).id;
    env.restart();
    if (learner == Learner::kAdversary) {
      const auto& idx = env.sim->slots().at(kAdversarySlot);
      env.adversary_id = env.program->initial.at(idx.front()).id;
    }
  }

  const int per_env = std::max(1, (cfg.ppo.rollout_length + cfg.num_envs - 1) / cfg.num_envs);
  std::optional<PolicyParams> best;
  double best_score = -std::numeric_limits<double>::infinity();
  double rollout_return = 0.0;
  int rollout_episodes = 0;
  int rollout_collisions = 0;
  long step = 0;
  int collected = 0;
  std::map<std::string, PolicyAction> actions;

  auto observe_all = [&] {
    Eigen::MatrixXd x(obs_dim, static_cast<Eigen::Index>(envs.size()));
    for (std::size_t e = 0; e < envs.size(); ++e) x.col(static_cast<Eigen::Index>(e)) = to_vector(envs[e].sim->observe_slot(slot));
    return x;
  };
  auto clear_rollout = [&] {
    for (auto& env : envs) env.clear_segment();
    collected = 0;
    rollout_return = 0.0;
    rollout_episodes = rollout_collisions = 0;
  };

  while (step < cfg.total_steps) {
    const Eigen::MatrixXd x = observe_all();
    const Eigen::MatrixXd logits = params.policy.forward(x);
    const Eigen::MatrixXd values = params.value.forward(x);
    for (std::size_t e = 0; e < envs.size(); ++e) {
      Env& env = envs[e];
      const auto col = static_cast<Eigen::Index>(e);
      const Eigen::VectorXd lp = log_softmax(logits.col(col));
      const Eigen::VectorXd p = lp.array().exp();
      std::discrete_distribution<int> dist(p.data(), p.data() + p.size());
      const int a = dist(env.rng);

      actions.clear();
      actions[slot] = static_cast<PolicyAction>(a);
      for (const auto& [s, idx] : env.sim->slots())
        if (s != slot) actions[s] = others.at(s)->act(env.sim->observe_slot(s), env.rng);
      const StepOutcome out = env.sim->step(actions);

      double r;
      if (learner == Learner::kEgo) {
        r = ego_step_reward(out, env.ego_id, env.previous, static_cast<PolicyAction>(a),
                            env.sim->step_count(), env.program->params.horizon, env.program->params,
                            cfg.rewards);
      } else {
        r = adversarial_step_reward(out, env.ego_id, env.adversary_id, cfg.rewards);
      }
      env.previous = static_cast<PolicyAction>(a);
      env.episode_return += r;
      env.obs.push_back(x.col(col));
      env.actions.push_back(a);
      env.log_probs.push_back(lp(a));
      env.values.push_back(values(0, col));
      env.rewards.push_back(r);
      env.dones.push_back(env.sim->done());
      if (env.sim->done()) {
        rollout_return += env.episode_return;
        ++rollout_episodes;
        if (env.sim->log().ego_collided(env.ego_id)) ++rollout_collisions;
        env.restart();
      }
    }
    const long before = step;
    step += static_cast<long>(envs.size());
    ++collected;

    if (reset_enabled && step / cfg.ppo.reset_interval != before / cfg.ppo.reset_interval) {
      Rng reset_rng(derive_seed(seed, 500000 + static_cast<std::uint64_t>(result.resets)));
      reset_weights(params, reset_rng, cfg.ppo.reset_scope);
      adam.reset();
      ++result.resets;
      for (auto& env : envs) env.restart();
      clear_rollout();
      continue;
    }

    if (collected < per_env && step < cfg.total_steps) continue;
    if (collected * static_cast<int>(envs.size()) < cfg.ppo.minibatch) break;

    const Eigen::MatrixXd boot = params.value.forward(observe_all());
    Batch batch;
    const auto n = static_cast<Eigen::Index>(collected) * static_cast<Eigen::Index>(envs.size());
    batch.observations.resize(obs_dim, n);
    Eigen::Index k = 0;
    for (std::size_t e = 0; e < envs.size(); ++e) {
      Env& env = envs[e];
      std::vector<double> v = env.values;
      v.push_back(boot(0, static_cast<Eigen::Index>(e)));
      // std::vector<bool> is not contiguous
      auto dn = std::make_unique<bool[]>(env.dones.size());
      std::copy(env.dones.begin(), env.dones.end(), dn.get());
      const auto g = gae(env.rewards, v, cfg.ppo.gamma, cfg.ppo.lambda,
                         std::span<const bool>(dn.get(), env.dones.size()));
      for (std::size_t t = 0; t < env.actions.size(); ++t, ++k) {
        batch.observations.col(k) = env.obs[t];
        batch.actions.push_back(env.actions[t]);
        batch.old_log_probs.push_back(env.log_probs[t]);
        batch.advantages.push_back(g.advantages[t]);
        batch.returns.push_back(g.returns[t]);
      }
    }

    if (rollout_episodes > 0) {
      const double mean = rollout_return / rollout_episodes;
      if (mean > best_score) {
        best_score = mean;
        best = params;
      }
    }
    const UpdateStats stats = ppo_update(params, adam, std::move(batch), cfg.ppo, update_rng);
    TrainRecord rec;
    rec.step = step;
    rec.mean_reward = rollout_episodes > 0 ? rollout_return / rollout_episodes
                                           : (result.history.empty() ? 0.0 : result.history.back().mean_reward);
    rec.collision_rate = rollout_episodes > 0 ? static_cast<double>(rollout_collisions) / rollout_episodes
                                              : (result.history.empty() ? 0.0 : result.history.back().collision_rate);
    rec.entropy = stats.entropy;
    result.history.push_back(rec);
    clear_rollout();
  }
  result.steps = step;
  if (result.resets > 0 && best) result.params = std::move(*best);

  if (!cfg.stats_path.empty()) {
    std::ofstream f(cfg.stats_path);
    if (!f) throw ConfigError("cannot write training stats to '" + cfg.stats_path + "'");
    f << stats_to_csv(result.history);
  }
  return result;
}

}  // namespace

TrainResult train_adversarial(const std::vector<ScenarioProgram>& programs, const TrainConfig& cfg,
                              std::uint64_t seed, const PolicyParams* frozen_ego) {
  std::map<std::string, const PolicyParams*> frozen;
  if (frozen_ego) frozen[kEgoSlot] = frozen_ego;
  return train_slot(programs, Learner::kAdversary, frozen, cfg, seed, cfg.reset_enabled);
}

TrainResult train_ego(const std::vector<ScenarioProgram>& programs, const PolicyParams* frozen_adversary,
                      const TrainConfig& cfg, std::uint64_t seed) {
  std::map<std::string, const PolicyParams*> frozen;
  if (frozen_adversary) frozen[kAdversarySlot] = frozen_adversary;
  return train_slot(programs, Learner::kEgo, frozen, cfg, seed, cfg.reset_ego);
}

}  // namespace scenforge

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scenforge/sim.hpp"

namespace scenforge {

struct DenseLayer {
  Eigen::MatrixXd w;  // out x in
  Eigen::VectorXd b;
};

/// Fully connected network with ReLU hidden layers and a linear output.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<int> sizes, double output_scale, Rng& rng);

  struct Cache {
    std::vector<Eigen::MatrixXd> inputs;  // input of each layer (pre-ReLU values are recomputed)
    std::vector<Eigen::MatrixXd> pre;     // pre-activation of each layer
  };

  /// Columns are samples.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Cache* cache = nullptr) const;
  /// Accumulates parameter gradients for dLoss/dOutput into `grads`.
  void backward(const Cache& cache, const Eigen::MatrixXd& d_out, std::vector<DenseLayer>& grads) const;

  void initialize(Rng& rng);
  void initialize_layer(std::size_t layer, Rng& rng);
  std::vector<DenseLayer> zero_like() const;
  std::size_t parameter_count() const;
  void flatten(std::vector<double>& out) const;
  void unflatten(std::span<const double> in, std::size_t& offset);
  static void flatten(const std::vector<DenseLayer>& layers, std::vector<double>& out);

  const std::vector<int>& sizes() const { return sizes_; }
  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  bool operator==(const Mlp& o) const;

 private:
  std::vector<int> sizes_;
  double output_scale_ = 1.0;
  std::vector<DenseLayer> layers_;
};

/// Separate policy (action logits) and value networks.
struct PolicyParams {
  Mlp policy;
  Mlp value;

  static PolicyParams create(int observation_size, int hidden, int actions, Rng& rng);
  std::size_t parameter_count() const { return policy.parameter_count() + value.parameter_count(); }
  std::vector<double> flat() const;
  void set_flat(std::span<const double> values);
  bool operator==(const PolicyParams& o) const { return policy == o.policy && value == o.value; }
};

enum class ResetScope { kFull, kOutputLayers };

/// Re-draws weights from the initializer; kOutputLayers touches only the last
/// layer of each network.
void reset_weights(PolicyParams& params, Rng& rng, ResetScope scope = ResetScope::kFull);

std::string checkpoint_to_json(const PolicyParams& params);
PolicyParams checkpoint_from_json(std::string_view text);

struct PpoConfig {
  double learning_rate = 3e-4;
  int rollout_length = 2048;
  int minibatch = 256;
  double clip = 0.2;
  double gamma = 0.99;
  double lambda = 0.95;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  int epochs = 4;
  long reset_interval = 5000;
  ResetScope reset_scope = ResetScope::kFull;
  double max_grad_norm = 0.5;
  int hidden = 256;
  bool normalize_advantages = true;

  void validate() const;
};

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// values has one more entry than rewards (the bootstrap value).
/// dones[t] cuts the recursion after step t.
GaeResult gae(std::span<const double> rewards, std::span<const double> values, double gamma,
              double lambda, std::span<const bool> dones = {});

double ppo_surrogate(double ratio, double advantage, double clip);

/// Entropy of the softmax distribution over the logits.
double categorical_entropy(std::span<const double> logits);
Eigen::VectorXd log_softmax(const Eigen::VectorXd& logits);

struct Batch {
  Eigen::MatrixXd observations;  // obs_dim x N
  std::vector<int> actions;
  std::vector<double> old_log_probs;
  std::vector<double> advantages;
  std::vector<double> returns;

  std::size_t size() const { return actions.size(); }
};

struct LossTerms {
  double total = 0.0;
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
};

/// Loss = -surrogate + value_coef * MSE - entropy_coef * entropy, averaged
/// over the listed samples; gradients are written when requested.
LossTerms ppo_loss(const PolicyParams& params, const Batch& batch, std::span<const std::size_t> idx,
                   const PpoConfig& cfg, std::vector<double>* gradient = nullptr);

class Adam {
 public:
  Adam(std::size_t n, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(std::vector<double>& params, const std::vector<double>& grad);
  void reset();

 private:
  double lr_, b1_, b2_, eps_;
  long t_ = 0;
  std::vector<double> m_, v_;
};

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
};

UpdateStats ppo_update(PolicyParams& params, Adam& optimizer, Batch batch, const PpoConfig& cfg,
                       Rng& rng);

/// True when the step counter sits on a positive multiple of the interval.
bool reset_due(long step, long interval);

/// Samples from (or takes the argmax of) the policy network.
class MlpPolicy : public Policy {
 public:
  explicit MlpPolicy(const PolicyParams& params, bool deterministic = false)
      : params_(&params), deterministic_(deterministic) {}
  PolicyAction act(std::span<const double> observation, Rng& rng) const override;

 private:
  const PolicyParams* params_;
  bool deterministic_;
};

struct RewardConfig {
  double ego_collision = -1.0;
  double ego_goal = 1.0;
  double ego_emergency_brake = -0.1;
  double ego_smoothness = -0.05;  // times |change in commanded acceleration| / 6
  double ego_step = -0.01;
  bool charge_remaining_steps = true;  // a collision also pays the step cost of the unused horizon

  double adv_collision = 1.0;
  double adv_ego_emergency_brake = 0.2;
  double adv_violation = -0.5;
  double adv_step = -0.01;
};

/// Commanded acceleration of a discrete action, used by the smoothness term.
double commanded_accel(PolicyAction a, const SimParams& p);

double ego_step_reward(const StepOutcome& outcome, const std::string& ego_id, PolicyAction previous,
                       PolicyAction current, int step, int horizon, const SimParams& sim,
                       const RewardConfig& cfg);
double adversarial_step_reward(const StepOutcome& outcome, const std::string& ego_id,
                               const std::string& adversary_id, const RewardConfig& cfg);
/// Sum of adversarial step rewards reconstructed from a log's events.
double adversarial_episode_reward(const EpisodeLog& log, const std::string& ego_id,
                                  const std::string& adversary_id, const RewardConfig& cfg);

struct TrainConfig {
  PpoConfig ppo;
  RewardConfig rewards;
  long total_steps = 100000;
  int num_envs = 8;
  bool reset_enabled = true;  // Phase I
  bool reset_ego = false;     // Phase II
  std::string stats_path;     // CSV of per-update statistics when non-empty
};

struct TrainRecord {
  long step = 0;
  double mean_reward = 0.0;
  double collision_rate = 0.0;
  double entropy = 0.0;
};

struct TrainResult {
  PolicyParams params;
  std::vector<TrainRecord> history;
  long steps = 0;
  int resets = 0;
};

std::string stats_to_csv(const std::vector<TrainRecord>& history);

/// Phase I: the adversary slot "adv" is learned; the ego follows its own
/// controller or the optional frozen policy.
TrainResult train_adversarial(const std::vector<ScenarioProgram>& programs, const TrainConfig& cfg,
                              std::uint64_t seed, const PolicyParams* frozen_ego = nullptr);

/// Phase II: the ego slot "ego" is learned against the frozen adversary.
TrainResult train_ego(const std::vector<ScenarioProgram>& programs, const PolicyParams* frozen_adversary,
                      const TrainConfig& cfg, std::uint64_t seed);

inline constexpr const char* kEgoSlot = "ego";
inline constexpr const char* kAdversarySlot = "adv";

/// Fraction of `episodes` runs in which the ego is in a collision.
double collision_rate(const ScenarioProgram& program, const PolicyMap& policies, std::size_t episodes,
                      std::uint64_t seed, std::size_t workers = 1);

}  // namespace scenforge

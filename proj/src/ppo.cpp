#include <algorithm>
#include <cmath>
#include <numeric>

#include "scenforge/rl.hpp"

namespace scenforge {

void PpoConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in (0, 1]");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must lie in [0, 1]");
  if (!(clip > 0.0)) throw ConfigError("clip must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (rollout_length < 1 || minibatch < 1 || epochs < 1 || hidden < 1)
    throw ConfigError("rollout_length, minibatch, epochs and hidden must be positive");
  if (minibatch > rollout_length) throw ConfigError("minibatch exceeds rollout_length");
  if (reset_interval < 1) throw ConfigError("reset_interval must be positive");
}

GaeResult gae(std::span<const double> rewards, std::span<const double> values, double gamma,
              double lambda, std::span<const bool> dones) {
  const std::size_t n = rewards.size();
  if (values.size() != n + 1)
    throw ArgumentError("gae needs " + std::to_string(n + 1) + " values, got " +
                        std::to_string(values.size()));
  if (!dones.empty() && dones.size() != n) throw ArgumentError("gae dones length mismatch");
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double next = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double keep = !dones.empty() && dones[t] ? 0.0 : 1.0;
    const double delta = rewards[t] + gamma * values[t + 1] * keep - values[t];
    next = delta + gamma * lambda * keep * next;
    out.advantages[t] = next;
    out.returns[t] = next + values[t];
  }
  return out;
}

double ppo_surrogate(double ratio, double advantage, double clip) {
  return std::min(ratio * advantage, std::clamp(ratio, 1.0 - clip, 1.0 + clip) * advantage);
}

Eigen::VectorXd log_softmax(const Eigen::VectorXd& logits) {
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return logits.array() - lse;
}

double categorical_entropy(std::span<const double> logits) {
  Eigen::VectorXd l = Eigen::Map<const Eigen::VectorXd>(logits.data(), static_cast<Eigen::Index>(logits.size()));
  const Eigen::VectorXd lp = log_softmax(l);
  return -(lp.array().exp() * lp.array()).sum();
}

LossTerms ppo_loss(const PolicyParams& params, const Batch& batch, std::span<const std::size_t> idx,
                   const PpoConfig& cfg, std::vector<double>* gradient) {
  const auto n = static_cast<Eigen::Index>(idx.size());
  if (n == 0) throw ArgumentError("ppo_loss on an empty minibatch");
  Eigen::MatrixXd obs(batch.observations.rows(), n);
  for (Eigen::Index k = 0; k < n; ++k) obs.col(k) = batch.observations.col(static_cast<Eigen::Index>(idx[k]));

  Mlp::Cache pc, vc;
  const Eigen::MatrixXd logits = params.policy.forward(obs, gradient ? &pc : nullptr);
  const Eigen::MatrixXd values = params.value.forward(obs, gradient ? &vc : nullptr);

  Eigen::MatrixXd d_logits = Eigen::MatrixXd::Zero(logits.rows(), n);
  Eigen::MatrixXd d_values(1, n);
  LossTerms t;
  const double inv = 1.0 / static_cast<double>(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const std::size_t i = idx[k];
    const Eigen::VectorXd lp = log_softmax(logits.col(k));
    const Eigen::VectorXd p = lp.array().exp();
    const int a = batch.actions[i];
    const double adv = batch.advantages[i];
    const double log_ratio = lp(a) - batch.old_log_probs[i];
    const double ratio = std::exp(log_ratio);
    const double surr = ppo_surrogate(ratio, adv, cfg.clip);
    const double entropy = -(p.array() * lp.array()).sum();
    const double err = values(0, k) - batch.returns[i];

    t.policy -= surr * inv;
    t.value += err * err * inv;
    t.entropy += entropy * inv;
    t.approx_kl += ((ratio - 1.0) - log_ratio) * inv;
    if (std::abs(ratio - 1.0) > cfg.clip) t.clip_fraction += inv;

    if (!gradient) continue;
    const bool clipped = (adv >= 0.0 && ratio > 1.0 + cfg.clip) || (adv < 0.0 && ratio < 1.0 - cfg.clip);
    if (!clipped) {
      // d(ratio * adv)/d logits = ratio * adv * (onehot - p)
      const double g = -ratio * adv * inv;
      d_logits.col(k) -= g * p;
      d_logits(a, k) += g;
    }
    // dH/dz_j = -p_j (log p_j + H)
    d_logits.col(k).array() += cfg.entropy_coef * inv * p.array() * (lp.array() + entropy);
    d_values(0, k) = cfg.value_coef * 2.0 * err * inv;
  }
  t.total = t.policy + cfg.value_coef * t.value - cfg.entropy_coef * t.entropy;
  if (!std::isfinite(t.total))
    throw TrainingError("non-finite loss (policy " + std::to_string(t.policy) + ", value " +
                        std::to_string(t.value) + ", entropy " + std::to_string(t.entropy) + ")");

  if (gradient) {
    auto gp = params.policy.zero_like();
    auto gv = params.value.zero_like();
    params.policy.backward(pc, d_logits, gp);
    params.value.backward(vc, d_values, gv);
    gradient->clear();
    gradient->reserve(params.parameter_count());
    Mlp::flatten(gp, *gradient);
    Mlp::flatten(gv, *gradient);
  }
  return t;
}

Adam::Adam(std::size_t n, double lr, double beta1, double beta2, double eps)
    : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

void Adam::step(std::vector<double>& params, const std::vector<double>& grad) {
  if (params.size() != m_.size() || grad.size() != m_.size())
    throw ArgumentError("optimizer size mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = b1_ * m_[i] + (1.0 - b1_) * grad[i];
    v_[i] = b2_ * v_[i] + (1.0 - b2_) * grad[i] * grad[i];
    params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

void Adam::reset() {
  t_ = 0;
  std::fill(m_.begin(), m_.end(), 0.0);
  std::fill(v_.begin(), v_.end(), 0.0);
}

UpdateStats ppo_update(PolicyParams& params, Adam& optimizer, Batch batch, const PpoConfig& cfg,
                       Rng& rng) {
  const std::size_t n = batch.size();
  if (n < static_cast<std::size_t>(cfg.minibatch))
    throw ArgumentError("batch of " + std::to_string(n) + " is smaller than the minibatch");
  if (cfg.normalize_advantages && n > 1) {
    const double mean = std::accumulate(batch.advantages.begin(), batch.advantages.end(), 0.0) / n;
    double var = 0.0;
    for (double a : batch.advantages) var += (a - mean) * (a - mean);
    const double sd = std::sqrt(var / n);
    for (double& a : batch.advantages) a = (a - mean) / (sd + 1e-8);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> flat = params.flat();
  std::vector<double> grad;
  UpdateStats stats;
  int count = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start + cfg.minibatch <= n; start += cfg.minibatch) {
      std::span<const std::size_t> idx(order.data() + start, static_cast<std::size_t>(cfg.minibatch));
      const auto terms = ppo_loss(params, batch, idx, cfg, &grad);
      double norm = 0.0;
      for (double g : grad) norm += g * g;
      norm = std::sqrt(norm);
      if (!std::isfinite(norm)) throw TrainingError("non-finite gradient norm");
      if (cfg.max_grad_norm > 0.0 && norm > cfg.max_grad_norm)
        for (double& g : grad) g *= cfg.max_grad_norm / norm;
      optimizer.step(flat, grad);
      params.set_flat(flat);
      stats.policy_loss += terms.policy;
      stats.value_loss += terms.value;
      stats.entropy += terms.entropy;
      stats.approx_kl += terms.approx_kl;
      stats.clip_fraction += terms.clip_fraction;
      ++count;
    }
  }
  if (count > 0) {
    stats.policy_loss /= count;
    stats.value_loss /= count;
    stats.entropy /= count;
    stats.approx_kl /= count;
    stats.clip_fraction /= count;
  }
  return stats;
}

bool reset_due(long step, long interval) { return interval > 0 && step > 0 && step % interval == 0; }

}  // namespace scenforge

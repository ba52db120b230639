#include "morl/rl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "morl/errors.hpp"

namespace morl {
namespace {

constexpr std::uint64_t kMinibatchShuffleKey = 0x70706f5f73677261ULL;

// Deterministic Fisher-Yates keyed on the epoch; pure in (n, epoch).
std::vector<int> shuffled_rows(int n, int epoch) {
  std::vector<int> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  RngStream rng = RngStream(kMinibatchShuffleKey).child(static_cast<std::uint64_t>(epoch));
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(i) + 1));
    std::swap(rows[i], rows[j]);
  }
  return rows;
}

}  // namespace

std::vector<int> kl_guard_rows(int n) {
  constexpr int kMaxRows = 256;
  std::vector<int> rows;
  if (n <= kMaxRows) {
    rows.resize(n);
    std::iota(rows.begin(), rows.end(), 0);
    return rows;
  }
  rows.reserve(kMaxRows);
  for (int k = 0; k < kMaxRows; ++k)
    rows.push_back(static_cast<int>((static_cast<std::int64_t>(k) * n) / kMaxRows));
  return rows;
}

double mean_kl_to_behavior(const PolicyParams& policy, const SurrogateBatch& batch,
                           std::span<const int> rows) {
  double kl = 0.0;
  for (int r : rows) {
    const Eigen::VectorXd state = batch.states.row(r);
    kl += gaussian_kl_from_moments(batch.old_means.row(r), batch.old_log_std,
                                   mlp_forward(policy.mlp, state), policy.log_std);
  }
  return kl / static_cast<double>(rows.size());
}

int RolloutBatch::total_steps() const {
  int n = 0;
  for (const auto& t : trajectories) n += t.length();
  return n;
}

int RolloutBatch::num_objectives() const {
  for (const auto& t : trajectories)
    if (t.length() > 0) return static_cast<int>(t.rewards.front().size());
  return 0;
}

std::vector<Eigen::VectorXd> compute_returns(const Trajectory& traj, double gamma) {
  if (gamma < 0.0 || gamma > 1.0) throw InvalidInput("compute_returns: gamma outside [0,1]");
  const int len = traj.length();
  std::vector<Eigen::VectorXd> returns(len);
  Eigen::VectorXd acc;
  for (int t = len - 1; t >= 0; --t) {
    if (t == len - 1)
      acc = traj.rewards[t];
    else
      acc = traj.rewards[t] + gamma * acc;
    returns[t] = acc;
  }
  return returns;
}

void compute_batch_returns(RolloutBatch& batch) {
  batch.returns.clear();
  batch.returns.reserve(batch.trajectories.size());
  for (const auto& traj : batch.trajectories)
    batch.returns.push_back(compute_returns(traj, batch.gamma));
}

void compute_advantages(RolloutBatch& batch, const ValueParams& value) {
  if (!batch.has_returns()) throw InvalidInput("compute_advantages: returns not computed");
  const int q = batch.num_objectives();
  batch.advantages.assign(batch.trajectories.size(), {});

  Eigen::VectorXd sum = Eigen::VectorXd::Zero(q);
  Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(q);
  int n = 0;
  for (std::size_t i = 0; i < batch.trajectories.size(); ++i) {
    const Trajectory& traj = batch.trajectories[i];
    batch.advantages[i].resize(traj.length());
    for (int t = 0; t < traj.length(); ++t) {
      Eigen::VectorXd a = batch.returns[i][t] - mlp_forward(value.mlp, traj.states[t]);
      sum += a;
      sum_sq += a.cwiseProduct(a);
      batch.advantages[i][t] = std::move(a);
      ++n;
    }
  }
  if (n == 0) return;

  // Center per objective, then divide everything by one common scale (the
  // mean of the per-objective standard deviations). A per-objective scale
  // would silently reweight the objectives and move every scalarized
  // optimum; a common scale keeps the preference semantics intact while
  // still normalizing the magnitude the learn rates see.
  const Eigen::VectorXd mean = sum / n;
  const Eigen::VectorXd std_dev =
      (sum_sq / n - mean.cwiseProduct(mean)).cwiseMax(0.0).cwiseSqrt();
  double scale = std_dev.mean();
  if (scale < 1e-8) scale = 1.0;
  for (auto& per_traj : batch.advantages)
    for (auto& a : per_traj) a = (a - mean) / scale;
}

RolloutBatch collect_batch(const EnvSpec& spec, const PolicyParams& policy, int episodes,
                           double gamma, RngStream rng, EpisodeTally* tally) {
  if (episodes < 1) throw InvalidInput("collect_batch: need at least one episode");
  RolloutBatch batch;
  batch.gamma = gamma;
  batch.trajectories.reserve(episodes);
  for (int e = 0; e < episodes; ++e) {
    RngStream episode_stream = rng.child(static_cast<std::uint64_t>(e));
    batch.trajectories.push_back(rollout(spec, policy, episode_stream));
  }
  if (tally) tally->train += episodes;
  compute_batch_returns(batch);
  return batch;
}

SurrogateBatch make_surrogate_batch(const RolloutBatch& batch, const PolicyParams& behavior,
                                    const PreferenceVector& omega,
                                    const ScalarizationSpec& scal) {
  if (!batch.has_advantages()) throw InvalidInput("make_surrogate_batch: advantages not computed");
  const int q = batch.num_objectives();
  if (omega.size() != q) throw InvalidInput("make_surrogate_batch: preference length != q");

  const int n = batch.total_steps();
  SurrogateBatch sb;
  sb.states.resize(n, behavior.state_dim());
  sb.actions.resize(n, behavior.action_dim());
  sb.behavior_log_probs.resize(n);
  sb.scalarized.resize(n);
  sb.old_means.resize(n, behavior.action_dim());
  sb.old_log_std = behavior.log_std;
  sb.value_targets.resize(n, q);

  // Chebyshev measures gaps to a per-objective utopian point, so each
  // objective is normalized to unit batch spread first (the usual
  // ideal-point normalization); weighted sum keeps the common scale that
  // preserves the preference trade-off.
  Eigen::VectorXd cheb_scale = Eigen::VectorXd::Ones(q);
  Eigen::VectorXd utopian;
  if (scal.kind == ScalarizationKind::kChebyshev) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(q);
    Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(q);
    int count = 0;
    for (const auto& per_traj : batch.advantages)
      for (const auto& a : per_traj) {
        sum += a;
        sum_sq += a.cwiseProduct(a);
        ++count;
      }
    const Eigen::VectorXd mean = sum / count;
    cheb_scale = (sum_sq / count - mean.cwiseProduct(mean)).cwiseMax(0.0).cwiseSqrt();
    for (int k = 0; k < q; ++k)
      if (cheb_scale[k] < 1e-8) cheb_scale[k] = 1.0;

    if (scal.utopian == UtopianPolicy::kFixed) {
      if (scal.fixed_utopian.size() != q)
        throw InvalidInput("make_surrogate_batch: fixed utopian point has wrong length");
      utopian = scal.fixed_utopian;
    } else {
      utopian = Eigen::VectorXd::Constant(q, -std::numeric_limits<double>::infinity());
      for (const auto& per_traj : batch.advantages)
        for (const auto& a : per_traj) utopian = utopian.cwiseMax(a.cwiseQuotient(cheb_scale));
      utopian.array() += scal.margin;
    }
  }

  int row = 0;
  for (std::size_t i = 0; i < batch.trajectories.size(); ++i) {
    const Trajectory& traj = batch.trajectories[i];
    for (int t = 0; t < traj.length(); ++t, ++row) {
      sb.states.row(row) = traj.states[t];
      sb.actions.row(row) = traj.actions[t];
      sb.behavior_log_probs[row] = traj.behavior_log_probs[t];
      sb.old_means.row(row) = mlp_forward(behavior.mlp, traj.states[t]);
      sb.value_targets.row(row) = batch.returns[i][t];
      const Eigen::VectorXd& adv = batch.advantages[i][t];
      sb.scalarized[row] =
          scal.kind == ScalarizationKind::kWeightedSum
              ? weighted_sum(omega, adv)
              : chebyshev(scal, omega, adv.cwiseQuotient(cheb_scale), utopian);
    }
  }
  return sb;
}

double surrogate_objective(const PolicyParams& policy, const SurrogateBatch& batch,
                           std::span<const int> rows, const PpoConfig& cfg,
                           PolicyGradients* grad) {
  if (rows.empty()) throw InvalidInput("surrogate_objective: empty row set");
  if (grad) *grad = PolicyGradients::zeros_like(policy);

  const Eigen::ArrayXd inv_var = (-2.0 * policy.log_std.array()).exp();
  const double inv_n = 1.0 / static_cast<double>(rows.size());

  double total = 0.0;
  MlpTrace trace;
  for (int r : rows) {
    const Eigen::VectorXd state = batch.states.row(r);
    const Eigen::VectorXd action = batch.actions.row(r);
    const Eigen::VectorXd mean = mlp_forward(policy.mlp, state, trace);
    const Eigen::ArrayXd diff = (action - mean).array();

    const double log_prob = gaussian_log_prob_from_mean(mean, policy.log_std, action);
    const double ratio = std::exp(log_prob - batch.behavior_log_probs[r]);
    const double f = batch.scalarized[r];

    double objective = 0.0;
    double ratio_coeff = 0.0;  // d(objective)/d(log pi) = ratio_coeff
    if (cfg.loss_variant == LossVariant::kClip) {
      const double unclipped = ratio * f;
      const double clipped =
          std::clamp(ratio, 1.0 - cfg.clip_epsilon, 1.0 + cfg.clip_epsilon) * f;
      if (unclipped <= clipped) {
        objective = unclipped;
        ratio_coeff = ratio * f;
      } else {
        objective = clipped;
        const bool saturated =
            ratio < 1.0 - cfg.clip_epsilon || ratio > 1.0 + cfg.clip_epsilon;
        ratio_coeff = saturated ? 0.0 : ratio * f;
      }
    } else {
      const Eigen::VectorXd old_mean = batch.old_means.row(r);
      const double kl =
          gaussian_kl_from_moments(old_mean, batch.old_log_std, mean, policy.log_std);
      objective = ratio * f - cfg.kl_beta * kl;
      ratio_coeff = ratio * f;
      if (grad) {
        // KL(old || new) gradient w.r.t. the new policy.
        const Eigen::ArrayXd old_var = (2.0 * batch.old_log_std.array()).exp();
        const Eigen::ArrayXd mean_gap = (mean - old_mean).array();
        const Eigen::VectorXd dkl_dmean = mean_gap * inv_var;
        const Eigen::VectorXd dkl_dlogstd =
            1.0 - (old_var + mean_gap.square()) * inv_var;
        mlp_backward_accumulate(policy.mlp, trace,
                                (-cfg.kl_beta * inv_n) * dkl_dmean, grad->mlp);
        grad->log_std += (-cfg.kl_beta * inv_n) * dkl_dlogstd;
      }
    }
    total += objective;

    if (grad && ratio_coeff != 0.0) {
      // d(log pi)/d(mean) and /d(log_std) for the diagonal Gaussian.
      const Eigen::VectorXd dlp_dmean = diff * inv_var;
      const Eigen::VectorXd dlp_dlogstd = diff.square() * inv_var - 1.0;
      mlp_backward_accumulate(policy.mlp, trace, (ratio_coeff * inv_n) * dlp_dmean,
                              grad->mlp);
      grad->log_std += (ratio_coeff * inv_n) * dlp_dlogstd;
    }
  }
  return total * inv_n;
}

double value_objective(const ValueParams& value, const SurrogateBatch& batch,
                       std::span<const int> rows, MlpGradients* grad) {
  if (rows.empty()) throw InvalidInput("value_objective: empty row set");
  if (grad) *grad = MlpGradients::zeros_like(value.mlp);
  const double inv_n = 1.0 / static_cast<double>(rows.size());

  double total = 0.0;
  MlpTrace trace;
  for (int r : rows) {
    const Eigen::VectorXd state = batch.states.row(r);
    const Eigen::VectorXd residual =
        mlp_forward(value.mlp, state, trace) - batch.value_targets.row(r).transpose();
    total += residual.squaredNorm();
    if (grad)
      mlp_backward_accumulate(value.mlp, trace, (2.0 * inv_n) * residual, *grad);
  }
  return total * inv_n;
}

std::pair<PolicyParams, ValueParams> ppo_update(const PolicyParams& policy,
                                                const ValueParams& value,
                                                const RolloutBatch& batch,
                                                const PreferenceVector& omega,
                                                const ScalarizationSpec& scal,
                                                const PpoConfig& cfg, UpdateStats* stats) {
  const SurrogateBatch sb = make_surrogate_batch(batch, policy, omega, scal);
  const int n = sb.size();

  PolicyParams new_policy = policy;
  ValueParams new_value = value;
  PolicyGradients pgrad;
  MlpGradients vgrad;

  const int mb = std::max(1, cfg.minibatch_size);
  const std::vector<int> guard_rows = kl_guard_rows(n);
  bool policy_frozen = false;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::vector<int> order = shuffled_rows(n, epoch);
    for (int start = 0; start < n; start += mb) {
      std::vector<int> rows(order.begin() + start,
                            order.begin() + std::min(n, start + mb));
      // Ascending accumulation keeps the gradient independent of the shuffle
      // inside a minibatch (full-batch configs stay order-stable).
      std::sort(rows.begin(), rows.end());

      if (!policy_frozen) {
        const double objective = surrogate_objective(new_policy, sb, rows, cfg, &pgrad);
        if (!std::isfinite(objective) || !pgrad.all_finite()) {
          std::ostringstream diag;
          diag << "non-finite policy surrogate (epoch " << epoch << ", objective " << objective
               << ")";
          throw UpdateAborted(diag.str());
        }
        if (cfg.policy_learn_rate != 0.0) {
          // Backtrack the step until the cumulative KL to the behavior
          // policy fits the trust region; freeze once no step fits.
          const PolicyParams before_step = new_policy;
          double factor = 1.0;
          bool accepted = false;
          while (factor > 1.0 / 1024.0) {
            new_policy = before_step;
            apply_gradient(new_policy, pgrad, factor * cfg.policy_learn_rate);
            clamp_log_std(new_policy);
            if (mean_kl_to_behavior(new_policy, sb) <= kKlStopThreshold) {
              accepted = true;
              break;
            }
            factor *= 0.5;
          }
          if (!accepted) {
            new_policy = before_step;
            policy_frozen = true;
          }
        }
      }

      const double vloss = value_objective(new_value, sb, rows, &vgrad);
      if (!std::isfinite(vloss) || !vgrad.all_finite()) {
        std::ostringstream diag;
        diag << "non-finite value loss (epoch " << epoch << ", loss " << vloss << ")";
        throw UpdateAborted(diag.str());
      }
      apply_gradient(new_value.mlp, vgrad, -cfg.value_learn_rate);
    }
  }

  if (stats) {
    std::vector<int> all(n);
    std::iota(all.begin(), all.end(), 0);
    stats->surrogate = surrogate_objective(new_policy, sb, all, cfg, nullptr);
    stats->value_loss = value_objective(new_value, sb, all, nullptr);
    stats->mean_scalarized_advantage = sb.scalarized.mean();
    double kl = 0.0;
    for (int r = 0; r < n; ++r) {
      const Eigen::VectorXd state = sb.states.row(r);
      kl += gaussian_kl_from_moments(sb.old_means.row(r), sb.old_log_std,
                                     mlp_forward(new_policy.mlp, state), new_policy.log_std);
    }
    stats->mean_kl = kl / n;
  }
  return {std::move(new_policy), std::move(new_value)};
}

Eigen::VectorXd mean_action(const EnvSpec& spec, const PolicyParams& policy,
                            const Eigen::VectorXd& state) {
  return clip_action(spec, mlp_forward(policy.mlp, state));
}

Eigen::VectorXd evaluate_policy(const EnvSpec& spec, const PolicyParams& policy, int episodes,
                                double gamma, RngStream rng, EpisodeTally* tally) {
  if (episodes < 1) throw InvalidInput("evaluate_policy: need at least one episode");
  Eigen::VectorXd mean_return = Eigen::VectorXd::Zero(spec.num_objectives);
  for (int e = 0; e < episodes; ++e) {
    RngStream episode_stream = rng.child(static_cast<std::uint64_t>(e));
    EnvState s = env_reset(spec, episode_stream);
    double discount = 1.0;
    bool done = false;
    while (!done) {
      const Eigen::VectorXd action = mlp_forward(policy.mlp, s.x);
      StepResult step = env_step(spec, s, action);
      mean_return += discount * step.reward;
      discount *= gamma;
      s = std::move(step.next);
      done = step.done;
    }
  }
  if (tally) tally->eval += episodes;
  return mean_return / episodes;
}

}  // namespace morl

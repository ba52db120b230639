#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "morl/envs.hpp"
#include "morl/nnet.hpp"
#include "morl/rng.hpp"
#include "morl/scalarize.hpp"

namespace morl {

/// Counts every episode executed, split by purpose. Threaded through the
/// collection and evaluation paths so the harness manifest can cross-check
/// its closed-form budget arithmetic against what actually ran.
struct EpisodeTally {
  std::int64_t train = 0;
  std::int64_t eval = 0;

  std::int64_t total() const { return train + eval; }
};

/// Trajectories plus their per-step vector returns and (standardized)
/// vector advantages. Returns are computed before advantages.
struct RolloutBatch {
  std::vector<Trajectory> trajectories;
  std::vector<std::vector<Eigen::VectorXd>> returns;
  std::vector<std::vector<Eigen::VectorXd>> advantages;
  double gamma = 0.99;

  int total_steps() const;
  int num_objectives() const;
  bool has_returns() const { return !returns.empty(); }
  bool has_advantages() const { return !advantages.empty(); }
};

enum class LossVariant { kClip, kKlPenalty };

/// Updates stop ascending the policy once the mean KL to the behavior policy
/// crosses this, rolling back the crossing step. Keeps every update inside
/// the 0.15 trust region even when the action noise has collapsed.
inline constexpr double kKlStopThreshold = 0.1;

struct PpoConfig {
  LossVariant loss_variant = LossVariant::kClip;
  double clip_epsilon = 0.2;
  double kl_beta = 1.0;
  double policy_learn_rate = 3e-3;
  double value_learn_rate = 1e-2;
  int epochs = 5;
  int minibatch_size = 64;
  int episodes_per_iteration = 16;
};

/// R_t = r_t + gamma * R_{t+1}, componentwise, R_len = 0.
std::vector<Eigen::VectorXd> compute_returns(const Trajectory& traj, double gamma);

/// Fill batch.returns for every trajectory using batch.gamma.
void compute_batch_returns(RolloutBatch& batch);

/// A_t = R_t - V(s_t), then per-objective standardization across the whole
/// batch (zero mean, unit variance; sigma below 1e-8 divides by 1).
void compute_advantages(RolloutBatch& batch, const ValueParams& value);

/// Collect `episodes` rollouts on per-episode child streams and compute
/// returns. Advantages are left to the caller (the value baseline varies).
RolloutBatch collect_batch(const EnvSpec& spec, const PolicyParams& policy, int episodes,
                           double gamma, RngStream rng, EpisodeTally* tally = nullptr);

/// Flattened per-sample view of a batch under a fixed behavior policy and
/// preference: everything the surrogate objective needs, one row per step.
struct SurrogateBatch {
  Eigen::MatrixXd states;              // n x state_dim
  Eigen::MatrixXd actions;             // n x action_dim
  Eigen::VectorXd behavior_log_probs;  // log pi_old(a|s), recorded at sampling
  Eigen::VectorXd scalarized;          // f_omega(A_t)
  Eigen::MatrixXd old_means;           // mu_old(s), cached once
  Eigen::VectorXd old_log_std;
  Eigen::MatrixXd value_targets;       // n x q raw returns (value regression)

  int size() const { return static_cast<int>(states.rows()); }
};

/// Scalarize the batch advantages under `omega`. For Chebyshev with the
/// batch-max utopian policy, z is the componentwise advantage maximum plus
/// the configured margin, computed over the whole batch.
SurrogateBatch make_surrogate_batch(const RolloutBatch& batch, const PolicyParams& behavior,
                                    const PreferenceVector& omega, const ScalarizationSpec& scal);

/// Mean per-sample PPO objective over `rows` (ascending order expected),
/// larger is better. clip: min(rho*f, clamp(rho, 1-eps, 1+eps)*f).
/// kl_penalty: rho*f - beta*KL(old || new). Fills `grad` when non-null.
double surrogate_objective(const PolicyParams& policy, const SurrogateBatch& batch,
                           std::span<const int> rows, const PpoConfig& cfg,
                           PolicyGradients* grad);

/// Mean squared error ||V(s) - R||^2 over `rows`; fills `grad` when non-null.
double value_objective(const ValueParams& value, const SurrogateBatch& batch,
                       std::span<const int> rows, MlpGradients* grad);

struct UpdateStats {
  double surrogate = 0.0;
  double value_loss = 0.0;
  double mean_kl = 0.0;
  double mean_scalarized_advantage = 0.0;
};

/// One PPO update: `epochs` passes of minibatch ascent on the scalarized
/// surrogate plus descent on the value regression. The input parameters are
/// untouched; a non-finite loss throws UpdateAborted and the caller keeps
/// them. Behavior policy = the input policy (the batch was collected under
/// it); the importance ratio uses the recorded behavior log-probs.
std::pair<PolicyParams, ValueParams> ppo_update(const PolicyParams& policy,
                                                const ValueParams& value,
                                                const RolloutBatch& batch,
                                                const PreferenceVector& omega,
                                                const ScalarizationSpec& scal,
                                                const PpoConfig& cfg,
                                                UpdateStats* stats = nullptr);

/// Mean discounted return vector over `episodes`, acting at the policy mean.
Eigen::VectorXd evaluate_policy(const EnvSpec& spec, const PolicyParams& policy, int episodes,
                                double gamma, RngStream rng, EpisodeTally* tally = nullptr);

/// The action a deterministic evaluation takes in `state`: the policy mean
/// clipped to the environment's action box.
Eigen::VectorXd mean_action(const EnvSpec& spec, const PolicyParams& policy,
                            const Eigen::VectorXd& state);

}  // namespace morl

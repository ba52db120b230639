#pragma once

#include <Eigen/Dense>
#include <functional>
#include <utility>
#include <vector>

#include "morl/pareto.hpp"
#include "morl/rl.hpp"

namespace morl {

struct MetaConfig {
  int num_tasks = 5;
  int meta_iterations = 400;
  int adaptation_steps = 1;
  double meta_learn_rate = 3e-3;
  int finetune_iterations = 10;  // K
  int batch_multiplier = 5;      // meta batch = multiplier x regular episodes
  int preference_count = 30;     // N policies on the front
  int checkpoint_every = 0;      // harness-level; 0 disables
};

/// One sampled task: the preference, the parameters adapted to it, the
/// shared batch it adapted on (collected under the meta-policy) and the
/// batch collected under the adapted policy afterwards.
struct TaskRecord {
  PreferenceVector omega;
  PolicyParams adapted_policy;
  ValueParams adapted_value;
  RolloutBatch adaptation_batch;       // D, behavior = meta-policy
  RolloutBatch post_adaptation_batch;  // D_i, behavior = adapted policy
};

/// Adaptation phase: `adaptation_steps` PPO updates on the shared batch,
/// starting from (and never mutating) the meta parameters. The batch must
/// arrive with advantages computed against the meta value function;
/// subsequent steps recompute them against the adapting value clone.
std::pair<PolicyParams, ValueParams> adapt(const PolicyParams& meta_policy,
                                           const ValueParams& meta_value,
                                           const RolloutBatch& batch,
                                           const PreferenceVector& omega,
                                           const MetaConfig& meta_cfg, const PpoConfig& ppo,
                                           const ScalarizationSpec& scal);

struct MetaUpdateStats {
  double surrogate = 0.0;
  double value_loss = 0.0;
  double mean_kl = 0.0;
};

/// Meta-learning phase, first order: ascend the sum over tasks of the
/// scalarized surrogate on each task's post-adaptation batch, with the
/// importance ratio taken against that task's adapted (behavior) policy.
/// No differentiation through the adaptation step. The value function is
/// regressed on the pooled post-adaptation returns.
std::pair<PolicyParams, ValueParams> meta_update(const PolicyParams& meta_policy,
                                                 const ValueParams& meta_value,
                                                 const std::vector<TaskRecord>& tasks,
                                                 const MetaConfig& meta_cfg,
                                                 const PpoConfig& ppo,
                                                 const ScalarizationSpec& scal,
                                                 MetaUpdateStats* stats = nullptr);

struct MetaIterationStats {
  int iteration = 0;
  double surrogate = 0.0;
  double value_loss = 0.0;
  double mean_kl = 0.0;
  bool skipped = false;
  std::int64_t episodes = 0;  // training episodes consumed by this iteration
};

struct TrainHistory {
  std::vector<MetaIterationStats> iterations;
};

struct TrainResult {
  PolicyParams policy;
  ValueParams value;
  TrainHistory history;
};

/// Mid-run snapshot for checkpoint/resume. Stream paths are derived from
/// absolute iteration indices, so continuing from a snapshot reproduces the
/// uninterrupted run draw for draw.
struct TrainStart {
  PolicyParams policy;
  ValueParams value;
  int start_iteration = 0;
  TrainHistory history;
};

using CheckpointHook = std::function<void(int completed_iterations, const TrainResult& state)>;

/// Algorithm: per iteration, sample the shared batch under the meta-policy
/// (batch_multiplier x episodes), adapt one policy per sampled preference,
/// collect a post-adaptation batch per task, then apply the meta update.
/// Iterations whose update aborts are skipped and logged; training goes on.
TrainResult train_meta(const EnvSpec& spec, const MetaConfig& meta_cfg, const PpoConfig& ppo,
                       const ScalarizationSpec& scal, RngStream rng,
                       EpisodeTally* tally = nullptr, const TrainStart* resume = nullptr,
                       const CheckpointHook& on_checkpoint = {});

using FinetuneHook = std::function<void(int iteration, const PolicyParams& policy)>;

/// Fine-tuning phase: `iterations` standard PPO updates with fresh rollouts,
/// starting from the meta parameters. `on_iteration` fires at iteration 0
/// with the unretouched meta-policy and after every update.
PolicyParams finetune(const PolicyParams& meta_policy, const ValueParams& meta_value,
                      const EnvSpec& spec, const PreferenceVector& omega, int iterations,
                      const PpoConfig& ppo, const ScalarizationSpec& scal, RngStream rng,
                      EpisodeTally* tally = nullptr, const FinetuneHook& on_iteration = {},
                      UpdateStats* last_stats = nullptr);

using RaHook = std::function<void(int weight_index, int iteration, const UpdateStats& stats)>;

/// Radial baseline: one independently, randomly initialized policy per
/// weight, trained for `iterations` PPO updates. Per-weight streams are
/// derived from the weight values themselves, so permuting the weight list
/// permutes the returned policies correspondingly. A policy whose update
/// aborts keeps its last parameters and is flagged in `failed`.
std::vector<PolicyParams> run_ra(const EnvSpec& spec,
                                 const std::vector<PreferenceVector>& weights, int iterations,
                                 const PpoConfig& ppo, const ScalarizationSpec& scal,
                                 RngStream rng, EpisodeTally* tally = nullptr,
                                 std::vector<bool>* failed = nullptr,
                                 const RaHook& on_iteration = {});

/// Evaluate every policy, attach validity flags, and mark dominance over the
/// valid entries. Reference point and hypervolume are left unset.
ParetoArchive build_front(const EnvSpec& spec, const std::vector<PolicyParams>& policies,
                          const std::vector<PreferenceVector>& labels, double gamma,
                          int episodes, RngStream rng, EpisodeTally* tally = nullptr);

/// Closed-form training-episode budget of train_meta: the manifest and the
/// budget-matched baseline both rely on this count being exact.
std::int64_t meta_training_episodes(const MetaConfig& meta_cfg, const PpoConfig& ppo);

/// Closed-form fine-tuning budget: N preferences x K iterations x episodes.
std::int64_t finetune_episodes(const MetaConfig& meta_cfg, const PpoConfig& ppo);

/// 64-bit tag of a preference vector's exact bit pattern (stream derivation).
std::uint64_t preference_tag(const PreferenceVector& omega);

}  // namespace morl

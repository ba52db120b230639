#include "morl/meta.hpp"

#include <bit>
#include <cmath>
#include <numeric>

#include "morl/errors.hpp"

namespace morl {
namespace {

constexpr std::uint64_t kPrefTagSalt = 0x8f1bbcdcbfa53e0bULL;

std::uint64_t mix_tag(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<int> all_rows(int n) {
  std::vector<int> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

}  // namespace

std::uint64_t preference_tag(const PreferenceVector& omega) {
  std::uint64_t tag = kPrefTagSalt;
  for (int i = 0; i < omega.size(); ++i)
    tag = mix_tag(tag ^ std::bit_cast<std::uint64_t>(omega[i]));
  return tag;
}

std::pair<PolicyParams, ValueParams> adapt(const PolicyParams& meta_policy,
                                           const ValueParams& meta_value,
                                           const RolloutBatch& batch,
                                           const PreferenceVector& omega,
                                           const MetaConfig& meta_cfg, const PpoConfig& ppo,
                                           const ScalarizationSpec& scal) {
  if (meta_cfg.adaptation_steps < 1)
    throw InvalidInput("adapt: adaptation_steps must be at least 1");

  PolicyParams policy = meta_policy;
  ValueParams value = meta_value;
  RolloutBatch working = batch;
  for (int step = 0; step < meta_cfg.adaptation_steps; ++step) {
    if (step > 0) compute_advantages(working, value);
    std::tie(policy, value) = ppo_update(policy, value, working, omega, scal, ppo);
  }
  return {std::move(policy), std::move(value)};
}

std::pair<PolicyParams, ValueParams> meta_update(const PolicyParams& meta_policy,
                                                 const ValueParams& meta_value,
                                                 const std::vector<TaskRecord>& tasks,
                                                 const MetaConfig& meta_cfg,
                                                 const PpoConfig& ppo,
                                                 const ScalarizationSpec& scal,
                                                 MetaUpdateStats* stats) {
  if (tasks.empty()) throw InvalidInput("meta_update: no tasks");

  // Flatten each task once; the behavior policy for task i is its adapted
  // policy, which collected the post-adaptation batch.
  std::vector<SurrogateBatch> task_batches;
  task_batches.reserve(tasks.size());
  std::vector<std::vector<int>> task_rows;
  for (const TaskRecord& task : tasks) {
    task_batches.push_back(make_surrogate_batch(task.post_adaptation_batch, task.adapted_policy,
                                                task.omega, scal));
    task_rows.push_back(all_rows(task_batches.back().size()));
  }

  PolicyParams policy = meta_policy;
  ValueParams value = meta_value;
  PolicyGradients task_grad;
  MlpGradients task_vgrad;

  // Pooled mean KL against each task's behavior policy; drives the same
  // trust-region stop as ppo_update.
  const auto pooled_kl = [&]() {
    double kl = 0.0;
    int rows = 0;
    for (const auto& sb : task_batches) {
      for (int r = 0; r < sb.size(); ++r) {
        const Eigen::VectorXd state = sb.states.row(r);
        kl += gaussian_kl_from_moments(sb.old_means.row(r), sb.old_log_std,
                                       mlp_forward(policy.mlp, state), policy.log_std);
      }
      rows += sb.size();
    }
    return kl / rows;
  };

  bool policy_frozen = false;
  for (int epoch = 0; epoch < ppo.epochs; ++epoch) {
    if (!policy_frozen) {
      PolicyGradients grad_sum = PolicyGradients::zeros_like(policy);
      double objective_sum = 0.0;
      for (std::size_t i = 0; i < tasks.size(); ++i) {
        objective_sum +=
            surrogate_objective(policy, task_batches[i], task_rows[i], ppo, &task_grad);
        grad_sum.add(task_grad);
      }
      if (!std::isfinite(objective_sum) || !grad_sum.all_finite())
        throw UpdateAborted("non-finite meta surrogate at epoch " + std::to_string(epoch));
      if (meta_cfg.meta_learn_rate != 0.0) {
        const PolicyParams before_step = policy;
        double factor = 1.0;
        bool accepted = false;
        while (factor > 1.0 / 1024.0) {
          policy = before_step;
          apply_gradient(policy, grad_sum, factor * meta_cfg.meta_learn_rate);
          clamp_log_std(policy);
          if (pooled_kl() <= kKlStopThreshold) {
            accepted = true;
            break;
          }
          factor *= 0.5;
        }
        if (!accepted) {
          policy = before_step;
          policy_frozen = true;
        }
      }
    }

    // Pooled value regression over all post-adaptation samples.
    MlpGradients vgrad_sum = MlpGradients::zeros_like(value.mlp);
    double vloss_pooled = 0.0;
    int total_rows = 0;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      const int ni = task_batches[i].size();
      vloss_pooled += value_objective(value, task_batches[i], task_rows[i], &task_vgrad) * ni;
      vgrad_sum.add(task_vgrad, static_cast<double>(ni));
      total_rows += ni;
    }
    vgrad_sum.scale(1.0 / total_rows);
    vloss_pooled /= total_rows;
    if (!std::isfinite(vloss_pooled) || !vgrad_sum.all_finite())
      throw UpdateAborted("non-finite meta value loss at epoch " + std::to_string(epoch));
    apply_gradient(value.mlp, vgrad_sum, -ppo.value_learn_rate);
  }

  if (stats) {
    double objective_sum = 0.0;
    double vloss = 0.0;
    double kl = 0.0;
    int total_rows = 0;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      objective_sum += surrogate_objective(policy, task_batches[i], task_rows[i], ppo, nullptr);
      const int ni = task_batches[i].size();
      vloss += value_objective(value, task_batches[i], task_rows[i], nullptr) * ni;
      for (int r = 0; r < ni; ++r) {
        const Eigen::VectorXd state = task_batches[i].states.row(r);
        kl += gaussian_kl_from_moments(task_batches[i].old_means.row(r),
                                       task_batches[i].old_log_std,
                                       mlp_forward(policy.mlp, state), policy.log_std);
      }
      total_rows += ni;
    }
    stats->surrogate = objective_sum;
    stats->value_loss = vloss / total_rows;
    stats->mean_kl = kl / total_rows;
  }
  return {std::move(policy), std::move(value)};
}

TrainResult train_meta(const EnvSpec& spec, const MetaConfig& meta_cfg, const PpoConfig& ppo,
                       const ScalarizationSpec& scal, RngStream rng, EpisodeTally* tally,
                       const TrainStart* resume, const CheckpointHook& on_checkpoint) {
  TrainResult result;
  int first_iteration = 0;
  if (resume) {
    result.policy = resume->policy;
    result.value = resume->value;
    result.history = resume->history;
    first_iteration = resume->start_iteration;
  } else {
    RngStream init = rng.child(0);
    RngStream policy_init = init.child(0);
    RngStream value_init = init.child(1);
    result.policy = make_policy(spec.state_dim, spec.action_dim, {32, 32}, Activation::kTanh,
                                policy_init);
    result.value = make_value(spec.state_dim, spec.num_objectives, {32, 32}, Activation::kTanh,
                              value_init);
  }

  const int meta_episodes = meta_cfg.batch_multiplier * ppo.episodes_per_iteration;
  RngStream iterations_root = rng.child(1);

  for (int it = first_iteration; it < meta_cfg.meta_iterations; ++it) {
    RngStream iter_stream = iterations_root.child(static_cast<std::uint64_t>(it));
    MetaIterationStats iter_stats;
    iter_stats.iteration = it;

    RngStream batch_stream = iter_stream.child(0);
    RolloutBatch shared = collect_batch(spec, result.policy, meta_episodes, spec.gamma,
                                        batch_stream, tally);
    iter_stats.episodes += meta_episodes;
    compute_advantages(shared, result.value);

    RngStream tasks_root = iter_stream.child(1);
    std::vector<TaskRecord> tasks;
    tasks.reserve(meta_cfg.num_tasks);
    bool aborted = false;
    std::string abort_reason;
    for (int t = 0; t < meta_cfg.num_tasks && !aborted; ++t) {
      RngStream task_stream = tasks_root.child(static_cast<std::uint64_t>(t));
      RngStream pref_stream = task_stream.child(0);
      const PreferenceVector omega = sample_preference(spec.num_objectives, pref_stream);
      try {
        auto [adapted_policy, adapted_value] =
            adapt(result.policy, result.value, shared, omega, meta_cfg, ppo, scal);
        RngStream post_stream = task_stream.child(1);
        RolloutBatch post = collect_batch(spec, adapted_policy, ppo.episodes_per_iteration,
                                          spec.gamma, post_stream, tally);
        iter_stats.episodes += ppo.episodes_per_iteration;
        compute_advantages(post, adapted_value);
        tasks.push_back(TaskRecord{omega, std::move(adapted_policy), std::move(adapted_value),
                                   shared, std::move(post)});
      } catch (const UpdateAborted& e) {
        aborted = true;
        abort_reason = e.diagnostics();
      }
    }

    if (!aborted) {
      try {
        MetaUpdateStats mu_stats;
        std::tie(result.policy, result.value) =
            meta_update(result.policy, result.value, tasks, meta_cfg, ppo, scal, &mu_stats);
        iter_stats.surrogate = mu_stats.surrogate;
        iter_stats.value_loss = mu_stats.value_loss;
        iter_stats.mean_kl = mu_stats.mean_kl;
      } catch (const UpdateAborted& e) {
        aborted = true;
        abort_reason = e.diagnostics();
      }
    }
    iter_stats.skipped = aborted;
    result.history.iterations.push_back(iter_stats);

    if (on_checkpoint && meta_cfg.checkpoint_every > 0 &&
        (it + 1) % meta_cfg.checkpoint_every == 0)
      on_checkpoint(it + 1, result);
  }
  return result;
}

PolicyParams finetune(const PolicyParams& meta_policy, const ValueParams& meta_value,
                      const EnvSpec& spec, const PreferenceVector& omega, int iterations,
                      const PpoConfig& ppo, const ScalarizationSpec& scal, RngStream rng,
                      EpisodeTally* tally, const FinetuneHook& on_iteration,
                      UpdateStats* last_stats) {
  if (iterations < 0) throw InvalidInput("finetune: negative iteration count");
  PolicyParams policy = meta_policy;
  ValueParams value = meta_value;
  if (on_iteration) on_iteration(0, policy);
  for (int k = 0; k < iterations; ++k) {
    RngStream iter_stream = rng.child(static_cast<std::uint64_t>(k));
    RolloutBatch batch = collect_batch(spec, policy, ppo.episodes_per_iteration, spec.gamma,
                                       iter_stream, tally);
    compute_advantages(batch, value);
    std::tie(policy, value) = ppo_update(policy, value, batch, omega, scal, ppo, last_stats);
    if (on_iteration) on_iteration(k + 1, policy);
  }
  return policy;
}

std::vector<PolicyParams> run_ra(const EnvSpec& spec,
                                 const std::vector<PreferenceVector>& weights, int iterations,
                                 const PpoConfig& ppo, const ScalarizationSpec& scal,
                                 RngStream rng, EpisodeTally* tally, std::vector<bool>* failed,
                                 const RaHook& on_iteration) {
  if (iterations < 1) throw InvalidInput("run_ra: need at least one iteration");
  std::vector<PolicyParams> policies;
  policies.reserve(weights.size());
  if (failed) failed->assign(weights.size(), false);

  for (std::size_t w = 0; w < weights.size(); ++w) {
    const PreferenceVector& omega = weights[w];
    RngStream weight_stream = rng.child_tagged(preference_tag(omega));
    RngStream init = weight_stream.child(0);
    RngStream policy_init = init.child(0);
    RngStream value_init = init.child(1);
    PolicyParams policy = make_policy(spec.state_dim, spec.action_dim, {32, 32},
                                      Activation::kTanh, policy_init);
    ValueParams value = make_value(spec.state_dim, spec.num_objectives, {32, 32},
                                   Activation::kTanh, value_init);

    RngStream train_root = weight_stream.child(1);
    for (int it = 0; it < iterations; ++it) {
      RngStream iter_stream = train_root.child(static_cast<std::uint64_t>(it));
      RolloutBatch batch = collect_batch(spec, policy, ppo.episodes_per_iteration, spec.gamma,
                                         iter_stream, tally);
      compute_advantages(batch, value);
      try {
        UpdateStats stats;
        std::tie(policy, value) = ppo_update(policy, value, batch, omega, scal, ppo, &stats);
        if (on_iteration) on_iteration(static_cast<int>(w), it, stats);
      } catch (const UpdateAborted&) {
        if (failed) (*failed)[w] = true;
        break;  // keep the last good parameters for this weight
      }
    }
    policies.push_back(std::move(policy));
  }
  return policies;
}

ParetoArchive build_front(const EnvSpec& spec, const std::vector<PolicyParams>& policies,
                          const std::vector<PreferenceVector>& labels, double gamma,
                          int episodes, RngStream rng, EpisodeTally* tally) {
  if (policies.empty()) throw InvalidInput("build_front: no policies");
  if (labels.size() != policies.size())
    throw InvalidInput("build_front: labels and policies disagree in length");

  ParetoArchive archive;
  archive.entries.reserve(policies.size());
  for (std::size_t i = 0; i < policies.size(); ++i) {
    RngStream eval_stream = rng.child(static_cast<std::uint64_t>(i));
    ParetoEntry entry;
    entry.policy_id = static_cast<int>(i);
    entry.omega = labels[i].weights();
    entry.mean_return = evaluate_policy(spec, policies[i], episodes, gamma, eval_stream, tally);
    entry.valid = is_valid(spec, entry.mean_return);
    archive.entries.push_back(std::move(entry));
  }
  mark_non_dominated(archive);
  return archive;
}

std::int64_t meta_training_episodes(const MetaConfig& meta_cfg, const PpoConfig& ppo) {
  const std::int64_t per_iter =
      static_cast<std::int64_t>(meta_cfg.batch_multiplier + meta_cfg.num_tasks) *
      ppo.episodes_per_iteration;
  return static_cast<std::int64_t>(meta_cfg.meta_iterations) * per_iter;
}

std::int64_t finetune_episodes(const MetaConfig& meta_cfg, const PpoConfig& ppo) {
  return static_cast<std::int64_t>(meta_cfg.preference_count) * meta_cfg.finetune_iterations *
         ppo.episodes_per_iteration;
}

}  // namespace morl

#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numeric>

#include "morl/envs.hpp"
#include "morl/meta.hpp"
#include "morl/rl.hpp"
#include "morl/rng.hpp"

using namespace morl;

namespace {

double max_param_delta(const PolicyParams& a, const PolicyParams& b) {
  double m = (a.log_std - b.log_std).cwiseAbs().maxCoeff();
  for (std::size_t l = 0; l < a.mlp.weights.size(); ++l) {
    m = std::max(m, (a.mlp.weights[l] - b.mlp.weights[l]).cwiseAbs().maxCoeff());
    m = std::max(m, (a.mlp.biases[l] - b.mlp.biases[l]).cwiseAbs().maxCoeff());
  }
  return m;
}

struct Setup {
  EnvSpec spec;
  PolicyParams policy;
  ValueParams value;
  RolloutBatch batch;
  ScalarizationSpec scal;
  PpoConfig ppo;
  MetaConfig meta;
};

Setup make_setup(std::uint64_t seed, int episodes = 16) {
  Setup s;
  s.spec = make_env_spec(EnvId::kConvexBandit);
  RngStream rng(seed);
  RngStream pinit = rng.child(0);
  RngStream vinit = rng.child(1);
  s.policy = make_policy(1, 1, {8, 8}, Activation::kTanh, pinit);
  s.value = make_value(1, 2, {8, 8}, Activation::kTanh, vinit);
  RngStream collect = rng.child(2);
  s.batch = collect_batch(s.spec, s.policy, episodes, s.spec.gamma, collect);
  compute_advantages(s.batch, s.value);
  return s;
}

PreferenceVector even2() { return PreferenceVector::normalized(Eigen::VectorXd::Ones(2)); }

}  // namespace

TEST_CASE("adapt: zero learn rates return the meta parameters exactly") {
  Setup s = make_setup(100);
  s.ppo.policy_learn_rate = 0.0;
  s.ppo.value_learn_rate = 0.0;
  const auto [policy, value] = adapt(s.policy, s.value, s.batch, even2(), s.meta, s.ppo, s.scal);
  CHECK(max_param_delta(policy, s.policy) == 0.0);
}

TEST_CASE("adapt: one-hot preference ascends its surrogate on the shared batch") {
  Setup s = make_setup(101);
  Eigen::VectorXd onehot(2);
  onehot << 1.0, 0.0;
  const PreferenceVector omega = PreferenceVector::from_weights(onehot);
  const SurrogateBatch sb = make_surrogate_batch(s.batch, s.policy, omega, s.scal);
  std::vector<int> rows(sb.size());
  std::iota(rows.begin(), rows.end(), 0);
  const double before = surrogate_objective(s.policy, sb, rows, s.ppo, nullptr);
  const auto [adapted, value] = adapt(s.policy, s.value, s.batch, omega, s.meta, s.ppo, s.scal);
  const double after = surrogate_objective(adapted, sb, rows, s.ppo, nullptr);
  CHECK(after >= before);
}

TEST_CASE("adapt: pure function of its inputs") {
  Setup s = make_setup(102);
  const PolicyParams snapshot = s.policy;
  const auto [a1, v1] = adapt(s.policy, s.value, s.batch, even2(), s.meta, s.ppo, s.scal);
  const auto [a2, v2] = adapt(s.policy, s.value, s.batch, even2(), s.meta, s.ppo, s.scal);
  CHECK(max_param_delta(a1, a2) == 0.0);
  CHECK(max_param_delta(s.policy, snapshot) == 0.0);  // meta params untouched
}

TEST_CASE("meta_update: one self-collected task collapses to a plain ppo_update") {
  Setup s = make_setup(103);
  // D_i "re-collected under the meta-policy": behavior == meta.
  TaskRecord task{even2(), s.policy, s.value, s.batch, s.batch};
  s.ppo.minibatch_size = 1 << 20;  // full batch
  MetaConfig meta_cfg = s.meta;
  meta_cfg.meta_learn_rate = s.ppo.policy_learn_rate;

  const auto [meta_policy, meta_value] =
      meta_update(s.policy, s.value, {task}, meta_cfg, s.ppo, s.scal);
  const auto [ppo_policy, ppo_value] =
      ppo_update(s.policy, s.value, s.batch, even2(), s.scal, s.ppo);
  CHECK(max_param_delta(meta_policy, ppo_policy) == 0.0);
  for (std::size_t l = 0; l < meta_value.mlp.weights.size(); ++l)
    CHECK(meta_value.mlp.weights[l] == ppo_value.mlp.weights[l]);
}

TEST_CASE("meta_update: duplicated task doubles the first-epoch policy step") {
  Setup s = make_setup(104);
  s.ppo.epochs = 1;
  s.ppo.value_learn_rate = 0.0;
  TaskRecord task{even2(), s.policy, s.value, s.batch, s.batch};

  const auto [one_task_policy, v1] =
      meta_update(s.policy, s.value, {task}, s.meta, s.ppo, s.scal);
  const auto [two_task_policy, v2] =
      meta_update(s.policy, s.value, {task, task}, s.meta, s.ppo, s.scal);

  for (std::size_t l = 0; l < s.policy.mlp.weights.size(); ++l) {
    const Eigen::MatrixXd step1 = one_task_policy.mlp.weights[l] - s.policy.mlp.weights[l];
    const Eigen::MatrixXd step2 = two_task_policy.mlp.weights[l] - s.policy.mlp.weights[l];
    CHECK((step2 - 2.0 * step1).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("meta_update: gradient of the aggregated surrogate matches finite differences") {
  Setup s = make_setup(105, 8);
  // two tasks with different preferences and behaviors
  RngStream rng(200);
  Eigen::VectorXd w1(2), w2(2);
  w1 << 0.8, 0.2;
  w2 << 0.3, 0.7;
  auto [p1, v1] = adapt(s.policy, s.value, s.batch, PreferenceVector::from_weights(w1), s.meta,
                        s.ppo, s.scal);
  auto [p2, v2] = adapt(s.policy, s.value, s.batch, PreferenceVector::from_weights(w2), s.meta,
                        s.ppo, s.scal);
  RolloutBatch d1 = collect_batch(s.spec, p1, 8, s.spec.gamma, rng.child(0));
  compute_advantages(d1, v1);
  RolloutBatch d2 = collect_batch(s.spec, p2, 8, s.spec.gamma, rng.child(1));
  compute_advantages(d2, v2);
  std::vector<TaskRecord> tasks;
  tasks.push_back(TaskRecord{PreferenceVector::from_weights(w1), p1, v1, s.batch, d1});
  tasks.push_back(TaskRecord{PreferenceVector::from_weights(w2), p2, v2, s.batch, d2});

  std::vector<SurrogateBatch> sbs;
  for (const auto& t : tasks)
    sbs.push_back(make_surrogate_batch(t.post_adaptation_batch, t.adapted_policy, t.omega,
                                       s.scal));
  const auto aggregate = [&](const PolicyParams& p) {
    double total = 0.0;
    for (const auto& sb : sbs) {
      std::vector<int> rows(sb.size());
      std::iota(rows.begin(), rows.end(), 0);
      total += surrogate_objective(p, sb, rows, s.ppo, nullptr);
    }
    return total;
  };

  PolicyGradients grad_sum = PolicyGradients::zeros_like(s.policy);
  PolicyGradients g;
  for (const auto& sb : sbs) {
    std::vector<int> rows(sb.size());
    std::iota(rows.begin(), rows.end(), 0);
    surrogate_objective(s.policy, sb, rows, s.ppo, &g);
    grad_sum.add(g);
  }

  const double h = 1e-6;
  PolicyParams probe = s.policy;
  double num = 0.0, denom = 0.0;
  const auto check_slot = [&](double* slot, double base, double analytic) {
    *slot = base + h;
    const double up = aggregate(probe);
    *slot = base - h;
    const double down = aggregate(probe);
    *slot = base;
    const double fd = (up - down) / (2 * h);
    num += (fd - analytic) * (fd - analytic);
    denom += fd * fd + analytic * analytic;
  };
  for (std::size_t l = 0; l < s.policy.mlp.weights.size(); ++l) {
    for (int r = 0; r < s.policy.mlp.weights[l].rows(); ++r)
      for (int c = 0; c < s.policy.mlp.weights[l].cols(); ++c)
        check_slot(&probe.mlp.weights[l](r, c), s.policy.mlp.weights[l](r, c),
                   grad_sum.mlp.weights[l](r, c));
    for (int i = 0; i < s.policy.mlp.biases[l].size(); ++i)
      check_slot(&probe.mlp.biases[l][i], s.policy.mlp.biases[l][i], grad_sum.mlp.biases[l][i]);
  }
  for (int i = 0; i < s.policy.log_std.size(); ++i)
    check_slot(&probe.log_std[i], s.policy.log_std[i], grad_sum.log_std[i]);
  CHECK(std::sqrt(num) / std::max(std::sqrt(denom), 1e-12) <= 1e-5);
}

TEST_CASE("meta_update is pure in (params, tasks, config)") {
  Setup s = make_setup(106);
  TaskRecord task{even2(), s.policy, s.value, s.batch, s.batch};
  const auto [p1, v1] = meta_update(s.policy, s.value, {task}, s.meta, s.ppo, s.scal);
  const auto [p2, v2] = meta_update(s.policy, s.value, {task}, s.meta, s.ppo, s.scal);
  CHECK(max_param_delta(p1, p2) == 0.0);
}

TEST_CASE("train_meta: zero iterations returns the random initialization") {
  const EnvSpec spec = make_env_spec(EnvId::kConvexBandit);
  MetaConfig meta_cfg;
  meta_cfg.meta_iterations = 0;
  PpoConfig ppo;
  ScalarizationSpec scal;
  const TrainResult a = train_meta(spec, meta_cfg, ppo, scal, RngStream(55));
  const TrainResult b = train_meta(spec, meta_cfg, ppo, scal, RngStream(55));
  CHECK(a.history.iterations.empty());
  CHECK(max_param_delta(a.policy, b.policy) == 0.0);
}

TEST_CASE("train_meta: identical seeds give bit-identical history") {
  const EnvSpec spec = make_env_spec(EnvId::kConvexBandit);
  MetaConfig meta_cfg;
  meta_cfg.meta_iterations = 3;
  meta_cfg.num_tasks = 2;
  meta_cfg.batch_multiplier = 2;
  PpoConfig ppo;
  ppo.episodes_per_iteration = 8;
  ScalarizationSpec scal;
  EpisodeTally t1, t2;
  const TrainResult a = train_meta(spec, meta_cfg, ppo, scal, RngStream(56), &t1);
  const TrainResult b = train_meta(spec, meta_cfg, ppo, scal, RngStream(56), &t2);
  REQUIRE(a.history.iterations.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(a.history.iterations[i].surrogate == b.history.iterations[i].surrogate);
    CHECK(a.history.iterations[i].mean_kl == b.history.iterations[i].mean_kl);
  }
  CHECK(t1.train == t2.train);
  CHECK(max_param_delta(a.policy, b.policy) == 0.0);
}

TEST_CASE("train_meta: episode accounting matches the closed form exactly") {
  const EnvSpec spec = make_env_spec(EnvId::kConvexBandit);
  MetaConfig meta_cfg;
  meta_cfg.meta_iterations = 4;
  meta_cfg.num_tasks = 3;
  meta_cfg.batch_multiplier = 2;
  PpoConfig ppo;
  ppo.episodes_per_iteration = 8;
  ScalarizationSpec scal;
  EpisodeTally tally;
  const TrainResult result = train_meta(spec, meta_cfg, ppo, scal, RngStream(57), &tally);
  CHECK(tally.train == meta_training_episodes(meta_cfg, ppo));
  CHECK(tally.train == 4 * (2 + 3) * 8);
  std::int64_t from_history = 0;
  for (const auto& it : result.history.iterations) from_history += it.episodes;
  CHECK(from_history == tally.train);
}

TEST_CASE("finetune: zero iterations returns the meta policy, hook fires at zero") {
  Setup s = make_setup(107);
  int hook_calls = 0;
  const PolicyParams tuned =
      finetune(s.policy, s.value, s.spec, even2(), 0, s.ppo, s.scal, RngStream(58), nullptr,
               [&](int k, const PolicyParams&) {
                 CHECK(k == 0);
                 ++hook_calls;
               });
  CHECK(hook_calls == 1);
  CHECK(max_param_delta(tuned, s.policy) == 0.0);
}

TEST_CASE("finetune: seed reproducibility") {
  Setup s = make_setup(108);
  const PolicyParams a =
      finetune(s.policy, s.value, s.spec, even2(), 3, s.ppo, s.scal, RngStream(59));
  const PolicyParams b =
      finetune(s.policy, s.value, s.spec, even2(), 3, s.ppo, s.scal, RngStream(59));
  CHECK(max_param_delta(a, b) == 0.0);
}

TEST_CASE("run_ra: count, order, reproducibility, and permutation equivariance") {
  const EnvSpec spec = make_env_spec(EnvId::kConvexBandit);
  PpoConfig ppo;
  ppo.episodes_per_iteration = 8;
  ScalarizationSpec scal;
  const auto weights = radial_weights(2, 3);
  EpisodeTally tally;
  const auto policies = run_ra(spec, weights, 2, ppo, scal, RngStream(60), &tally);
  REQUIRE(policies.size() == 3);
  CHECK(tally.train == 3 * 2 * 8);

  const auto again = run_ra(spec, weights, 2, ppo, scal, RngStream(60));
  for (int i = 0; i < 3; ++i) CHECK(max_param_delta(policies[i], again[i]) == 0.0);

  std::vector<PreferenceVector> permuted{weights[2], weights[0], weights[1]};
  const auto shuffled = run_ra(spec, permuted, 2, ppo, scal, RngStream(60));
  CHECK(max_param_delta(shuffled[0], policies[2]) == 0.0);
  CHECK(max_param_delta(shuffled[1], policies[0]) == 0.0);
  CHECK(max_param_delta(shuffled[2], policies[1]) == 0.0);
}

TEST_CASE("build_front: dominance cases") {
  const EnvSpec spec = make_env_spec(EnvId::kConvexBandit);
  RngStream rng(61);

  SUBCASE("single valid policy is non-dominated") {
    RngStream init = rng.child(0);
    const PolicyParams p = make_policy(1, 1, {8}, Activation::kTanh, init);
    const auto archive =
        build_front(spec, {p}, {even2()}, 1.0, 2, rng.child(1));
    REQUIRE(archive.entries.size() == 1);
    CHECK(archive.entries[0].valid);
    CHECK(archive.entries[0].non_dominated);
  }

  SUBCASE("mean-0 and mean-1 policies are incomparable on the convex bandit") {
    PolicyParams p0;
    p0.mlp.layer_sizes = {1, 1};
    p0.mlp.weights = {Eigen::MatrixXd::Zero(1, 1)};
    p0.mlp.biases = {Eigen::VectorXd::Zero(1)};
    p0.log_std = Eigen::VectorXd::Zero(1);
    PolicyParams p1 = p0;
    p1.mlp.biases = {Eigen::VectorXd::Ones(1)};
    // returns (0,-1) and (-1,0): incomparable
    const auto archive =
        build_front(spec, {p0, p1}, {even2(), even2()}, 1.0, 2, rng.child(2));
    CHECK(archive.entries[0].non_dominated);
    CHECK(archive.entries[1].non_dominated);
    CHECK(archive.non_dominated_count() == 2);
  }
}

TEST_CASE("meta-training then fine-tuning reaches the preferred bandit optimum") {
  const EnvSpec spec = make_env_spec(EnvId::kConvexBandit);
  MetaConfig meta_cfg;
  meta_cfg.meta_iterations = 60;
  meta_cfg.num_tasks = 3;
  meta_cfg.batch_multiplier = 2;
  meta_cfg.meta_learn_rate = 1e-2;
  PpoConfig ppo;
  ppo.episodes_per_iteration = 16;
  ppo.policy_learn_rate = 1e-2;
  ScalarizationSpec scal;
  const TrainResult trained = train_meta(spec, meta_cfg, ppo, scal, RngStream(62));

  Eigen::VectorXd w(2);
  w << 1.0, 0.0;  // prefers objective 0: optimum at a* = 0
  const PolicyParams tuned = finetune(trained.policy, trained.value, spec,
                                      PreferenceVector::from_weights(w), 10, ppo, scal,
                                      RngStream(63));
  const Eigen::VectorXd a = mean_action(spec, tuned, Eigen::VectorXd::Zero(1));
  CHECK(std::abs(a[0] - 0.0) <= 0.1);
}

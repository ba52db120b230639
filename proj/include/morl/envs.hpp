#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "morl/nnet.hpp"
#include "morl/rng.hpp"

namespace morl {

enum class EnvId { kConvexBandit, kConcaveBandit, kPointReacher, kMoDrive };

EnvId env_id_from_string(std::string_view name);
std::string to_string(EnvId id);

enum class ValidityDirection { kGreater, kLess };

/// A policy is valid when its mean discounted return on `objective` clears
/// `threshold` in the stated direction.
struct ValidityRule {
  int objective = 0;
  double threshold = 0.0;
  ValidityDirection direction = ValidityDirection::kGreater;
};

struct EnvSpec {
  EnvId id = EnvId::kConvexBandit;
  int state_dim = 1;
  int action_dim = 1;
  int num_objectives = 2;
  int horizon = 1;
  double gamma = 1.0;  // per-environment default discount
  std::optional<ValidityRule> validity;
  Eigen::VectorXd action_low, action_high;  // actions are clipped inside the env
};

EnvSpec make_env_spec(EnvId id);

struct EnvState {
  EnvId id = EnvId::kConvexBandit;
  int t = 0;
  Eigen::VectorXd x;
};

struct StepResult {
  EnvState next;
  Eigen::VectorXd reward;
  bool done = false;
};

EnvState env_reset(const EnvSpec& spec, RngStream& rng);

/// Deterministic dynamics; throws on stepping a finished episode.
StepResult env_step(const EnvSpec& spec, const EnvState& state, const Eigen::VectorXd& action);

Eigen::VectorXd clip_action(const EnvSpec& spec, const Eigen::VectorXd& action);

/// One full episode under the stochastic policy. Actions are recorded as
/// sampled (pre-clip) together with their log-probabilities under the acting
/// policy; the environment applies its own clipping.
struct Trajectory {
  std::vector<Eigen::VectorXd> states;
  std::vector<Eigen::VectorXd> actions;
  std::vector<Eigen::VectorXd> rewards;
  std::vector<double> behavior_log_probs;

  int length() const { return static_cast<int>(states.size()); }
};

Trajectory rollout(const EnvSpec& spec, const PolicyParams& policy, RngStream& rng);

bool is_valid(const EnvSpec& spec, const Eigen::VectorXd& mean_discounted_return);

}  // namespace morl

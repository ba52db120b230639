#include "morl/envs.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "morl/errors.hpp"

namespace morl {

EnvId env_id_from_string(std::string_view name) {
  if (name == "convex_bandit") return EnvId::kConvexBandit;
  if (name == "concave_bandit") return EnvId::kConcaveBandit;
  if (name == "point_reacher") return EnvId::kPointReacher;
  if (name == "mo_drive") return EnvId::kMoDrive;
  throw InvalidInput("unknown environment id: " + std::string(name));
}

std::string to_string(EnvId id) {
  switch (id) {
    case EnvId::kConvexBandit: return "convex_bandit";
    case EnvId::kConcaveBandit: return "concave_bandit";
    case EnvId::kPointReacher: return "point_reacher";
    case EnvId::kMoDrive: return "mo_drive";
  }
  return "unknown";
}

EnvSpec make_env_spec(EnvId id) {
  EnvSpec spec;
  spec.id = id;
  switch (id) {
    case EnvId::kConvexBandit:
      spec.state_dim = 1;
      spec.action_dim = 1;
      spec.num_objectives = 2;
      spec.horizon = 1;
      spec.gamma = 1.0;
      spec.action_low = Eigen::VectorXd::Constant(1, -0.5);
      spec.action_high = Eigen::VectorXd::Constant(1, 1.5);
      break;
    case EnvId::kConcaveBandit:
      spec.state_dim = 1;
      spec.action_dim = 1;
      spec.num_objectives = 2;
      spec.horizon = 1;
      spec.gamma = 1.0;
      spec.action_low = Eigen::VectorXd::Constant(1, 0.0);
      spec.action_high = Eigen::VectorXd::Constant(1, 1.0);
      break;
    case EnvId::kPointReacher:
      spec.state_dim = 6;  // pos(2), vel(2), target(2)
      spec.action_dim = 2;
      spec.num_objectives = 2;
      spec.horizon = 50;
      spec.gamma = 0.99;
      spec.validity = ValidityRule{0, -20.0, ValidityDirection::kGreater};
      spec.action_low = Eigen::VectorXd::Constant(2, -1.0);
      spec.action_high = Eigen::VectorXd::Constant(2, 1.0);
      break;
    case EnvId::kMoDrive:
      spec.state_dim = 1;  // velocity
      spec.action_dim = 1;
      spec.num_objectives = 3;
      spec.horizon = 100;
      spec.gamma = 0.99;
      spec.validity = ValidityRule{2, 50.0, ValidityDirection::kGreater};
      spec.action_low = Eigen::VectorXd::Constant(1, -1.0);
      spec.action_high = Eigen::VectorXd::Constant(1, 1.0);
      break;
  }
  return spec;
}

EnvState env_reset(const EnvSpec& spec, RngStream& rng) {
  EnvState s;
  s.id = spec.id;
  s.t = 0;
  switch (spec.id) {
    case EnvId::kConvexBandit:
    case EnvId::kConcaveBandit:
      s.x = Eigen::VectorXd::Zero(1);
      break;
    case EnvId::kPointReacher: {
      s.x = Eigen::VectorXd::Zero(6);
      const double radius = 0.5 + 0.5 * rng.uniform();
      const double angle = 2.0 * std::numbers::pi * rng.uniform();
      s.x[4] = radius * std::cos(angle);
      s.x[5] = radius * std::sin(angle);
      break;
    }
    case EnvId::kMoDrive:
      s.x = Eigen::VectorXd::Zero(1);
      break;
  }
  return s;
}

Eigen::VectorXd clip_action(const EnvSpec& spec, const Eigen::VectorXd& action) {
  if (action.size() != spec.action_dim) throw InvalidInput("clip_action: dimension mismatch");
  return action.cwiseMax(spec.action_low).cwiseMin(spec.action_high);
}

StepResult env_step(const EnvSpec& spec, const EnvState& state, const Eigen::VectorXd& action) {
  if (state.t >= spec.horizon) throw InvalidInput("env_step: episode already finished");
  const Eigen::VectorXd a = clip_action(spec, action);

  StepResult result;
  result.next.id = spec.id;
  result.next.t = state.t + 1;
  result.reward = Eigen::VectorXd::Zero(spec.num_objectives);
  result.done = result.next.t >= spec.horizon;

  switch (spec.id) {
    case EnvId::kConvexBandit: {
      result.next.x = state.x;
      result.reward << -a[0] * a[0], -(a[0] - 1.0) * (a[0] - 1.0);
      break;
    }
    case EnvId::kConcaveBandit: {
      result.next.x = state.x;
      result.reward << a[0] * a[0], (1.0 - a[0]) * (1.0 - a[0]);
      break;
    }
    case EnvId::kPointReacher: {
      Eigen::Vector2d pos = state.x.segment<2>(0);
      Eigen::Vector2d vel = state.x.segment<2>(2);
      const Eigen::Vector2d target = state.x.segment<2>(4);
      vel = 0.9 * vel + 0.1 * a;
      pos = pos + 0.1 * vel;
      result.next.x = state.x;
      result.next.x.segment<2>(0) = pos;
      result.next.x.segment<2>(2) = vel;
      result.reward << -(pos - target).norm(), -a.squaredNorm();
      break;
    }
    case EnvId::kMoDrive: {
      const double v = state.x[0] + 0.1 * (a[0] - 0.5 * state.x[0]);
      result.next.x = Eigen::VectorXd::Constant(1, v);
      const bool crashed = std::abs(v) > 3.0;
      result.reward << v, -a[0] * a[0], crashed ? -10.0 : 1.0;
      if (crashed) result.done = true;
      break;
    }
  }
  return result;
}

Trajectory rollout(const EnvSpec& spec, const PolicyParams& policy, RngStream& rng) {
  if (policy.state_dim() != spec.state_dim || policy.action_dim() != spec.action_dim)
    throw InvalidInput("rollout: policy dimensions do not match the environment");

  Trajectory traj;
  EnvState s = env_reset(spec, rng);
  bool done = false;
  while (!done) {
    const Eigen::VectorXd action = gaussian_sample(policy, s.x, rng);
    const double log_prob = gaussian_log_prob(policy, s.x, action);
    StepResult step = env_step(spec, s, action);
    traj.states.push_back(s.x);
    traj.actions.push_back(action);
    traj.rewards.push_back(step.reward);
    traj.behavior_log_probs.push_back(log_prob);
    s = std::move(step.next);
    done = step.done;
  }
  return traj;
}

bool is_valid(const EnvSpec& spec, const Eigen::VectorXd& mean_discounted_return) {
  if (mean_discounted_return.size() != spec.num_objectives)
    throw InvalidInput("is_valid: return vector has wrong length");
  if (!spec.validity) return true;
  const ValidityRule& rule = *spec.validity;
  const double v = mean_discounted_return[rule.objective];
  return rule.direction == ValidityDirection::kGreater ? v > rule.threshold : v < rule.threshold;
}

}  // namespace morl

#pragma once

#include <Eigen/Dense>
#include <vector>

#include "morl/rng.hpp"

namespace morl {

enum class Activation { kTanh, kRelu };

/// Fully connected network parameters. weights[l] maps layer l to layer l+1,
/// so weights[l] is (layer_sizes[l+1] x layer_sizes[l]) and biases[l] has
/// layer_sizes[l+1] entries. The activation applies to hidden layers only;
/// the output layer is linear.
struct MlpParams {
  std::vector<int> layer_sizes;
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  Activation activation = Activation::kTanh;

  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }
  int num_layers() const { return static_cast<int>(weights.size()); }
};

/// Shape-congruent gradient (or update) buffer for an MlpParams.
struct MlpGradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  static MlpGradients zeros_like(const MlpParams& params);
  void add(const MlpGradients& other, double scale = 1.0);
  void scale(double factor);
  bool all_finite() const;
};

/// Diagonal-Gaussian policy: the MLP outputs the action mean, log_std is a
/// state-independent vector clamped to [-5, 2] after every update.
struct PolicyParams {
  MlpParams mlp;
  Eigen::VectorXd log_std;

  int state_dim() const { return mlp.input_dim(); }
  int action_dim() const { return static_cast<int>(log_std.size()); }
};

/// Vector-output value network: state -> one value per objective.
struct ValueParams {
  MlpParams mlp;

  int num_objectives() const { return mlp.output_dim(); }
};

struct PolicyGradients {
  MlpGradients mlp;
  Eigen::VectorXd log_std;

  static PolicyGradients zeros_like(const PolicyParams& params);
  void add(const PolicyGradients& other, double scale = 1.0);
  bool all_finite() const;
};

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kDefaultLogStdInit = -0.5;

/// Orthogonal-style init: QR of standard-normal draws, gain sqrt(2) for relu
/// hidden layers and 1.0 for tanh, then `final_scale` on the last layer.
MlpParams make_mlp(const std::vector<int>& layer_sizes, Activation activation,
                   RngStream& rng, double final_scale = 1.0);

PolicyParams make_policy(int state_dim, int action_dim,
                         const std::vector<int>& hidden, Activation activation,
                         RngStream& rng);

ValueParams make_value(int state_dim, int num_objectives,
                       const std::vector<int>& hidden, Activation activation,
                       RngStream& rng);

Eigen::VectorXd mlp_forward(const MlpParams& params, const Eigen::VectorXd& input);

/// Post-activation outputs of every layer, input included; feeds the
/// backward pass so batch loops pay one forward per (sample, update).
struct MlpTrace {
  std::vector<Eigen::VectorXd> activations;  // activations[0] is the input
};

Eigen::VectorXd mlp_forward(const MlpParams& params, const Eigen::VectorXd& input,
                            MlpTrace& trace);

/// Gradient of upstream . output with respect to every parameter,
/// reverse-mode through the cached trace. Accumulates into `acc`.
void mlp_backward_accumulate(const MlpParams& params, const MlpTrace& trace,
                             const Eigen::VectorXd& upstream, MlpGradients& acc);

/// Convenience form: forward + reverse in one call.
MlpGradients mlp_backward(const MlpParams& params, const Eigen::VectorXd& input,
                          const Eigen::VectorXd& upstream);

/// log N(action; mu(state), diag(exp(log_std))^2).
double gaussian_log_prob(const PolicyParams& policy, const Eigen::VectorXd& state,
                         const Eigen::VectorXd& action);

/// Same, with the mean already computed (the update loops cache means).
double gaussian_log_prob_from_mean(const Eigen::VectorXd& mean,
                                   const Eigen::VectorXd& log_std,
                                   const Eigen::VectorXd& action);

/// mu(state) + exp(log_std) .* eps, eps ~ N(0, I) from `rng`.
Eigen::VectorXd gaussian_sample(const PolicyParams& policy, const Eigen::VectorXd& state,
                                RngStream& rng);

/// Closed-form KL(p || q) between the two diagonal Gaussians at `state`.
double gaussian_kl(const PolicyParams& p, const PolicyParams& q,
                   const Eigen::VectorXd& state);

/// KL from cached means/log-stds (p is "old", q is "new").
double gaussian_kl_from_moments(const Eigen::VectorXd& mean_p, const Eigen::VectorXd& log_std_p,
                                const Eigen::VectorXd& mean_q, const Eigen::VectorXd& log_std_q);

/// Clamp log_std into [kLogStdMin, kLogStdMax]; call after every update.
void clamp_log_std(PolicyParams& policy);

/// In-place ascent step: params += rate * grad. A rate of exactly zero is a
/// guaranteed no-op (parameters stay bit-identical).
void apply_gradient(MlpParams& params, const MlpGradients& grad, double rate);
void apply_gradient(PolicyParams& params, const PolicyGradients& grad, double rate);

}  // namespace morl

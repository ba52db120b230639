#include "morl/nnet.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "morl/errors.hpp"

namespace morl {
namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2*pi)

Eigen::VectorXd apply_activation(const Eigen::VectorXd& x, Activation act) {
  switch (act) {
    case Activation::kTanh:
      return x.array().tanh();
    case Activation::kRelu:
      return x.cwiseMax(0.0);
  }
  return x;
}

// Derivative of the activation expressed through its post-activation value.
Eigen::VectorXd activation_grad(const Eigen::VectorXd& post, Activation act) {
  switch (act) {
    case Activation::kTanh:
      return 1.0 - post.array().square();
    case Activation::kRelu:
      return (post.array() > 0.0).cast<double>();
  }
  return Eigen::VectorXd::Ones(post.size());
}

// QR of a standard-normal draw, columns sign-fixed by the R diagonal.
Eigen::MatrixXd orthogonal_matrix(int rows, int cols, double gain, RngStream& rng) {
  const int big = std::max(rows, cols);
  const int small = std::min(rows, cols);
  Eigen::MatrixXd a(big, small);
  for (int r = 0; r < big; ++r)
    for (int c = 0; c < small; ++c) a(r, c) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(big, small);
  const Eigen::MatrixXd r = qr.matrixQR().topRows(small).triangularView<Eigen::Upper>();
  for (int c = 0; c < small; ++c)
    if (r(c, c) < 0.0) q.col(c) = -q.col(c);
  if (rows < cols) return gain * q.transpose();
  return gain * q;
}

void check_finite(const Eigen::VectorXd& v, const char* name) {
  if (!v.allFinite()) throw InvalidInput(std::string(name) + " contains non-finite values");
}

}  // namespace

MlpGradients MlpGradients::zeros_like(const MlpParams& params) {
  MlpGradients g;
  g.weights.reserve(params.weights.size());
  g.biases.reserve(params.biases.size());
  for (const auto& w : params.weights) g.weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
  for (const auto& b : params.biases) g.biases.push_back(Eigen::VectorXd::Zero(b.size()));
  return g;
}

void MlpGradients::add(const MlpGradients& other, double scale) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] += scale * other.weights[l];
    biases[l] += scale * other.biases[l];
  }
}

void MlpGradients::scale(double factor) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] *= factor;
    biases[l] *= factor;
  }
}

bool MlpGradients::all_finite() const {
  for (const auto& w : weights)
    if (!w.allFinite()) return false;
  for (const auto& b : biases)
    if (!b.allFinite()) return false;
  return true;
}

PolicyGradients PolicyGradients::zeros_like(const PolicyParams& params) {
  PolicyGradients g;
  g.mlp = MlpGradients::zeros_like(params.mlp);
  g.log_std = Eigen::VectorXd::Zero(params.log_std.size());
  return g;
}

void PolicyGradients::add(const PolicyGradients& other, double scale) {
  mlp.add(other.mlp, scale);
  log_std += scale * other.log_std;
}

bool PolicyGradients::all_finite() const {
  return mlp.all_finite() && log_std.allFinite();
}

MlpParams make_mlp(const std::vector<int>& layer_sizes, Activation activation,
                   RngStream& rng, double final_scale) {
  if (layer_sizes.size() < 2) throw InvalidInput("mlp needs at least input and output layers");
  for (int s : layer_sizes)
    if (s <= 0) throw InvalidInput("layer sizes must be positive");

  MlpParams params;
  params.layer_sizes = layer_sizes;
  params.activation = activation;
  const double hidden_gain = activation == Activation::kRelu ? std::numbers::sqrt2 : 1.0;
  const int last = static_cast<int>(layer_sizes.size()) - 2;
  for (int l = 0; l <= last; ++l) {
    const double gain = (l == last) ? final_scale : hidden_gain;
    params.weights.push_back(orthogonal_matrix(layer_sizes[l + 1], layer_sizes[l], gain, rng));
    params.biases.push_back(Eigen::VectorXd::Zero(layer_sizes[l + 1]));
  }
  return params;
}

PolicyParams make_policy(int state_dim, int action_dim, const std::vector<int>& hidden,
                         Activation activation, RngStream& rng) {
  std::vector<int> sizes;
  sizes.push_back(state_dim);
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(action_dim);
  PolicyParams policy;
  policy.mlp = make_mlp(sizes, activation, rng, 0.01);  // near-zero initial mean
  policy.log_std = Eigen::VectorXd::Constant(action_dim, kDefaultLogStdInit);
  return policy;
}

ValueParams make_value(int state_dim, int num_objectives, const std::vector<int>& hidden,
                       Activation activation, RngStream& rng) {
  std::vector<int> sizes;
  sizes.push_back(state_dim);
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(num_objectives);
  ValueParams value;
  value.mlp = make_mlp(sizes, activation, rng, 1.0);
  return value;
}

Eigen::VectorXd mlp_forward(const MlpParams& params, const Eigen::VectorXd& input) {
  MlpTrace trace;
  return mlp_forward(params, input, trace);
}

Eigen::VectorXd mlp_forward(const MlpParams& params, const Eigen::VectorXd& input,
                            MlpTrace& trace) {
  if (input.size() != params.input_dim())
    throw InvalidInput("mlp_forward: input has length " + std::to_string(input.size()) +
                       ", expected " + std::to_string(params.input_dim()));
  trace.activations.clear();
  trace.activations.reserve(params.weights.size() + 1);
  trace.activations.push_back(input);
  Eigen::VectorXd h = input;
  const int last = params.num_layers() - 1;
  for (int l = 0; l <= last; ++l) {
    Eigen::VectorXd pre = params.weights[l] * h + params.biases[l];
    h = (l == last) ? std::move(pre) : apply_activation(pre, params.activation);
    trace.activations.push_back(h);
  }
  return h;
}

void mlp_backward_accumulate(const MlpParams& params, const MlpTrace& trace,
                             const Eigen::VectorXd& upstream, MlpGradients& acc) {
  const int last = params.num_layers() - 1;
  Eigen::VectorXd delta = upstream;  // d(upstream . out)/d(pre-activation of layer)
  for (int l = last; l >= 0; --l) {
    acc.weights[l].noalias() += delta * trace.activations[l].transpose();
    acc.biases[l] += delta;
    if (l > 0) {
      Eigen::VectorXd back = params.weights[l].transpose() * delta;
      delta = back.cwiseProduct(activation_grad(trace.activations[l], params.activation));
    }
  }
}

MlpGradients mlp_backward(const MlpParams& params, const Eigen::VectorXd& input,
                          const Eigen::VectorXd& upstream) {
  if (upstream.size() != params.output_dim())
    throw InvalidInput("mlp_backward: upstream has length " + std::to_string(upstream.size()) +
                       ", expected " + std::to_string(params.output_dim()));
  MlpTrace trace;
  mlp_forward(params, input, trace);
  MlpGradients grad = MlpGradients::zeros_like(params);
  mlp_backward_accumulate(params, trace, upstream, grad);
  return grad;
}

double gaussian_log_prob_from_mean(const Eigen::VectorXd& mean, const Eigen::VectorXd& log_std,
                                   const Eigen::VectorXd& action) {
  const Eigen::ArrayXd z = (action - mean).array() * (-log_std.array()).exp();
  return -0.5 * (z.square() + 2.0 * log_std.array() + kLog2Pi).sum();
}

double gaussian_log_prob(const PolicyParams& policy, const Eigen::VectorXd& state,
                         const Eigen::VectorXd& action) {
  if (action.size() != policy.action_dim())
    throw InvalidInput("gaussian_log_prob: action dimension mismatch");
  check_finite(state, "state");
  check_finite(action, "action");
  return gaussian_log_prob_from_mean(mlp_forward(policy.mlp, state), policy.log_std, action);
}

Eigen::VectorXd gaussian_sample(const PolicyParams& policy, const Eigen::VectorXd& state,
                                RngStream& rng) {
  Eigen::VectorXd action = mlp_forward(policy.mlp, state);
  for (int d = 0; d < action.size(); ++d)
    action[d] += std::exp(policy.log_std[d]) * rng.normal();
  return action;
}

double gaussian_kl_from_moments(const Eigen::VectorXd& mean_p, const Eigen::VectorXd& log_std_p,
                                const Eigen::VectorXd& mean_q, const Eigen::VectorXd& log_std_q) {
  const Eigen::ArrayXd var_p = (2.0 * log_std_p.array()).exp();
  const Eigen::ArrayXd var_q = (2.0 * log_std_q.array()).exp();
  const Eigen::ArrayXd mean_diff = (mean_p - mean_q).array();
  return (log_std_q.array() - log_std_p.array() +
          (var_p + mean_diff.square()) / (2.0 * var_q) - 0.5)
      .sum();
}

double gaussian_kl(const PolicyParams& p, const PolicyParams& q, const Eigen::VectorXd& state) {
  if (p.action_dim() != q.action_dim())
    throw InvalidInput("gaussian_kl: policies disagree on action dimension");
  return gaussian_kl_from_moments(mlp_forward(p.mlp, state), p.log_std,
                                  mlp_forward(q.mlp, state), q.log_std);
}

void clamp_log_std(PolicyParams& policy) {
  policy.log_std = policy.log_std.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
}

void apply_gradient(MlpParams& params, const MlpGradients& grad, double rate) {
  if (rate == 0.0) return;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    params.weights[l] += rate * grad.weights[l];
    params.biases[l] += rate * grad.biases[l];
  }
}

void apply_gradient(PolicyParams& params, const PolicyGradients& grad, double rate) {
  if (rate == 0.0) return;
  apply_gradient(params.mlp, grad.mlp, rate);
  params.log_std += rate * grad.log_std;
}

}  // namespace morl

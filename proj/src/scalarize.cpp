#include "morl/scalarize.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "morl/errors.hpp"

namespace morl {

PreferenceVector PreferenceVector::from_weights(Eigen::VectorXd weights) {
  if (weights.size() < 1) throw InvalidInput("preference vector is empty");
  if ((weights.array() < 0.0).any())
    throw InvalidInput("preference weights must be non-negative");
  const double sum = weights.sum();
  if (std::abs(sum - 1.0) > 1e-9)
    throw InvalidInput("preference weights sum to " + std::to_string(sum) + ", expected 1");
  return PreferenceVector(std::move(weights));
}

PreferenceVector PreferenceVector::normalized(const Eigen::VectorXd& raw) {
  if ((raw.array() < 0.0).any()) throw InvalidInput("preference weights must be non-negative");
  const double sum = raw.sum();
  if (!(sum > 0.0)) throw InvalidInput("preference weights sum to zero");
  return PreferenceVector(raw / sum);
}

double weighted_sum(const PreferenceVector& omega, const Eigen::VectorXd& v) {
  if (omega.size() != v.size()) throw InvalidInput("weighted_sum: dimension mismatch");
  return omega.weights().dot(v);
}

double chebyshev(const ScalarizationSpec& spec, const PreferenceVector& omega,
                 const Eigen::VectorXd& v, const Eigen::VectorXd& z) {
  if (omega.size() != v.size() || v.size() != z.size())
    throw InvalidInput("chebyshev: dimension mismatch");
  const Eigen::ArrayXd dist = (v - z).array().abs();
  const double p = spec.exponent;
  if (std::isinf(p)) return -(omega.weights().array() * dist).maxCoeff();
  return -std::pow((omega.weights().array() * dist.pow(p)).sum(), 1.0 / p);
}

PreferenceVector sample_preference(int q, RngStream& rng) {
  if (q < 2) throw InvalidInput("sample_preference: need at least two objectives");
  Eigen::VectorXd draws(q);
  for (int i = 0; i < q; ++i) draws[i] = rng.exponential();
  return PreferenceVector::normalized(draws);
}

namespace {

// All compositions of m into q non-negative parts, ascending lexicographic.
void compositions(int m, int q, std::vector<int>& prefix, std::vector<Eigen::VectorXd>& out) {
  if (static_cast<int>(prefix.size()) == q - 1) {
    Eigen::VectorXd w(q);
    int used = 0;
    for (int i = 0; i < q - 1; ++i) {
      w[i] = prefix[i];
      used += prefix[i];
    }
    w[q - 1] = m - used;
    out.push_back(w / static_cast<double>(m));
    return;
  }
  int used = 0;
  for (int v : prefix) used += v;
  for (int c = 0; c <= m - used; ++c) {
    prefix.push_back(c);
    compositions(m, q, prefix, out);
    prefix.pop_back();
  }
}

std::int64_t lattice_size(int m, int q) {
  // C(m + q - 1, q - 1)
  std::int64_t n = 1;
  for (int i = 1; i <= q - 1; ++i) n = n * (m + i) / i;
  return n;
}

}  // namespace

std::vector<PreferenceVector> radial_weights(int q, int n) {
  if (q < 2) throw InvalidInput("radial_weights: need at least two objectives");
  if (n < 2) throw InvalidInput("radial_weights: need at least two weights");

  std::vector<PreferenceVector> out;
  out.reserve(n);
  if (q == 2) {
    for (int k = 0; k < n; ++k) {
      const double a = static_cast<double>(k) / (n - 1);
      Eigen::VectorXd w(2);
      w << a, 1.0 - a;
      out.push_back(PreferenceVector::from_weights(w));
    }
    return out;
  }

  int m = 1;
  while (lattice_size(m, q) < n) ++m;
  std::vector<Eigen::VectorXd> lattice;
  std::vector<int> prefix;
  compositions(m, q, prefix, lattice);
  for (int k = 0; k < n; ++k) out.push_back(PreferenceVector::from_weights(lattice[k]));
  return out;
}

}  // namespace morl

#pragma once

#include <Eigen/Dense>
#include <vector>

#include "morl/rng.hpp"

namespace morl {

/// Non-negative weights over the objectives, summing to one (within 1e-9).
class PreferenceVector {
 public:
  /// Validates the invariants; throws InvalidInput on violation.
  static PreferenceVector from_weights(Eigen::VectorXd weights);

  /// Normalizes arbitrary non-negative weights by their sum.
  static PreferenceVector normalized(const Eigen::VectorXd& raw);

  const Eigen::VectorXd& weights() const { return w_; }
  double operator[](int i) const { return w_[i]; }
  int size() const { return static_cast<int>(w_.size()); }

 private:
  explicit PreferenceVector(Eigen::VectorXd w) : w_(std::move(w)) {}
  Eigen::VectorXd w_;
};

enum class ScalarizationKind { kWeightedSum, kChebyshev };
enum class UtopianPolicy { kBatchMaxPlusMargin, kFixed };

struct ScalarizationSpec {
  ScalarizationKind kind = ScalarizationKind::kWeightedSum;
  double exponent = 2.0;  // p >= 1; +infinity selects the weighted max norm
  UtopianPolicy utopian = UtopianPolicy::kBatchMaxPlusMargin;
  double margin = 1e-3;
  Eigen::VectorXd fixed_utopian;  // used when utopian == kFixed
};

/// sum_i w_i v_i.
double weighted_sum(const PreferenceVector& omega, const Eigen::VectorXd& v);

/// Negated weighted Chebyshev distance to the utopian point z:
/// -(sum_i w_i |v_i - z_i|^p)^(1/p), or -max_i w_i |v_i - z_i| for p = inf.
/// The negation makes larger better, so maximizing moves v toward z.
double chebyshev(const ScalarizationSpec& spec, const PreferenceVector& omega,
                 const Eigen::VectorXd& v, const Eigen::VectorXd& z);

/// Uniform draw from the (q-1)-simplex: unit exponentials normalized by sum.
PreferenceVector sample_preference(int q, RngStream& rng);

/// Deterministic evenly spread weights for the radial baseline.
/// q = 2: endpoints-inclusive linear sweep. q >= 3: simplex lattice at the
/// smallest granularity whose size reaches n, truncated to the first n
/// compositions in lexicographic order.
std::vector<PreferenceVector> radial_weights(int q, int n);

}  // namespace morl

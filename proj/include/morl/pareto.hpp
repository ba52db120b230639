#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "morl/rng.hpp"

namespace morl {

/// Pareto dominance under maximization: u >= v everywhere, > somewhere.
bool dominates(const Eigen::VectorXd& u, const Eigen::VectorXd& v);

/// Indices (ascending) of points not dominated by any other point.
/// Identical points are all retained; none dominates its copy.
std::vector<int> non_dominated(const std::vector<Eigen::VectorXd>& points);

/// Componentwise minimum minus margin: the nadir-side anchor every input
/// point dominates (strictly, for margin > 0).
Eigen::VectorXd reference_point(const std::vector<Eigen::VectorXd>& points, double margin);

/// Exact Lebesgue measure of the union of boxes [ref, p], maximization
/// convention. Dimension-sweep recursion on the last coordinate with a
/// sorted 2-D sweep as the base case. Supports 2 <= q <= 4; points that do
/// not strictly dominate ref contribute nothing.
double hypervolume(const std::vector<Eigen::VectorXd>& points, const Eigen::VectorXd& ref);

struct McEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

/// Monte-Carlo hypervolume over the bounding box [ref, componentwise max].
/// Any q >= 1. With one sample the hit fraction is 0 or 1, so the standard
/// error degenerates to zero; that edge is intentional.
McEstimate hypervolume_mc(const std::vector<Eigen::VectorXd>& points, const Eigen::VectorXd& ref,
                          std::int64_t samples, RngStream& rng);

struct ParetoEntry {
  int policy_id = 0;
  Eigen::VectorXd omega;
  Eigen::VectorXd mean_return;
  bool valid = false;
  bool non_dominated = false;
};

/// Evaluated policies with dominance bookkeeping. The reference point and
/// hypervolume are filled in by whoever fixes the comparison frame.
struct ParetoArchive {
  std::vector<ParetoEntry> entries;
  Eigen::VectorXd reference;  // size 0 until set
  std::optional<double> hypervolume;

  int valid_count() const;
  int non_dominated_count() const;
  std::vector<Eigen::VectorXd> valid_returns() const;
};

/// Recompute the non_dominated flags over the valid entries.
void mark_non_dominated(ParetoArchive& archive);

}  // namespace morl

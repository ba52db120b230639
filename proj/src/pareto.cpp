#include "morl/pareto.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "morl/errors.hpp"

namespace morl {

bool dominates(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  if (u.size() != v.size()) throw InvalidInput("dominates: length mismatch");
  bool strict = false;
  for (int i = 0; i < u.size(); ++i) {
    if (u[i] < v[i]) return false;
    if (u[i] > v[i]) strict = true;
  }
  return strict;
}

std::vector<int> non_dominated(const std::vector<Eigen::VectorXd>& points) {
  if (points.empty()) throw InvalidInput("non_dominated: empty point set");
  // Simple cull: maintain the running set of maximal points.
  std::vector<int> candidates;
  for (int i = 0; i < static_cast<int>(points.size()); ++i) {
    bool beaten = false;
    for (int c : candidates) {
      if (dominates(points[c], points[i])) {
        beaten = true;
        break;
      }
    }
    if (beaten) continue;
    std::erase_if(candidates, [&](int c) { return dominates(points[i], points[c]); });
    candidates.push_back(i);
  }
  std::sort(candidates.begin(), candidates.end());
  return candidates;
}

Eigen::VectorXd reference_point(const std::vector<Eigen::VectorXd>& points, double margin) {
  if (points.empty()) throw InvalidInput("reference_point: empty point set");
  if (margin < 0.0) throw InvalidInput("reference_point: margin must be non-negative");
  Eigen::VectorXd ref = points.front();
  for (const auto& p : points) ref = ref.cwiseMin(p);
  return ref.array() - margin;
}

namespace {

// Union area of 2-D boxes [ref, p] by a sorted sweep over the first coordinate.
double hv2(std::vector<Eigen::VectorXd> pts, double ref0, double ref1) {
  std::sort(pts.begin(), pts.end(),
            [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return a[0] > b[0]; });
  double area = 0.0;
  double covered_y = ref1;
  for (const auto& p : pts) {
    if (p[1] > covered_y) {
      area += (p[0] - ref0) * (p[1] - covered_y);
      covered_y = p[1];
    }
  }
  return area;
}

// Slices along coordinate `dim - 1`, recursing on the prefix that reaches
// each slab. Exponential in q in the worst case, fine for q <= 4.
double hv_sweep(const std::vector<Eigen::VectorXd>& pts, const Eigen::VectorXd& ref, int dim) {
  if (pts.empty()) return 0.0;
  if (dim == 2) return hv2(pts, ref[0], ref[1]);

  const int d = dim - 1;
  std::vector<int> order(pts.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return pts[a][d] > pts[b][d]; });

  double volume = 0.0;
  std::vector<Eigen::VectorXd> active;
  active.reserve(pts.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    active.push_back(pts[order[k]].head(d));
    const double top = pts[order[k]][d];
    const double bottom = (k + 1 < order.size()) ? pts[order[k + 1]][d] : ref[d];
    if (top > bottom) volume += hv_sweep(active, ref, d) * (top - bottom);
  }
  return volume;
}

}  // namespace

double hypervolume(const std::vector<Eigen::VectorXd>& points, const Eigen::VectorXd& ref) {
  const int q = static_cast<int>(ref.size());
  if (q < 2 || q > 4)
    throw UnsupportedDimension("hypervolume: exact computation supports q in [2,4], got q=" +
                               std::to_string(q));
  std::vector<Eigen::VectorXd> relevant;
  relevant.reserve(points.size());
  for (const auto& p : points) {
    if (p.size() != q) throw InvalidInput("hypervolume: point dimension mismatch");
    if ((p.array() > ref.array()).all()) relevant.push_back(p);
  }
  return hv_sweep(relevant, ref, q);
}

McEstimate hypervolume_mc(const std::vector<Eigen::VectorXd>& points, const Eigen::VectorXd& ref,
                          std::int64_t samples, RngStream& rng) {
  if (samples < 1) throw InvalidInput("hypervolume_mc: need at least one sample");
  const int q = static_cast<int>(ref.size());
  Eigen::VectorXd hi = ref;
  for (const auto& p : points) {
    if (p.size() != q) throw InvalidInput("hypervolume_mc: point dimension mismatch");
    hi = hi.cwiseMax(p);
  }
  const Eigen::VectorXd span = hi - ref;
  const double box_volume = span.prod();
  if (box_volume <= 0.0) return {0.0, 0.0};

  std::int64_t hits = 0;
  Eigen::VectorXd x(q);
  for (std::int64_t s = 0; s < samples; ++s) {
    for (int i = 0; i < q; ++i) x[i] = ref[i] + span[i] * rng.uniform();
    for (const auto& p : points) {
      if ((x.array() <= p.array()).all()) {
        ++hits;
        break;
      }
    }
  }
  const double frac = static_cast<double>(hits) / static_cast<double>(samples);
  McEstimate est;
  est.estimate = box_volume * frac;
  est.std_error = box_volume * std::sqrt(frac * (1.0 - frac) / static_cast<double>(samples));
  return est;
}

int ParetoArchive::valid_count() const {
  int n = 0;
  for (const auto& e : entries) n += e.valid ? 1 : 0;
  return n;
}

int ParetoArchive::non_dominated_count() const {
  int n = 0;
  for (const auto& e : entries) n += e.non_dominated ? 1 : 0;
  return n;
}

std::vector<Eigen::VectorXd> ParetoArchive::valid_returns() const {
  std::vector<Eigen::VectorXd> out;
  for (const auto& e : entries)
    if (e.valid) out.push_back(e.mean_return);
  return out;
}

void mark_non_dominated(ParetoArchive& archive) {
  for (auto& e : archive.entries) e.non_dominated = false;
  std::vector<int> valid_idx;
  std::vector<Eigen::VectorXd> pts;
  for (int i = 0; i < static_cast<int>(archive.entries.size()); ++i) {
    if (archive.entries[i].valid) {
      valid_idx.push_back(i);
      pts.push_back(archive.entries[i].mean_return);
    }
  }
  if (pts.empty()) return;
  for (int k : non_dominated(pts)) archive.entries[valid_idx[k]].non_dominated = true;
}

}  // namespace morl

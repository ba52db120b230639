#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "morl/errors.hpp"
#include "morl/pareto.hpp"
#include "morl/rng.hpp"

using namespace morl;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> vs) {
  Eigen::VectorXd v(static_cast<int>(vs.size()));
  int i = 0;
  for (double x : vs) v[i++] = x;
  return v;
}

// Independent O(n^2) oracle: a point survives iff nothing dominates it.
std::vector<int> brute_force_front(const std::vector<Eigen::VectorXd>& pts) {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(pts.size()); ++i) {
    bool dominated = false;
    for (int j = 0; j < static_cast<int>(pts.size()) && !dominated; ++j)
      if (j != i && dominates(pts[j], pts[i])) dominated = true;
    if (!dominated) out.push_back(i);
  }
  return out;
}

std::vector<Eigen::VectorXd> random_points(int n, int q, RngStream& rng) {
  std::vector<Eigen::VectorXd> pts;
  pts.reserve(n);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd p(q);
    for (int d = 0; d < q; ++d) p[d] = rng.uniform();
    pts.push_back(p);
  }
  return pts;
}

}  // namespace

TEST_CASE("dominates basics") {
  CHECK(dominates(vec({1, 2}), vec({1, 1})));
  CHECK(!dominates(vec({1, 2}), vec({2, 1})));
  CHECK(!dominates(vec({2, 1}), vec({1, 2})));
  CHECK(!dominates(vec({1, 1}), vec({1, 1})));
  CHECK_THROWS_AS(dominates(vec({1, 2}), vec({1, 2, 3})), InvalidInput);
}

TEST_CASE("dominates is a strict partial order on random triples") {
  RngStream rng(17);
  for (int t = 0; t < 500; ++t) {
    RngStream draw = rng.child(t);
    Eigen::VectorXd a(3), b(3), c(3);
    for (int i = 0; i < 3; ++i) {
      // coarse grid makes ties and comparabilities common
      a[i] = std::floor(draw.uniform() * 4);
      b[i] = std::floor(draw.uniform() * 4);
      c[i] = std::floor(draw.uniform() * 4);
    }
    CHECK(!dominates(a, a));                                  // irreflexive
    if (dominates(a, b)) CHECK(!dominates(b, a));             // antisymmetric
    if (dominates(a, b) && dominates(b, c)) CHECK(dominates(a, c));  // transitive
  }
}

TEST_CASE("non_dominated small cases") {
  CHECK(non_dominated({vec({1, 0}), vec({0, 1}), vec({0.4, 0.4})}) ==
        std::vector<int>{0, 1, 2});
  CHECK(non_dominated({vec({1, 1}), vec({0, 0})}) == std::vector<int>{0});
  // identical points are all retained
  CHECK(non_dominated({vec({1, 1}), vec({1, 1})}) == std::vector<int>{0, 1});
  const std::vector<Eigen::VectorXd> empty;
  CHECK_THROWS_AS(non_dominated(empty), InvalidInput);
}

TEST_CASE("non_dominated equals the brute-force oracle on random sets") {
  RngStream rng(1001);
  for (int q : {2, 3, 4}) {
    for (int trial = 0; trial < 10; ++trial) {
      RngStream draw = rng.child(q * 100 + trial);
      const auto pts = random_points(500, q, draw);
      CHECK(non_dominated(pts) == brute_force_front(pts));
    }
  }
}

TEST_CASE("reference_point basics") {
  CHECK(reference_point({vec({1, 2}), vec({3, 0})}, 0.0) == vec({1, 0}));
  const auto single = reference_point({vec({2, 5})}, 0.5);
  CHECK(single == vec({1.5, 4.5}));
  RngStream rng(77);
  const auto pts = random_points(50, 3, rng);
  const auto ref = reference_point(pts, 0.1);
  for (const auto& p : pts) CHECK(dominates(p, ref));
}

TEST_CASE("hypervolume hand values") {
  CHECK(hypervolume({vec({1, 1})}, vec({0, 0})) == doctest::Approx(1.0).epsilon(1e-15));
  // inclusion-exclusion: 2 + 2 - 1
  CHECK(hypervolume({vec({2, 1}), vec({1, 2})}, vec({0, 0})) ==
        doctest::Approx(3.0).epsilon(1e-15));
  // 1 + 0.25 * 2 - 0.25 * 1
  CHECK(hypervolume({vec({1, 1, 1}), vec({0.5, 0.5, 2})}, vec({0, 0, 0})) ==
        doctest::Approx(1.25).epsilon(1e-15));
  // points outside the box contribute nothing
  CHECK(hypervolume({vec({1, 1}), vec({-1, 5})}, vec({0, 0})) ==
        doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(hypervolume({vec({1})}, vec({0})), UnsupportedDimension);
  Eigen::VectorXd five = Eigen::VectorXd::Ones(5);
  CHECK_THROWS_AS(hypervolume({five}, Eigen::VectorXd::Zero(5)), UnsupportedDimension);
}

TEST_CASE("hypervolume is monotone under adding points") {
  RngStream rng(2002);
  for (int q : {2, 3, 4}) {
    RngStream draw = rng.child(q);
    auto pts = random_points(20, q, draw);
    const Eigen::VectorXd ref = Eigen::VectorXd::Zero(q);
    std::vector<Eigen::VectorXd> prefix;
    double last = 0.0;
    for (const auto& p : pts) {
      prefix.push_back(p);
      const double hv = hypervolume(prefix, ref);
      CHECK(hv >= last - 1e-12);
      last = hv;
    }
  }
}

TEST_CASE("hypervolume ignores dominated points") {
  RngStream rng(3003);
  for (int q : {2, 3, 4}) {
    for (int trial = 0; trial < 20; ++trial) {
      RngStream draw = rng.child(q * 100 + trial);
      const auto pts = random_points(30, q, draw);
      const Eigen::VectorXd ref = Eigen::VectorXd::Constant(q, -0.1);
      std::vector<Eigen::VectorXd> front;
      for (int i : non_dominated(pts)) front.push_back(pts[i]);
      CHECK(hypervolume(pts, ref) == doctest::Approx(hypervolume(front, ref)).epsilon(1e-12));
    }
  }
}

TEST_CASE("hypervolume is translation equivariant") {
  RngStream rng(4004);
  for (int q : {2, 3, 4}) {
    RngStream draw = rng.child(q);
    auto pts = random_points(25, q, draw);
    const Eigen::VectorXd ref = Eigen::VectorXd::Zero(q);
    Eigen::VectorXd shift(q);
    for (int d = 0; d < q; ++d) shift[d] = draw.normal();
    std::vector<Eigen::VectorXd> moved;
    for (const auto& p : pts) moved.push_back(p + shift);
    CHECK(hypervolume(pts, ref) ==
          doctest::Approx(hypervolume(moved, ref + shift)).epsilon(1e-12));
  }
}

TEST_CASE("hypervolume is invariant under permuting objectives") {
  RngStream rng(5005);
  for (int q : {3, 4}) {
    RngStream draw = rng.child(q);
    auto pts = random_points(25, q, draw);
    Eigen::VectorXd ref(q);
    for (int d = 0; d < q; ++d) ref[d] = -0.2 * draw.uniform();
    std::vector<int> perm(q);
    for (int d = 0; d < q; ++d) perm[d] = (d + 1) % q;  // cyclic shift
    std::vector<Eigen::VectorXd> permuted;
    for (const auto& p : pts) {
      Eigen::VectorXd pp(q);
      for (int d = 0; d < q; ++d) pp[d] = p[perm[d]];
      permuted.push_back(pp);
    }
    Eigen::VectorXd pref(q);
    for (int d = 0; d < q; ++d) pref[d] = ref[perm[d]];
    CHECK(hypervolume(pts, ref) ==
          doctest::Approx(hypervolume(permuted, pref)).epsilon(1e-12));
  }
}

TEST_CASE("hypervolume_mc agrees with the exact value") {
  RngStream rng(6006);
  // whole box covered: estimate is exact with zero error
  RngStream draw0 = rng.child(0);
  const McEstimate whole = hypervolume_mc({vec({1, 1})}, vec({0, 0}), 2000, draw0);
  CHECK(whole.estimate == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(whole.std_error == 0.0);

  int ok = 0;
  const int trials = 30;
  for (int t = 0; t < trials; ++t) {
    RngStream draw = rng.child(10 + t);
    const int q = 2 + t % 3;
    const auto pts = random_points(12, q, draw);
    const Eigen::VectorXd ref = Eigen::VectorXd::Zero(q);
    const double exact = hypervolume(pts, ref);
    const McEstimate est = hypervolume_mc(pts, ref, 100000, draw);
    if (std::abs(exact - est.estimate) <= 3.0 * std::max(est.std_error, 1e-12)) ++ok;
  }
  CHECK(ok >= trials - 1);
}

TEST_CASE("hypervolume_mc single-sample edge is finite") {
  RngStream rng(7007);
  const McEstimate est = hypervolume_mc({vec({1, 1})}, vec({0, 0}), 1, rng);
  CHECK(std::isfinite(est.estimate));
  CHECK(est.std_error == 0.0);
}

TEST_CASE("archive dominance marking respects validity") {
  ParetoArchive archive;
  for (int i = 0; i < 3; ++i) {
    ParetoEntry e;
    e.policy_id = i;
    e.omega = vec({0.5, 0.5});
    archive.entries.push_back(e);
  }
  archive.entries[0].mean_return = vec({1, 1});
  archive.entries[0].valid = true;
  archive.entries[1].mean_return = vec({2, 2});  // would dominate, but invalid
  archive.entries[1].valid = false;
  archive.entries[2].mean_return = vec({0, 0});
  archive.entries[2].valid = true;
  mark_non_dominated(archive);
  CHECK(archive.entries[0].non_dominated);
  CHECK(!archive.entries[1].non_dominated);
  CHECK(!archive.entries[2].non_dominated);
  CHECK(archive.valid_count() == 2);
  CHECK(archive.non_dominated_count() == 1);
}

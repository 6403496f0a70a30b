#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "mbp/diagnostics.hpp"

using namespace mbp;

namespace {

std::vector<double> costs(const Congestion& f, const QueueState& s) {
  std::vector<double> c(s.q.size());
  for (std::size_t j = 0; j < c.size(); ++j) c[j] = f.cost(static_cast<int>(j), s.q[j]);
  return c;
}

bool interior(const QueueState& s) {
  for (std::size_t j = 0; j < s.q.size(); ++j)
    if (s.q[j] == 0 || s.q[j] == s.cap[j]) return false;
  return true;
}

}  // namespace

TEST_CASE("one-period loss is covered by the drift decomposition") {
  struct Case {
    NetworkSpec spec;
    CongestionConfig cfg;
    std::int64_t K;
  };
  std::vector<Case> cases = {
      {example_cycle(0.1), {CongestionKind::InverseSqrt, std::nullopt}, 300},
      {example_cycle(0.1), {CongestionKind::Logarithmic, std::nullopt}, 300},
      {fixtures::buffered_jea(), {CongestionKind::InverseSqrtBuffered, std::nullopt}, 500},
      {fixtures::pricing_pair(0.0, 1.0, 0.2), {CongestionKind::InverseSqrt, std::nullopt}, 200},
  };
  std::mt19937_64 rng(21);
  for (auto& c : cases) {
    Congestion f(c.spec, c.K, c.cfg);
    double W = solve_spp(c.spec, c.spec.demand.phi).W;
    for (int i = 0; i < 300; ++i) {
      QueueState s = uniform_state(c.spec, c.K, rng);
      DriftTerms d = drift_terms(c.spec, f, s, c.spec.demand.phi, W);
      REQUIRE(d.lhs <= d.rhs_conservative() + 1e-9);
      // Away from the boundary the loss splits exactly.
      if (!d.boundary) REQUIRE(std::abs(d.lhs - (d.V1 + d.V3 + d.remainder)) <= 1e-9);
      CHECK(d.remainder >= -1e-12);
      CHECK(d.V3 <= 1e-9);  // weak duality
    }
  }
}

TEST_CASE("dual suboptimality bound") {
  NetworkSpec s = example_cycle(0.1);
  const std::int64_t K = 400;
  Congestion f(s, K, {CongestionKind::InverseSqrt, std::nullopt});
  double W = solve_spp(s, s.demand.phi).W;
  double alpha = connectivity_alpha(s, s.demand.phi);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 500; ++i) {
    QueueState st = uniform_state(s, K, rng);
    REQUIRE(dual_subopt_bound(s, f, st, s.demand.phi, W, alpha).holds());
  }
  // A corner is far out on the potential and the bound bites.
  DualBound corner = dual_subopt_bound(s, f, corner_state(s, K, 0), s.demand.phi, W, alpha);
  CHECK(corner.bound < 0.0);
  CHECK(corner.holds());
}

TEST_CASE("expected drift is a subgradient of the dual at interior states") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> N(0.0, 1.0);
  for (int inst = 0; inst < 3; ++inst) {
    NetworkSpec s = inst == 0 ? example_cycle(0.1) : inst == 1 ? fixtures::buffered_jea() : fixtures::random_entry(5, rng);
    const std::int64_t K = 200;
    Congestion f(s, K, {inst == 1 ? CongestionKind::InverseSqrtBuffered : CongestionKind::InverseSqrt, std::nullopt});
    int checked = 0;
    while (checked < 30) {
      QueueState st = uniform_state(s, K, rng);
      if (!interior(st)) continue;
      ++checked;
      auto y = costs(f, st);
      auto sub = mbp_drift(s, f, st, s.demand.phi);
      for (int r = 0; r < 30; ++r) {
        std::vector<double> y2 = y;
        for (double& v : y2) v += N(rng);
        REQUIRE(subgradient_slack(s, s.demand.phi, y, sub, y2) >= -1e-9);
      }
    }
  }
}

TEST_CASE("bregman divergence is non-negative and zero on the diagonal") {
  NetworkSpec s = example_cycle(0.1);
  Congestion f(s, 100, {CongestionKind::InverseSqrt, std::nullopt});
  std::vector<double> a{0.2, 0.3, 0.5}, b{0.4, 0.4, 0.2};
  CHECK(bregman(f, a, a) == doctest::Approx(0.0));
  CHECK(bregman(f, a, b) > 0.0);
  CHECK(bregman(f, b, a) > 0.0);
}

TEST_CASE("lyapunov increments telescope along a trajectory") {
  NetworkSpec s = example_cycle(0.1);
  RunConfig cfg;
  cfg.K = 100;
  cfg.T = 20000;
  cfg.record_lyapunov = true;
  Policy p(s, cfg.K, {PolicyKind::MBP, {CongestionKind::InverseSqrt, std::nullopt}});
  RunMetrics r = run(s, p, cfg);
  const Congestion& f = *p.congestion();
  QueueState s0 = balanced_state(s, cfg.K);
  std::vector<double> q0(s.m);
  for (int j = 0; j < s.m; ++j) q0[j] = f.qbar(j, s0.q[j]);
  TelescopeReport t = telescoping_check(f, f.lyapunov(q0), r.lyapunov);
  CHECK(t.abs_error <= 1e-9);
}

TEST_CASE("linear prices have a fixed point outside the simplex when c is small") {
  BpCounterexample r = bp_counterexample(1.0, 1.0, 0.05, 3000);
  CHECK(r.q2_star == doctest::Approx(-1.0 / 6.0));
  CHECK_FALSE(r.interior);
  BpCounterexample ok = bp_counterexample(1.0, 2.0, 0.05, 3000);
  CHECK(ok.q2_star == doctest::Approx(1.0 / 12.0));
  CHECK(ok.interior);
  // Positive drift at the probe for small eps.
  BpCounterexample probe = bp_counterexample(1.0, 2.0, 0.02, 30000);
  CHECK(probe.drift_at_probe > 0.0);
}

#include <atomic>
#include <cmath>
#include <set>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "mbp/harness.hpp"

using namespace mbp;

TEST_CASE("replication seeds differ across cells, replications and starts") {
  std::set<std::uint64_t> seen;
  for (std::size_t c = 0; c < 4; ++c)
    for (int r = 0; r < 50; ++r)
      for (std::size_t i = 0; i < 3; ++i) seen.insert(replication_seed(7, c, r, i));
  CHECK(seen.size() == 600);
  CHECK(replication_seed(7, 1, 2, 0) == replication_seed(7, 1, 2, 0));
}

TEST_CASE("parallel loop visits every index once") {
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(hits.size(), 3, [&](std::size_t i) { hits[i]++; });
  for (auto& h : hits) CHECK(h.load() == 1);
}

TEST_CASE("log-log slope recovers a power law") {
  std::vector<double> x{50, 200, 800}, y;
  for (double v : x) y.push_back(3.0 / v);
  CHECK(loglog_slope(x, y) == doctest::Approx(-1.0));
}

TEST_CASE("centred dual values have mean zero under the current rates") {
  NetworkSpec s = example_cycle(0.1);
  s.demand = DemandModel::sinusoid(s.demand.phi, {0.05, -0.05, 0.05, -0.05}, 1e-3);
  DualValues dv(s);
  for (std::int64_t t : {0, 17, 400, 1234}) {
    auto phi = s.demand.rates_at(t);
    double mean = 0.0;
    for (int tau = 0; tau < 4; ++tau) mean += phi[tau] * dv.centred(t, tau);
    CHECK(std::abs(mean) < 1e-12);
  }
}

TEST_CASE("sinusoid benchmark matches a direct average") {
  NetworkSpec s = example_cycle(1.0 / 6.0);
  s.demand = DemandModel::sinusoid(s.demand.phi, {0.1, -0.1, 0.1, -0.1}, 4e-3);
  double direct = 0.0;
  const std::int64_t T = 2000;
  for (std::int64_t t = 10; t < 10 + T; ++t) direct += solve_spp(s, s.demand.rates_at(t)).W;
  direct /= T;
  CHECK(benchmark_value(s, 10, T) == doctest::Approx(direct).epsilon(1e-4));
  CHECK(averaged_rates_value(s, 10, T) >= benchmark_value(s, 10, T) - 1e-9);
}

TEST_CASE("experiments from json and the control variate") {
  json j = {
      {"instance", network_to_json(example_cycle(0.1))},
      {"policies", {{{"policy", "mbp"}, {"congestion", {{"kind", "inv_sqrt"}}}}, {{"policy", "greedy"}}}},
      {"K", {30}},
      {"T_per_K", 500},
      {"replications", 8},
      {"seed", 3},
  };
  Experiment ex = experiment_from_json(j, ".");
  REQUIRE(ex.policies.size() == 2);
  REQUIRE(ex.cells.size() == 1);
  CHECK(ex.cells[0].T == 15000);
  auto plain = run_experiment(ex);
  ex.control_variate = true;
  auto cv = run_experiment(ex);
  REQUIRE(plain.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(std::abs(plain[i].mean_W - cv[i].mean_W) < 4.0 * plain[i].se + 1e-12);
    CHECK(plain[i].bound == doctest::Approx(plain[i].W_upper + 3.0 * 30 / 15000.0));
  }
  CHECK(cv[0].se < plain[0].se);
  std::ostringstream os;
  write_reports_csv(os, cv);
  CHECK(os.str().rfind("policy,K,T,", 0) == 0);
  CHECK(to_json(cv[0]).at("policy") == "mbp");
}

TEST_CASE("static policy refuses time-varying rates") {
  Experiment ex;
  ex.spec = example_cycle(0.1);
  ex.spec.demand = DemandModel::sinusoid(ex.spec.demand.phi, {0.05, -0.05, 0.05, -0.05}, 1e-3);
  ex.policies = {{"static", {PolicyKind::StaticFluid, {}}}};
  ex.cells = {{20, 100}};
  ex.replications = 1;
  try {
    run_experiment(ex);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotSupported);
  }
}

TEST_CASE("instances survive a json round trip") {
  std::vector<NetworkSpec> specs = {example_cycle(0.05), example_buffered(), fixtures::pricing_pair(0.1, 2.0, 0.3),
                                    fixtures::scrip_ring(4)};
  specs[1].demand = DemandModel::sinusoid(specs[1].demand.phi, {0.1, -0.1, 0.05, -0.05}, 1e-4, 0.3);
  for (const auto& s : specs) {
    NetworkSpec back = network_from_json(network_to_json(s));
    REQUIRE(back.types.size() == s.types.size());
    CHECK(back.setting == s.setting);
    CHECK(back.buffers == s.buffers);
    for (std::size_t i = 0; i < s.types.size(); ++i) {
      CHECK(back.types[i].payoff == s.types[i].payoff);
      CHECK(back.types[i].dropoff == s.types[i].dropoff);
    }
    for (std::int64_t t : {0, 999}) {
      auto a = s.demand.rates_at(t), b = back.demand.rates_at(t);
      for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-14));
    }
  }
}

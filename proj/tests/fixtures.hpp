#pragma once

#include <random>

#include "mbp/diagnostics.hpp"
#include "mbp/network.hpp"

namespace fixtures {

inline mbp::NetworkSpec two_node(double w = 1.0) {
  mbp::NetworkSpec s;
  s.m = 2;
  s.types = {{"ab", {0}, {1}, {w}, {}, {}}, {"ba", {1}, {0}, {w}, {}, {}}};
  s.demand.phi = {0.5, 0.5};
  mbp::finalize(s);
  return s;
}

inline mbp::NetworkSpec buffered_jea() { return mbp::example_buffered(); }

inline mbp::NetworkSpec scrip_ring(int m = 4) {
  mbp::NetworkSpec s;
  s.setting = mbp::Setting::Scrip;
  s.m = m;
  for (int j = 0; j < m; ++j) {
    mbp::DemandType t;
    t.id = "r" + std::to_string(j);
    t.pickup = {j};
    for (int k = 0; k < m; ++k)
      if (k != j && (k == (j + 1) % m || k == (j + 2) % m)) t.dropoff.push_back(k);
    t.payoff = {1.0};
    s.types.push_back(t);
    s.demand.phi.push_back(1.0 / m);
  }
  mbp::finalize(s);
  return s;
}

inline mbp::NetworkSpec pricing_pair(double pmin = 0.0, double pmax = 1.0, double cost = 0.0, bool done = true) {
  mbp::NetworkSpec s;
  s.setting = mbp::Setting::JPA;
  s.m = 2;
  for (int j = 0; j < 2; ++j) {
    mbp::DemandType t;
    t.id = j == 0 ? "ab" : "ba";
    t.pickup = {j};
    t.dropoff = {1 - j};
    t.cost = {j == 0 ? cost : 0.0};
    t.wtp.pmin = pmin;
    t.wtp.pmax = pmax;
    s.types.push_back(t);
  }
  s.demand.phi = {0.5, 0.5};
  if (done) mbp::finalize(s);
  return s;
}

// Random strongly connected entry-control network with a ring backbone.
inline mbp::NetworkSpec random_entry(int m, std::mt19937_64& rng, int extra = 4) {
  mbp::NetworkSpec s;
  s.m = m;
  std::uniform_real_distribution<double> U(0.1, 1.0);
  std::uniform_int_distribution<int> node(0, m - 1);
  std::vector<double> rates;
  auto add = [&](int j, int k) {
    s.types.push_back({std::to_string(j) + "-" + std::to_string(k), {j}, {k}, {U(rng)}, {}, {}});
    rates.push_back(U(rng));
  };
  for (int j = 0; j < m; ++j) add(j, (j + 1) % m);
  for (int e = 0; e < extra; ++e) {
    int j = node(rng), k = node(rng);
    if (j != k) add(j, k);
  }
  double total = 0.0;
  for (double r : rates) total += r;
  for (double& r : rates) r /= total;
  s.demand.phi = rates;
  mbp::finalize(s);
  return s;
}

}  // namespace fixtures

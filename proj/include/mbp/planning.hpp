#pragma once

#include <optional>
#include <span>
#include <vector>

#include "mbp/lp.hpp"
#include "mbp/network.hpp"

namespace mbp {

struct SupplyCap {
  double cap = 0.0;  // bound on sum of delay * flow, in units per period
};

struct SppSolution {
  double W = 0.0;
  // z[tau][a * |D| + b]: flow of type tau served from pickup a to dropoff b.
  std::vector<std::vector<double>> z;
  // Node prices minimizing the dual, normalized so that y[0] = 0.
  std::vector<double> y;
  // Fraction of each type that is served (the realized-demand fraction under pricing).
  std::vector<double> served;
  std::vector<double> price;  // pricing only
  LpCertificate cert;
  int iterations = 0;
  double gap = 0.0;  // final duality gap bound of the iterative pricing solver
};

SppSolution solve_spp(const NetworkSpec& spec, std::span<const double> phi,
                      std::optional<SupplyCap> supply = std::nullopt);

struct FrankWolfeOptions {
  int max_iterations = 10000;
  double rel_gap = 1e-8;
};

// Pricing version: concave revenue in the served fraction per type, solved by
// Frank-Wolfe with away steps over the flow polytope.
SppSolution solve_spp_jpa(const NetworkSpec& spec, std::span<const double> phi, FrankWolfeOptions opt = {});

double eval_dual(const NetworkSpec& spec, std::span<const double> phi, std::span<const double> y);
// Value and one subgradient.
double eval_dual(const NetworkSpec& spec, std::span<const double> phi, std::span<const double> y,
                 std::vector<double>& subgradient);

inline double payoff_upper_bound(double W_spp, int m, std::int64_t K, std::int64_t T) {
  return W_spp + static_cast<double>(m) * static_cast<double>(K) / static_cast<double>(T);
}

struct FlowArc {
  int from = 0;
  int to = 0;
  double flow = 0.0;
};

struct FlowDecomposition {
  std::vector<double> cyclic;   // per arc, a sum of directed cycles
  std::vector<double> acyclic;  // per arc, the remainder
  std::vector<int> topo_order;  // node order in which every remaining arc points forward
  int cycles = 0;
};

FlowDecomposition flow_decompose(int m, const std::vector<FlowArc>& arcs);
std::vector<FlowArc> spp_arcs(const NetworkSpec& spec, const SppSolution& sol);

struct AveragedSppReport {
  double W_avg = 0.0;     // optimum under the time-averaged rates
  double eta = 0.0;       // measured max l1 change between periods
  double min_margin = 0.0;
  std::vector<double> W_t;
};

AveragedSppReport averaged_spp_gap_check(const NetworkSpec& spec, const std::vector<std::vector<double>>& sequence);

}  // namespace mbp

#pragma once

#include <span>
#include <vector>

#include "mbp/congestion.hpp"
#include "mbp/network.hpp"
#include "mbp/planning.hpp"
#include "mbp/simulator.hpp"

namespace mbp {

// One-period decomposition of the payoff loss of the mirror policy at a state,
// computed by enumerating the demand types.
struct DriftTerms {
  double lhs = 0.0;  // W - E[v]
  double V1 = 0.0;   // Ktilde * (F(q) - E[F(q')])
  double V2 = 0.0;   // max |f'| / (2 Ktilde)
  double V2c = 0.0;  // max f' over reachable neighbours / Ktilde
  double V3 = 0.0;   // W - g(f(q))
  double V4 = 0.0;   // 1 if some queue is empty or full
  double remainder = 0.0;  // Ktilde * E[Bregman(q', q)]
  bool boundary = false;

  double rhs() const { return V1 + V2 + V3 + V4; }
  double rhs_conservative() const { return V1 + V2c + V3 + V4; }
};

DriftTerms drift_terms(const NetworkSpec& spec, const Congestion& f, const QueueState& s, std::span<const double> phi,
                       double W_spp);

struct DualBound {
  double V3 = 0.0;
  double bound = 0.0;  // -alpha * [max f - min f - 2m]^+
  bool holds() const { return V3 <= bound + 1e-9; }
};

DualBound dual_subopt_bound(const NetworkSpec& spec, const Congestion& f, const QueueState& s,
                            std::span<const double> phi, double W_spp, double alpha);

// F(q1) - F(q2) - f(q2).(q1 - q2)
double bregman(const Congestion& f, std::span<const double> q1, std::span<const double> q2);

// g(y') - g(y) - s.(y' - y), non-negative when s is a subgradient at y.
double subgradient_slack(const NetworkSpec& spec, std::span<const double> phi, std::span<const double> y,
                         std::span<const double> y_other);

// Expected outflow minus inflow at each node in one period under the mirror
// policy, by enumeration. For interior states it is a subgradient of the dual
// at the current costs.
std::vector<double> mbp_drift(const NetworkSpec& spec, const Congestion& f, const QueueState& s,
                              std::span<const double> phi);
// g(y') - g(y) - s.(y' - y) for a given s.
double subgradient_slack(const NetworkSpec& spec, std::span<const double> phi, std::span<const double> y,
                         std::span<const double> sub, std::span<const double> y_other);

struct TelescopeReport {
  double sum_V1 = 0.0;       // compensated sum of realized Ktilde * (F[t] - F[t+1])
  double endpoint = 0.0;     // Ktilde * (F[0] - F[T])
  double abs_error = 0.0;
};

TelescopeReport telescoping_check(const Congestion& f, double F0, const std::vector<double>& lyapunov_trace);

struct LemmaReport {
  int states = 0;
  int interior_states = 0;
  int loss_violations = 0;          // W - E[v] above V1 + V2c + V3 + V4
  int printed_loss_violations = 0;  // same with V2 as printed, reported only
  int dual_violations = 0;          // V3 above the connectivity bound
  int subgradient_violations = 0;
  int bregman_violations = 0;
  double worst_loss_slack = 0.0;    // min of rhs - lhs
  double worst_printed_slack = 0.0;
  double worst_dual_slack = 0.0;
  double worst_subgradient_slack = 0.0;
  double max_remainder = 0.0;
  double telescoping_error = 0.0;
  std::int64_t telescoping_periods = 0;

  bool holds() const {
    return loss_violations == 0 && dual_violations == 0 && subgradient_violations == 0 && bregman_violations == 0 &&
           telescoping_error <= 1e-9;
  }
};

// Samples states (one in ten on the boundary) and checks the one-period loss
// decomposition, the dual bound, the subgradient property at interior states
// with `directions` random comparison points each, Bregman positivity, and the
// telescoping of the potential along a trajectory of `periods` periods.
LemmaReport verify_lemmas(const NetworkSpec& spec, std::int64_t K, const CongestionConfig& cfg, int samples,
                          int directions, std::int64_t periods, std::uint64_t seed, double tol = 1e-9);

struct BpCounterexample {
  double q2_star = 0.0;      // middle coordinate of the linear policy's fixed point
  bool interior = false;
  double drift_at_probe = 0.0;  // expected change of the squared distance to the fixed point
  double probe_linear_coefficient = 0.0;
};

// Three-node cycle with a low-rate edge: fixed point of the linear policy and
// the squared-distance drift at the probe state (2/3, 0, 1/3).
BpCounterexample bp_counterexample(double w, double c, double eps, std::int64_t K);

// The three-node cycle with small rate eps on the edge out of node 0.
NetworkSpec example_cycle(double eps, double w = 1.0);
// Three nodes, nodes 0 and 1 buffered at 0.4, two-candidate pickup and dropoff sets.
NetworkSpec example_buffered();

}  // namespace mbp

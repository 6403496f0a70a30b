#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "mbp/json_io.hpp"
#include "mbp/policies.hpp"
#include "mbp/simulator.hpp"

namespace mbp {

struct PolicySpec {
  std::string label;
  PolicyConfig cfg;
};

struct Cell {
  std::int64_t K = 0;
  std::int64_t T = 0;
};

struct Experiment {
  NetworkSpec spec;
  std::vector<PolicySpec> policies;
  std::vector<Cell> cells;
  int replications = 50;
  std::uint64_t seed = 1;
  double warmup_per_K = 0.0;  // warm-up periods as a multiple of K
  InitialState init = InitialState::Balanced;
  std::vector<std::int64_t> explicit_q;
  // Report the worst mean over random and corner starting states.
  bool worst_case_init = false;
  int random_inits = 20;
  double ci_level = 0.90;
  // Subtract the mean over measured periods of h_tau(t) - sum_s phi_s(t) h_s(t),
  // which has mean zero; h_tau(t) is the value of type tau under an optimal
  // dual for the rates at t.
  bool control_variate = false;
  // Also subtract y . (q_T - q_0) / T, which has mean zero only when the start
  // is stationary. What remains is the per-period regret against y. Stationary
  // rates and no travel times only.
  bool telescoping_correction = false;
  int workers = 0;  // 0: NUM_WORKERS or the hardware concurrency
};

struct GapReport {
  std::string policy;
  std::int64_t K = 0;
  std::int64_t T = 0;
  int replications = 0;
  double mean_W = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double W_bench = 0.0;  // per-period optimum averaged over the horizon
  double W_upper = 0.0;  // optimum for the time-averaged rates
  double bound = 0.0;    // W_upper + mK/T
  double gap = 0.0;      // W_bench - mean_W
  double L_T = 0.0;      // bound - mean_W
  std::int64_t underflow_blocks = 0;
  std::int64_t overflow_blocks = 0;
  std::vector<double> rep_W;
};

int resolve_workers(int requested);
std::uint64_t replication_seed(std::uint64_t base, std::size_t cell, int rep, std::size_t init = 0);

// Runs fn(i) for i in [0, n) on a pool of threads.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

// Mean over periods [warmup, warmup + T) of the optimal payoff for the current rates.
double benchmark_value(const NetworkSpec& spec, std::int64_t warmup, std::int64_t T);
// Optimum for the rates averaged over the same window.
double averaged_rates_value(const NetworkSpec& spec, std::int64_t warmup, std::int64_t T);

// Per-type values under an optimal dual for the rates at each period.
class DualValues {
 public:
  explicit DualValues(const NetworkSpec& spec);
  // h_tau(t) - sum_s phi_s(t) h_s(t).
  double centred(std::int64_t t, int tau) const;

 private:
  const NetworkSpec* spec_;
  std::vector<std::vector<double>> table_;  // per grid point or sequence entry
  std::vector<std::vector<double>> rates_;
  int grid_ = 0;
};

std::vector<GapReport> run_experiment(const Experiment& ex);

Experiment experiment_from_json(const json& j, const std::string& base_dir);
json to_json(const GapReport& r);
void write_reports_csv(std::ostream& os, const std::vector<GapReport>& reports);

// Least-squares slope of log(gap) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& gap);

// mean_W <= bound + z * se
bool under_bound(const GapReport& r, double z = 3.0);

struct ScalingOptions {
  int replications = 50;
  std::uint64_t seed = 2024;
  int workers = 0;
};

struct ScalingVerdict {
  std::string name;
  bool pass = false;
  std::string detail;
  std::vector<double> x;    // K, T or eta
  std::vector<double> gap;
  std::vector<GapReport> reports;
};

// Cycle with eps = 0.05 under the inverse square root policy, worst corner
// start, T = 1e4 K: gaps positive and decreasing over K = 50, 200, 800 with
// gap(800) <= gap(50) / 4.
ScalingVerdict steady_state_check(const ScalingOptions& opt);
// Same instance at K = 200 over T = K, 10K, 1000K: decreasing, last <= first / 3.
ScalingVerdict transient_check(const ScalingOptions& opt);
// Buffered three-node network with sinusoidal rates, K = 400, eta = 1e-6,
// 4e-6, 1.6e-5: gap / sqrt(eta) within a factor 3 across eta.
ScalingVerdict time_varying_check(const ScalingOptions& opt);
std::vector<ScalingVerdict> gap_scaling_suite(const ScalingOptions& opt);
json to_json(const ScalingVerdict& v);

}  // namespace mbp

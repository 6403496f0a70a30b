#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "mbp/policies.hpp"

namespace mbp {

enum class InitialState { Balanced, Uniform, Explicit, Corner };

InitialState initial_state_from_string(const std::string& key);

struct RunConfig {
  std::int64_t K = 100;
  std::int64_t T = 1000;
  std::int64_t warmup = 0;
  std::uint64_t seed = 1;
  InitialState init = InitialState::Balanced;
  std::vector<std::int64_t> explicit_q;
  int corner_node = 0;
  bool record_payoffs = false;
  bool record_lyapunov = false;
  bool record_trace = false;
  // Optional weight of the arrival (t, tau), averaged over measured periods.
  std::function<double(std::int64_t, int)> arrival_weight;
};

struct TraceRow {
  std::int64_t t = 0;
  int type = 0;
  Decision decision;
  double payoff = 0.0;
  double lyapunov = 0.0;
  double shadow_price = 0.0;
};

struct RunMetrics {
  double W = 0.0;      // mean payoff per period, normalized units
  double W_raw = 0.0;  // mean payoff per period in the units of the input
  std::int64_t periods = 0;
  std::int64_t served = 0;
  std::vector<std::int64_t> arrivals;  // per demand type, after warm-up
  double mean_arrival_weight = 0.0;
  std::int64_t underflow_blocks = 0;
  std::int64_t overflow_blocks = 0;
  std::int64_t price_min_violations = 0;
  std::int64_t price_max_violations = 0;
  std::int64_t conservation_violations = 0;
  double mean_in_transit = 0.0;
  std::vector<double> payoffs;
  std::vector<double> lyapunov;
  std::vector<TraceRow> trace;
  QueueState start_state;  // state when measurement begins
  QueueState final_state;
};

QueueState initial_state(const NetworkSpec& spec, const RunConfig& cfg, std::mt19937_64& rng);

// Applies one decision; throws InfeasibleDecision if the move leaves a queue
// negative or over its buffer.
QueueState step(const QueueState& s, const Decision& d);

RunMetrics run(const NetworkSpec& spec, Policy& policy, const RunConfig& cfg);

// A served unit leaves its pickup node at once and joins its dropoff node
// after the trip's delay; it is unavailable for that many periods.
RunMetrics run_with_travel_times(const NetworkSpec& spec, Policy& policy, const RunConfig& cfg,
                                 const TravelTimes& travel);

void write_trace_csv(std::ostream& os, const NetworkSpec& spec, const std::vector<TraceRow>& trace);
const char* action_name(const Decision& d);

}  // namespace mbp

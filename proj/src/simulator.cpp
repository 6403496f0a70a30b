#include "mbp/simulator.hpp"

#include <cmath>
#include <ostream>
#include <queue>

namespace mbp {

InitialState initial_state_from_string(const std::string& key) {
  if (key == "balanced") return InitialState::Balanced;
  if (key == "uniform") return InitialState::Uniform;
  if (key == "explicit") return InitialState::Explicit;
  if (key == "corner") return InitialState::Corner;
  throw Error(ErrorCode::UnknownKind, "initial state '" + key + "'");
}

QueueState initial_state(const NetworkSpec& spec, const RunConfig& cfg, std::mt19937_64& rng) {
  switch (cfg.init) {
    case InitialState::Balanced: return balanced_state(spec, cfg.K);
    case InitialState::Uniform: return uniform_state(spec, cfg.K, rng);
    case InitialState::Explicit: return explicit_state(spec, cfg.K, cfg.explicit_q);
    case InitialState::Corner: return corner_state(spec, cfg.K, cfg.corner_node);
  }
  return balanced_state(spec, cfg.K);
}

QueueState step(const QueueState& s, const Decision& d) {
  QueueState next = s;
  if (!d.serve) return next;
  const int j = d.pickup, k = d.dropoff;
  if (j < 0 || k < 0 || j >= static_cast<int>(s.q.size()) || k >= static_cast<int>(s.q.size()))
    throw Error(ErrorCode::InfeasibleDecision, "node out of range");
  if (s.q[j] <= 0) throw Error(ErrorCode::InfeasibleDecision, "pickup node is empty");
  if (j != k && s.q[k] >= s.cap[k]) throw Error(ErrorCode::InfeasibleDecision, "dropoff buffer is full");
  --next.q[j];
  ++next.q[k];
  return next;
}

const char* action_name(const Decision& d) {
  if (d.serve) return "serve";
  switch (d.block) {
    case Decision::Block::Underflow: return "block_underflow";
    case Decision::Block::Overflow: return "block_overflow";
    case Decision::Block::None: break;
  }
  return "drop";
}

namespace {

// Neumaier summation.
struct Accumulator {
  double sum = 0.0;
  double comp = 0.0;
  void add(double x) {
    double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) comp += (sum - t) + x;
    else comp += (x - t) + sum;
    sum = t;
  }
  double value() const { return sum + comp; }
};

struct Transit {
  std::int64_t arrival;
  int node;
  bool operator>(const Transit& o) const { return arrival > o.arrival || (arrival == o.arrival && node > o.node); }
};

RunMetrics engine(const NetworkSpec& spec, Policy& policy, const RunConfig& cfg, const TravelTimes* travel) {
  std::mt19937_64 rng(cfg.seed);
  QueueState s = initial_state(spec, cfg, rng);
  const int m = spec.m;
  const bool pricing = spec.setting == Setting::JPA;
  const Congestion* f = policy.congestion();
  std::optional<Congestion> lyap_f;
  if (cfg.record_lyapunov || cfg.record_trace) {
    if (f) lyap_f.emplace(*f);
    else lyap_f.emplace(spec, cfg.K, CongestionConfig{CongestionKind::InverseSqrt, std::nullopt});
  }

  std::vector<double> cost(m, 0.0);
  auto refresh = [&](int j) {
    if (f) cost[j] = f->cost(j, s.q[j]);
  };
  for (int j = 0; j < m; ++j) refresh(j);

  DemandSampler sampler(spec.demand);
  std::vector<double> phi = spec.demand.phi;
  const bool needs_rates = policy.config().kind == PolicyKind::StaticFluid && !spec.demand.stationary();

  std::priority_queue<Transit, std::vector<Transit>, std::greater<>> transit;
  std::int64_t in_transit = 0;
  Accumulator transit_area;

  RunMetrics out;
  out.arrivals.assign(spec.types.size(), 0);
  Accumulator total;
  Accumulator weights;
  if (cfg.record_payoffs) out.payoffs.reserve(static_cast<std::size_t>(cfg.T));
  const std::int64_t horizon = cfg.warmup + cfg.T;
  std::vector<double> qbar(m);

  for (std::int64_t t = 0; t < horizon; ++t) {
    if (t == cfg.warmup) out.start_state = s;
    while (!transit.empty() && transit.top().arrival <= t) {
      int k = transit.top().node;
      transit.pop();
      if (s.q[k] >= s.cap[k]) throw Error(ErrorCode::InfeasibleDecision, "arrival into a full buffer");
      ++s.q[k];
      --in_transit;
      refresh(k);
    }
    const int tau = sampler.sample(t, uniform01(rng));
    if (needs_rates) spec.demand.rates_at(t, phi);
    Decision d = policy.decide(tau, cost, s, phi, rng);

    double payoff = 0.0;
    if (d.serve && pricing) {
      double wtp = spec.types[tau].wtp.price_at(uniform01(rng));
      if (wtp < d.price) d.serve = false;
    }
    if (d.serve) {
      const DemandType& ty = spec.types[tau];
      payoff = pricing ? d.price - ty.c(d.a, d.b) : ty.w(d.a, d.b);
      const int j = d.pickup, k = d.dropoff;
      if (s.q[j] <= 0) throw Error(ErrorCode::InfeasibleDecision, "pickup node is empty");
      int delay = travel ? travel->delay(tau, d.a, d.b) : 0;
      if (delay > 0) {
        --s.q[j];
        transit.push({t + 1 + delay, k});
        ++in_transit;
      } else {
        if (j != k && s.q[k] >= s.cap[k]) throw Error(ErrorCode::InfeasibleDecision, "dropoff buffer is full");
        --s.q[j];
        ++s.q[k];
      }
      refresh(j);
      refresh(k);
    }
    policy.observe(d, tau);

    if (t < cfg.warmup) continue;
    ++out.periods;
    ++out.arrivals[tau];
    if (cfg.arrival_weight) weights.add(cfg.arrival_weight(t, tau));
    total.add(payoff);
    if (d.serve) {
      ++out.served;
      if (pricing) {
        const auto& w = spec.types[tau].wtp;
        if (d.price < w.pmin - 1e-12) ++out.price_min_violations;
        if (d.price > w.pmax + 1e-12) ++out.price_max_violations;
      }
    }
    if (d.block == Decision::Block::Underflow) ++out.underflow_blocks;
    if (d.block == Decision::Block::Overflow) ++out.overflow_blocks;
    if (travel) {
      std::int64_t on_node = 0;
      for (int j = 0; j < m; ++j) on_node += s.q[j];
      if (on_node + in_transit != cfg.K) ++out.conservation_violations;
      transit_area.add(static_cast<double>(in_transit));
    }
    if (cfg.record_payoffs) out.payoffs.push_back(payoff);
    double F = 0.0;
    if (lyap_f) {
      for (int j = 0; j < m; ++j) qbar[j] = lyap_f->qbar(j, s.q[j]);
      F = lyap_f->lyapunov(qbar);
      if (cfg.record_lyapunov) out.lyapunov.push_back(F);
    }
    if (cfg.record_trace) out.trace.push_back({t, tau, d, payoff, F, policy.shadow_price()});
  }

  if (out.periods > 0) {
    out.W = total.value() / static_cast<double>(out.periods);
    out.mean_arrival_weight = weights.value() / static_cast<double>(out.periods);
    out.mean_in_transit = transit_area.value() / static_cast<double>(out.periods);
  }
  out.W_raw = out.W / spec.payoff_scale;
  // Units still travelling are reported at their destination.
  out.final_state = s;
  while (!transit.empty()) {
    ++out.final_state.q[transit.top().node];
    transit.pop();
  }
  return out;
}

}  // namespace

RunMetrics run(const NetworkSpec& spec, Policy& policy, const RunConfig& cfg) {
  return engine(spec, policy, cfg, nullptr);
}

RunMetrics run_with_travel_times(const NetworkSpec& spec, Policy& policy, const RunConfig& cfg,
                                 const TravelTimes& travel) {
  if (travel.pickup.size() != spec.types.size() || travel.trip.size() != spec.types.size())
    throw Error(ErrorCode::BadInput, "travel times need one row per type");
  return engine(spec, policy, cfg, &travel);
}

void write_trace_csv(std::ostream& os, const NetworkSpec& spec, const std::vector<TraceRow>& trace) {
  os << "t,demand_type,action,pickup,dropoff,payoff,F_lyap,v_shadow\n";
  for (const auto& r : trace) {
    os << r.t << ',' << spec.types[r.type].id << ',' << action_name(r.decision) << ',' << r.decision.pickup << ','
       << r.decision.dropoff << ',' << r.payoff << ',' << r.lyapunov << ',' << r.shadow_price << '\n';
  }
}

}  // namespace mbp

#include "mbp/policies.hpp"

#include <algorithm>
#include <cmath>

namespace mbp {

namespace {

bool can_leave(const QueueState& s, int j) { return s.q[j] > 0; }
bool can_enter(const QueueState& s, int j, int k) { return j == k || s.q[k] < s.cap[k]; }

Decision::Block blocked(const QueueState& s, int j, int k) {
  if (!can_leave(s, j)) return Decision::Block::Underflow;
  if (!can_enter(s, j, k)) return Decision::Block::Overflow;
  return Decision::Block::None;
}

void set_pair(Decision& d, const DemandType& t, int a, int b) {
  d.a = a;
  d.b = b;
  d.pickup = t.pickup[a];
  d.dropoff = t.dropoff[b];
}

bool lex_less(int j, int k, int bj, int bk) { return j < bj || (j == bj && k < bk); }

// Highest gain + cost[j] - cost[k] over the type's pairs, ties to the lowest (j, k).
template <class Gain>
Decision best_pair(const DemandType& t, std::span<const double> cost, Gain gain) {
  Decision d;
  for (std::size_t a = 0; a < t.pickup.size(); ++a)
    for (std::size_t b = 0; b < t.dropoff.size(); ++b) {
      int j = t.pickup[a], k = t.dropoff[b];
      double score = (gain(a, b) + cost[j]) - cost[k];
      if (d.a < 0 || score > d.score || (score == d.score && lex_less(j, k, d.pickup, d.dropoff))) {
        set_pair(d, t, static_cast<int>(a), static_cast<int>(b));
        d.score = score;
      }
    }
  return d;
}

}  // namespace

Decision mbp_entry_decide(const DemandType& t, std::span<const double> cost, const QueueState& s) {
  Decision d;
  set_pair(d, t, 0, 0);
  d.score = (t.w(0, 0) + cost[d.pickup]) - cost[d.dropoff];
  if (d.score >= 0.0) {
    d.block = blocked(s, d.pickup, d.dropoff);
    d.serve = d.block == Decision::Block::None;
  }
  return d;
}

Decision mbp_jea_decide(const DemandType& t, std::span<const double> cost, const QueueState& s,
                        bool fallback_assignment) {
  Decision d = best_pair(t, cost, [&](std::size_t a, std::size_t b) { return t.w(a, b); });
  if (d.score < 0.0) return d;
  d.block = blocked(s, d.pickup, d.dropoff);
  d.serve = d.block == Decision::Block::None;
  if (d.serve || !fallback_assignment) return d;
  // Best pair among those that can actually move.
  Decision alt;
  for (std::size_t a = 0; a < t.pickup.size(); ++a)
    for (std::size_t b = 0; b < t.dropoff.size(); ++b) {
      int j = t.pickup[a], k = t.dropoff[b];
      if (!can_leave(s, j) || !can_enter(s, j, k)) continue;
      double score = (t.w(a, b) + cost[j]) - cost[k];
      if (alt.a < 0 || score > alt.score || (score == alt.score && lex_less(j, k, alt.pickup, alt.dropoff))) {
        set_pair(alt, t, static_cast<int>(a), static_cast<int>(b));
        alt.score = score;
      }
    }
  if (alt.a >= 0 && alt.score >= 0.0) {
    alt.serve = true;
    alt.block = d.block;
    return alt;
  }
  return d;
}

Decision mbp_jpa_decide(const DemandType& t, std::span<const double> cost, const QueueState& s) {
  Decision d = best_pair(t, cost, [&](std::size_t a, std::size_t b) { return -t.c(a, b); });
  d.block = blocked(s, d.pickup, d.dropoff);
  if (d.block != Decision::Block::None) return d;
  d.mu = t.wtp.best_fraction(d.score);
  d.price = t.wtp.price_at(d.mu);
  d.serve = d.mu > 0.0;
  return d;
}

Decision scrip_decide(const DemandType& t, std::span<const double> cost, const QueueState& s) {
  Decision d;
  int best_b = 0;
  for (std::size_t b = 1; b < t.dropoff.size(); ++b) {
    double cb = cost[t.dropoff[b]], cbest = cost[t.dropoff[best_b]];
    if (cb < cbest || (cb == cbest && t.dropoff[b] < t.dropoff[best_b])) best_b = static_cast<int>(b);
  }
  set_pair(d, t, 0, best_b);
  d.score = (t.w(0, best_b) + cost[d.pickup]) - cost[d.dropoff];
  if (d.score >= 0.0) {
    d.block = blocked(s, d.pickup, d.dropoff);
    d.serve = d.block == Decision::Block::None;
  }
  return d;
}

Decision greedy_decide(int tau, const DemandType& t, const QueueState& s, const TravelTimes* travel) {
  Decision d;
  int best_time = 0;
  for (std::size_t a = 0; a < t.pickup.size(); ++a)
    for (std::size_t b = 0; b < t.dropoff.size(); ++b) {
      int j = t.pickup[a], k = t.dropoff[b];
      if (!can_leave(s, j) || !can_enter(s, j, k)) {
        if (d.block == Decision::Block::None) d.block = blocked(s, j, k);
        continue;
      }
      double w = t.w(a, b);
      int time = travel && !travel->empty() ? travel->pickup[tau][a] : 0;
      bool better = !d.serve || w > d.score ||
                    (w == d.score && (time < best_time || (time == best_time && lex_less(j, k, d.pickup, d.dropoff))));
      if (better) {
        set_pair(d, t, static_cast<int>(a), static_cast<int>(b));
        d.score = w;
        d.serve = true;
        best_time = time;
      }
    }
  if (d.serve) {
    d.block = Decision::Block::None;
    if (d.score < 0.0) d.serve = false;
  }
  return d;
}

Decision static_fluid_decide(int tau, const DemandType& t, double phi_tau, const SppSolution& plan,
                             const QueueState& s, double u) {
  const auto& z = plan.z[tau];
  double total = 0.0;
  for (double v : z) total += v;
  if (total > phi_tau * (1.0 + 1e-9) + 1e-15)
    throw Error(ErrorCode::SolutionMismatch, "planned flow exceeds the arrival rate of type " + t.id);
  Decision d;
  const bool pricing = !plan.price.empty();
  // Pricing: the pair is chosen among planned pairs, the price sets the purchase rate.
  double scale = pricing ? total : phi_tau;
  if (scale <= 0.0) return d;
  double x = u * scale, acc = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    acc += z[i];
    if (x < acc) {
      set_pair(d, t, static_cast<int>(i / t.dropoff.size()), static_cast<int>(i % t.dropoff.size()));
      break;
    }
  }
  if (d.a < 0) return d;  // drop with the unplanned probability
  d.block = blocked(s, d.pickup, d.dropoff);
  d.serve = d.block == Decision::Block::None;
  if (pricing) {
    d.mu = std::min(1.0, plan.served[tau]);
    d.price = plan.price[tau];
  }
  return d;
}

Decision supply_aware_decide(int tau, const DemandType& t, std::span<const double> cost, const QueueState& s,
                             double v, const TravelTimes& travel) {
  Decision d = best_pair(t, cost, [&](std::size_t a, std::size_t b) {
    return t.w(a, b) - v * travel.delay(tau, a, b);
  });
  if (d.score < 0.0) return d;
  d.block = blocked(s, d.pickup, d.dropoff);
  d.serve = d.block == Decision::Block::None;
  return d;
}

double shadow_price_update(double v, std::optional<int> dispatched_delay, std::int64_t K, double rho) {
  double used = dispatched_delay ? static_cast<double>(*dispatched_delay) : 0.0;
  double Kd = static_cast<double>(K);
  return std::max(0.0, v + (used - rho * Kd) / Kd);
}

// ---------------------------------------------------------------- Policy

PolicyKind policy_from_string(const std::string& key) {
  if (key == "mbp") return PolicyKind::MBP;
  if (key == "bp") return PolicyKind::BP;
  if (key == "greedy") return PolicyKind::Greedy;
  if (key == "static_fluid") return PolicyKind::StaticFluid;
  if (key == "supply_aware_mbp") return PolicyKind::SupplyAwareMBP;
  if (key == "scrip_mbp") return PolicyKind::ScripMBP;
  throw Error(ErrorCode::UnknownPolicy, "policy '" + key + "'");
}

const char* to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::MBP: return "mbp";
    case PolicyKind::BP: return "bp";
    case PolicyKind::Greedy: return "greedy";
    case PolicyKind::StaticFluid: return "static_fluid";
    case PolicyKind::SupplyAwareMBP: return "supply_aware_mbp";
    case PolicyKind::ScripMBP: return "scrip_mbp";
  }
  return "?";
}

Policy::Policy(const NetworkSpec& spec, std::int64_t K, PolicyConfig cfg) : spec_(&spec), K_(K), cfg_(cfg) {
  switch (cfg_.kind) {
    case PolicyKind::MBP:
    case PolicyKind::ScripMBP:
      congestion_.emplace(spec, K, cfg_.congestion);
      break;
    case PolicyKind::BP:
      cfg_.congestion.kind = CongestionKind::Linear;
      congestion_.emplace(spec, K, cfg_.congestion);
      break;
    case PolicyKind::SupplyAwareMBP: {
      if (spec.travel.empty()) throw Error(ErrorCode::BadInput, "supply-aware policy needs travel times");
      // Normalize by the cars expected to be free at the target utilization.
      std::int64_t free_cars = std::max<std::int64_t>(4, std::llround((1.0 - cfg_.rho) * static_cast<double>(K)));
      congestion_.emplace(spec, K, free_cars, cfg_.congestion);
      break;
    }
    case PolicyKind::Greedy:
    case PolicyKind::StaticFluid:
      break;
  }
  if (cfg_.kind == PolicyKind::ScripMBP && spec.setting != Setting::Scrip)
    throw Error(ErrorCode::NotSupported, "scrip policy on a non-scrip network");
  if (spec.setting == Setting::JPA && cfg_.kind != PolicyKind::MBP && cfg_.kind != PolicyKind::BP &&
      cfg_.kind != PolicyKind::StaticFluid)
    throw Error(ErrorCode::NotSupported, std::string(to_string(cfg_.kind)) + " with pricing");
}

Decision Policy::decide(int tau, std::span<const double> cost, const QueueState& s, std::span<const double> phi,
                        std::mt19937_64& rng) const {
  const DemandType& t = spec_->types[tau];
  switch (cfg_.kind) {
    case PolicyKind::MBP:
    case PolicyKind::BP:
      switch (spec_->setting) {
        case Setting::EntryControl: return mbp_entry_decide(t, cost, s);
        case Setting::JPA: return mbp_jpa_decide(t, cost, s);
        case Setting::JEA:
        case Setting::Scrip: return mbp_jea_decide(t, cost, s, cfg_.fallback_assignment);
      }
      break;
    case PolicyKind::ScripMBP: return scrip_decide(t, cost, s);
    case PolicyKind::Greedy: return greedy_decide(tau, t, s, spec_->travel.empty() ? nullptr : &spec_->travel);
    case PolicyKind::StaticFluid:
      if (!plan_) throw Error(ErrorCode::BadInput, "static policy has no plan");
      return static_fluid_decide(tau, t, phi[tau], *plan_, s, uniform01(rng));
    case PolicyKind::SupplyAwareMBP: return supply_aware_decide(tau, t, cost, s, v_, spec_->travel);
  }
  return {};
}

void Policy::observe(const Decision& d, int tau) {
  if (cfg_.kind != PolicyKind::SupplyAwareMBP) return;
  std::optional<int> delay;
  if (d.serve) delay = spec_->travel.delay(tau, d.a, d.b);
  v_ = shadow_price_update(v_, delay, K_, cfg_.rho);
}

}  // namespace mbp

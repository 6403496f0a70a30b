#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>

#include "mbp/congestion.hpp"
#include "mbp/network.hpp"
#include "mbp/planning.hpp"

namespace mbp {

struct Decision {
  enum class Block { None, Underflow, Overflow };

  bool serve = false;
  int pickup = -1;  // node
  int dropoff = -1;
  int a = -1;  // position of pickup within the type's pickup set
  int b = -1;
  double price = std::numeric_limits<double>::quiet_NaN();
  double mu = std::numeric_limits<double>::quiet_NaN();
  double score = std::numeric_limits<double>::quiet_NaN();
  Block block = Block::None;
};

// The decision rules below see queue lengths and congestion costs only; the
// arrival rates are never an input, except for the static fluid policy.

Decision mbp_entry_decide(const DemandType& t, std::span<const double> cost, const QueueState& s);
Decision mbp_jea_decide(const DemandType& t, std::span<const double> cost, const QueueState& s,
                        bool fallback_assignment = false);
// Offers a price; whether the customer buys is decided by the caller.
Decision mbp_jpa_decide(const DemandType& t, std::span<const double> cost, const QueueState& s);
Decision scrip_decide(const DemandType& t, std::span<const double> cost, const QueueState& s);
Decision greedy_decide(int tau, const DemandType& t, const QueueState& s, const TravelTimes* travel);
Decision static_fluid_decide(int tau, const DemandType& t, double phi_tau, const SppSolution& plan,
                             const QueueState& s, double u);
Decision supply_aware_decide(int tau, const DemandType& t, std::span<const double> cost, const QueueState& s,
                             double v, const TravelTimes& travel);
double shadow_price_update(double v, std::optional<int> dispatched_delay, std::int64_t K, double rho);

enum class PolicyKind { MBP, BP, Greedy, StaticFluid, SupplyAwareMBP, ScripMBP };

PolicyKind policy_from_string(const std::string& key);
const char* to_string(PolicyKind kind);

struct PolicyConfig {
  PolicyKind kind = PolicyKind::MBP;
  CongestionConfig congestion;
  bool fallback_assignment = false;
  double rho = 0.95;  // target utilization for the supply-aware policy
};

// A policy bound to a network and fleet size, with whatever state it keeps.
class Policy {
 public:
  Policy(const NetworkSpec& spec, std::int64_t K, PolicyConfig cfg);

  const PolicyConfig& config() const { return cfg_; }
  bool uses_costs() const { return congestion_.has_value(); }
  const Congestion* congestion() const { return congestion_ ? &*congestion_ : nullptr; }
  double shadow_price() const { return v_; }

  // The static policy needs its plan; all others ignore it.
  void set_plan(SppSolution plan) { plan_ = std::move(plan); }
  const SppSolution* plan() const { return plan_ ? &*plan_ : nullptr; }

  Decision decide(int tau, std::span<const double> cost, const QueueState& s, std::span<const double> phi,
                  std::mt19937_64& rng) const;
  void observe(const Decision& d, int tau);

 private:
  const NetworkSpec* spec_;
  std::int64_t K_;
  PolicyConfig cfg_;
  std::optional<Congestion> congestion_;
  std::optional<SppSolution> plan_;
  double v_ = 0.0;
};

}  // namespace mbp

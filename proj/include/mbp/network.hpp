#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mbp/error.hpp"

namespace mbp {

enum class Setting { EntryControl, JEA, JPA, Scrip };

const char* to_string(Setting s);
Setting setting_from_string(const std::string& s);

// Willingness-to-pay distribution on [pmin, pmax]. A piecewise-linear CDF is
// given by knots (price, cdf) starting at (pmin, 0) and ending at (pmax, 1).
struct WtpModel {
  enum class Kind { Uniform, PiecewiseLinearCdf };
  Kind kind = Kind::Uniform;
  double pmin = 0.0;
  double pmax = 1.0;
  std::vector<std::pair<double, double>> knots;

  // Price at which a fraction mu of customers buys (inverse survival function).
  double price_at(double mu) const;
  // Revenue per arriving customer r(mu) = mu * price_at(mu).
  double revenue(double mu) const;
  // Right derivative of r, left derivative at mu = 1.
  double revenue_slope(double mu) const;
  // argmax over mu in [0,1] of r(mu) + mu * delta.
  double best_fraction(double delta) const;

  void scale(double s);
  void validate() const;
};

struct DemandType {
  std::string id;
  std::vector<int> pickup;
  std::vector<int> dropoff;
  // Row-major |pickup| x |dropoff|.
  std::vector<double> payoff;
  std::vector<double> cost;
  WtpModel wtp;

  double w(std::size_t a, std::size_t b) const { return payoff[a * dropoff.size() + b]; }
  double c(std::size_t a, std::size_t b) const { return cost[a * dropoff.size() + b]; }
};

// Arrival rates over demand types, possibly varying with the period index.
struct DemandModel {
  enum class Mode { Stationary, Sinusoid, Sequence };
  Mode mode = Mode::Stationary;
  std::vector<double> phi;        // stationary rates, or the sinusoid centre
  std::vector<double> direction;  // zero-sum sinusoid direction
  double period = 0.0;
  double phase = 0.0;
  std::vector<std::vector<double>> sequence;

  std::size_t types() const { return phi.size(); }
  bool stationary() const { return mode == Mode::Stationary; }
  void rates_at(std::int64_t t, std::vector<double>& out) const;
  std::vector<double> rates_at(std::int64_t t) const;
  // Bound on the l1 change of the rates between consecutive periods.
  double declared_eta() const;

  static DemandModel sinusoid(std::vector<double> centre, std::vector<double> direction, double eta,
                              double phase = 0.0);
};

// Per-type travel delays in periods: pickup[tau][a] from the a-th pickup node
// to the customer, trip[tau][b] from the customer to the b-th dropoff node.
struct TravelTimes {
  std::vector<std::vector<int>> pickup;
  std::vector<std::vector<int>> trip;

  bool empty() const { return pickup.empty(); }
  int delay(int tau, std::size_t a, std::size_t b) const { return pickup[tau][a] + trip[tau][b]; }
};

struct NetworkSpec {
  std::string name;
  Setting setting = Setting::EntryControl;
  int m = 0;
  std::vector<double> buffers;  // scaled, in (0, 1]
  std::vector<DemandType> types;
  DemandModel demand;
  // Raw payoffs were multiplied by this factor so that they are bounded by one.
  double payoff_scale = 1.0;
  TravelTimes travel;

  bool buffered(int j) const { return buffers[j] < 1.0; }
  double buffer_sum() const;
};

// Validates the network, fills default buffers and rescales payoffs.
void finalize(NetworkSpec& spec);

struct QueueState {
  std::int64_t K = 0;
  std::vector<std::int64_t> q;
  std::vector<std::int64_t> cap;
};

std::vector<std::int64_t> buffer_capacities(const NetworkSpec& spec, std::int64_t K);

// Round-robin fill that skips full buffers.
QueueState balanced_state(const NetworkSpec& spec, std::int64_t K);
// Uniform over the lattice of feasible states.
QueueState uniform_state(const NetworkSpec& spec, std::int64_t K, std::mt19937_64& rng);
// As many units as fit at node j, the rest in index order.
// Uniform state moved so one queue sits at zero or at its buffer.
QueueState boundary_state(const NetworkSpec& spec, std::int64_t K, std::mt19937_64& rng);
// Boundary state with probability 0.1, uniform state otherwise.
QueueState mixed_state(const NetworkSpec& spec, std::int64_t K, std::mt19937_64& rng);
QueueState corner_state(const NetworkSpec& spec, std::int64_t K, int j);
QueueState explicit_state(const NetworkSpec& spec, std::int64_t K, std::vector<std::int64_t> q);

struct NormalizedQueues {
  double delta = 0.0;
  double ktilde = 0.0;
  std::vector<double> qbar;
};

NormalizedQueues normalize_queues(const NetworkSpec& spec, const QueueState& s);

double connectivity_alpha(const NetworkSpec& spec, std::span<const double> phi);

struct CrpWitness {
  std::vector<int> subset;
  double mu = 0.0;      // rate of demand leaving the subset
  double lambda = 0.0;  // rate of demand entering the subset
};

CrpWitness crp_witness(const NetworkSpec& spec, std::span<const double> phi);

class DemandSampler {
 public:
  explicit DemandSampler(const DemandModel& model);
  int sample(std::int64_t t, double u);

 private:
  const DemandModel* model_;
  std::vector<double> cumulative_;
  std::vector<double> scratch_;
  void build(const std::vector<double>& phi);
};

// Uniform double in [0, 1) from the top 53 bits of a 64-bit draw.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace mbp

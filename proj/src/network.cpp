#include "mbp/network.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mbp {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyNeighborhood: return "EmptyNeighborhood";
    case ErrorCode::BufferInfeasible: return "BufferInfeasible";
    case ErrorCode::NonProbabilityDemand: return "NonProbabilityDemand";
    case ErrorCode::TooManyNodes: return "TooManyNodes";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::DegenerateEps: return "DegenerateEps";
    case ErrorCode::UnknownKind: return "UnknownKind";
    case ErrorCode::UnknownPolicy: return "UnknownPolicy";
    case ErrorCode::NonConcaveRevenue: return "NonConcaveRevenue";
    case ErrorCode::SolutionMismatch: return "SolutionMismatch";
    case ErrorCode::InfeasibleDecision: return "InfeasibleDecision";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::Unbounded: return "Unbounded";
    case ErrorCode::SolverStall: return "SolverStall";
    case ErrorCode::NoCut: return "NoCut";
    case ErrorCode::NotSupported: return "NotSupported";
    case ErrorCode::BadInput: return "BadInput";
  }
  return "Unknown";
}

const char* to_string(Setting s) {
  switch (s) {
    case Setting::EntryControl: return "entry_control";
    case Setting::JEA: return "jea";
    case Setting::JPA: return "jpa";
    case Setting::Scrip: return "scrip";
  }
  return "?";
}

Setting setting_from_string(const std::string& s) {
  if (s == "entry_control") return Setting::EntryControl;
  if (s == "jea") return Setting::JEA;
  if (s == "jpa") return Setting::JPA;
  if (s == "scrip") return Setting::Scrip;
  throw Error(ErrorCode::UnknownKind, "setting '" + s + "'");
}

// ---------------------------------------------------------------- WTP

double WtpModel::price_at(double mu) const {
  mu = std::clamp(mu, 0.0, 1.0);
  if (kind == Kind::Uniform) return pmax - mu * (pmax - pmin);
  // Survival 1 - F decreases along the knots; find the segment holding mu.
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    double s_hi = 1.0 - knots[i].second;
    double s_lo = 1.0 - knots[i + 1].second;
    if (mu >= s_lo) {
      double frac = (s_hi - mu) / (s_hi - s_lo);
      return knots[i].first + frac * (knots[i + 1].first - knots[i].first);
    }
  }
  return pmax;
}

double WtpModel::revenue(double mu) const { return mu * price_at(mu); }

double WtpModel::revenue_slope(double mu) const {
  mu = std::clamp(mu, 0.0, 1.0);
  if (kind == Kind::Uniform) return pmax - 2.0 * mu * (pmax - pmin);
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    double s_hi = 1.0 - knots[i].second;
    double s_lo = 1.0 - knots[i + 1].second;
    if (mu >= s_lo && (mu < s_hi || i == 0)) {
      double dp = -(knots[i + 1].first - knots[i].first) / (s_hi - s_lo);
      return price_at(mu) + mu * dp;
    }
  }
  return price_at(mu);
}

double WtpModel::best_fraction(double delta) const {
  if (kind == Kind::Uniform) {
    return std::clamp((pmax + delta) / (2.0 * (pmax - pmin)), 0.0, 1.0);
  }
  auto g = [&](double mu) { return revenue_slope(mu) + delta; };
  if (g(0.0) <= 0.0) return 0.0;
  if (g(1.0) >= 0.0) return 1.0;
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200 && hi - lo > 1e-10; ++it) {
    double mid = 0.5 * (lo + hi);
    if (g(mid) > 0.0) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

void WtpModel::scale(double s) {
  pmin *= s;
  pmax *= s;
  for (auto& k : knots) k.first *= s;
}

void WtpModel::validate() const {
  if (!(pmin >= 0.0) || !(pmax > pmin)) throw Error(ErrorCode::BadInput, "price bounds");
  if (kind == Kind::Uniform) return;
  if (knots.size() < 2) throw Error(ErrorCode::BadInput, "wtp needs at least two knots");
  const double tol = 1e-12;
  if (std::abs(knots.front().first - pmin) > tol || std::abs(knots.back().first - pmax) > tol ||
      std::abs(knots.front().second) > tol || std::abs(knots.back().second - 1.0) > tol)
    throw Error(ErrorCode::BadInput, "wtp knots must run from (pmin,0) to (pmax,1)");
  double prev_density = 0.0;
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    double dp = knots[i + 1].first - knots[i].first;
    double dF = knots[i + 1].second - knots[i].second;
    if (!(dp > 0.0) || !(dF > 0.0)) throw Error(ErrorCode::BadInput, "wtp knots must increase");
    double density = dF / dp;
    if (density < prev_density * (1.0 - 1e-12))
      throw Error(ErrorCode::NonConcaveRevenue, "density decreases in price");
    prev_density = density;
  }
}

// ---------------------------------------------------------------- demand

void DemandModel::rates_at(std::int64_t t, std::vector<double>& out) const {
  switch (mode) {
    case Mode::Stationary:
      out = phi;
      return;
    case Mode::Sinusoid: {
      double s = std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / period + phase);
      out.resize(phi.size());
      for (std::size_t i = 0; i < phi.size(); ++i) out[i] = std::max(0.0, phi[i] + s * direction[i]);
      return;
    }
    case Mode::Sequence:
      out = sequence[std::min<std::size_t>(static_cast<std::size_t>(std::max<std::int64_t>(t, 0)),
                                           sequence.size() - 1)];
      return;
  }
}

std::vector<double> DemandModel::rates_at(std::int64_t t) const {
  std::vector<double> out;
  rates_at(t, out);
  return out;
}

double DemandModel::declared_eta() const {
  switch (mode) {
    case Mode::Stationary: return 0.0;
    case Mode::Sinusoid: {
      double l1 = 0.0;
      for (double d : direction) l1 += std::abs(d);
      return l1 * 2.0 * std::numbers::pi / period;
    }
    case Mode::Sequence: {
      double eta = 0.0;
      for (std::size_t s = 0; s + 1 < sequence.size(); ++s) {
        double l1 = 0.0;
        for (std::size_t i = 0; i < sequence[s].size(); ++i) l1 += std::abs(sequence[s + 1][i] - sequence[s][i]);
        eta = std::max(eta, l1);
      }
      return eta;
    }
  }
  return 0.0;
}

DemandModel DemandModel::sinusoid(std::vector<double> centre, std::vector<double> direction, double eta,
                                  double phase) {
  DemandModel d;
  d.mode = Mode::Sinusoid;
  d.phi = std::move(centre);
  d.direction = std::move(direction);
  double l1 = 0.0;
  for (double x : d.direction) l1 += std::abs(x);
  d.period = l1 * 2.0 * std::numbers::pi / eta;
  d.phase = phase;
  return d;
}

// ---------------------------------------------------------------- spec

double NetworkSpec::buffer_sum() const {
  double s = 0.0;
  for (double b : buffers) s += b;
  return s;
}

namespace {

void check_probability(const std::vector<double>& phi, std::size_t n, const char* what) {
  if (phi.size() != n) throw Error(ErrorCode::NonProbabilityDemand, std::string(what) + " has wrong length");
  double total = 0.0;
  for (double x : phi) {
    if (!(x >= 0.0)) throw Error(ErrorCode::NonProbabilityDemand, std::string(what) + " has a negative rate");
    total += x;
  }
  if (std::abs(total - 1.0) > 1e-9) throw Error(ErrorCode::NonProbabilityDemand, std::string(what) + " does not sum to one");
}

}  // namespace

void finalize(NetworkSpec& spec) {
  if (spec.m < 2) throw Error(ErrorCode::BadInput, "need at least two nodes");
  if (spec.buffers.empty()) spec.buffers.assign(spec.m, 1.0);
  if (static_cast<int>(spec.buffers.size()) != spec.m) throw Error(ErrorCode::BadInput, "buffers length");
  for (double b : spec.buffers)
    if (!(b > 0.0 && b <= 1.0)) throw Error(ErrorCode::BufferInfeasible, "scaled buffer outside (0,1]");
  if (spec.buffer_sum() <= 1.0) throw Error(ErrorCode::BufferInfeasible, "scaled buffers sum to at most one");

  const bool jpa = spec.setting == Setting::JPA;
  for (auto& t : spec.types) {
    if (t.pickup.empty() || t.dropoff.empty()) throw Error(ErrorCode::EmptyNeighborhood, "type " + t.id);
    for (int j : t.pickup)
      if (j < 0 || j >= spec.m) throw Error(ErrorCode::BadInput, "pickup node out of range in " + t.id);
    for (int k : t.dropoff)
      if (k < 0 || k >= spec.m) throw Error(ErrorCode::BadInput, "dropoff node out of range in " + t.id);
    const std::size_t pairs = t.pickup.size() * t.dropoff.size();
    if (spec.setting == Setting::EntryControl && pairs != 1)
      throw Error(ErrorCode::BadInput, "entry control types have one origin and one destination");
    if (spec.setting == Setting::Scrip && t.pickup.size() != 1)
      throw Error(ErrorCode::BadInput, "scrip types have a single requestor");
    if (jpa) {
      if (t.cost.size() == 1) t.cost.assign(pairs, t.cost[0]);
      if (t.cost.size() != pairs) throw Error(ErrorCode::BadInput, "cost size in " + t.id);
      t.wtp.validate();
      t.payoff.assign(pairs, 0.0);
    } else {
      if (t.payoff.size() == 1) t.payoff.assign(pairs, t.payoff[0]);
      if (t.payoff.size() != pairs) throw Error(ErrorCode::BadInput, "payoff size in " + t.id);
    }
  }

  const std::size_t n = spec.types.size();
  auto& d = spec.demand;
  switch (d.mode) {
    case DemandModel::Mode::Stationary: check_probability(d.phi, n, "phi"); break;
    case DemandModel::Mode::Sinusoid:
      check_probability(d.phi, n, "phi");
      if (d.direction.size() != n) throw Error(ErrorCode::NonProbabilityDemand, "direction length");
      {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          s += d.direction[i];
          if (d.phi[i] - std::abs(d.direction[i]) < -1e-12)
            throw Error(ErrorCode::NonProbabilityDemand, "sinusoid leaves the simplex");
        }
        if (std::abs(s) > 1e-12) throw Error(ErrorCode::NonProbabilityDemand, "direction must sum to zero");
      }
      if (!(d.period > 0.0)) throw Error(ErrorCode::BadInput, "sinusoid period");
      break;
    case DemandModel::Mode::Sequence:
      if (d.sequence.empty()) throw Error(ErrorCode::NonProbabilityDemand, "empty sequence");
      for (const auto& row : d.sequence) check_probability(row, n, "sequence row");
      if (d.phi.empty()) d.phi = d.sequence.front();
      break;
  }

  double bound = 0.0;
  if (jpa) {
    double pmax = 0.0, cmax = 0.0;
    for (const auto& t : spec.types) {
      pmax = std::max(pmax, t.wtp.pmax);
      for (double c : t.cost) cmax = std::max(cmax, std::abs(c));
    }
    bound = pmax + cmax;
  } else {
    for (const auto& t : spec.types)
      for (double w : t.payoff) bound = std::max(bound, std::abs(w));
  }
  if (bound > 0.0 && bound != 1.0) {
    double s = 1.0 / bound;
    for (auto& t : spec.types) {
      for (double& w : t.payoff) w *= s;
      for (double& c : t.cost) c *= s;
      if (jpa) t.wtp.scale(s);
    }
    spec.payoff_scale *= s;
  }
}

std::vector<std::int64_t> buffer_capacities(const NetworkSpec& spec, std::int64_t K) {
  std::vector<std::int64_t> cap(spec.m);
  std::int64_t total = 0;
  for (int j = 0; j < spec.m; ++j) {
    cap[j] = spec.buffered(j) ? std::llround(spec.buffers[j] * static_cast<double>(K)) : K;
    total += cap[j];
  }
  if (total < K + 1) throw Error(ErrorCode::BufferInfeasible, "rounded buffers hold fewer than K+1 units");
  return cap;
}

NormalizedQueues normalize_queues(const NetworkSpec& spec, const QueueState& s) {
  NormalizedQueues n;
  n.delta = std::sqrt(static_cast<double>(s.K));
  n.ktilde = static_cast<double>(s.K) + spec.buffer_sum() * n.delta;
  n.qbar.resize(spec.m);
  for (int j = 0; j < spec.m; ++j)
    n.qbar[j] = (static_cast<double>(s.q[j]) + spec.buffers[j] * n.delta) / n.ktilde;
  return n;
}

namespace {

struct CutRates {
  double out = 0.0;
  double in = 0.0;
};

CutRates cut_rates(const NetworkSpec& spec, std::span<const double> phi, std::uint32_t mask) {
  CutRates r;
  for (std::size_t i = 0; i < spec.types.size(); ++i) {
    const auto& t = spec.types[i];
    bool p_in = false, p_out = false, d_in = false, d_out = false;
    for (int j : t.pickup) ((mask >> j) & 1u ? p_in : p_out) = true;
    for (int k : t.dropoff) ((mask >> k) & 1u ? d_in : d_out) = true;
    if (p_in && d_out) r.out += phi[i];
    if (p_out && d_in) r.in += phi[i];
  }
  return r;
}

void check_cut_size(const NetworkSpec& spec) {
  if (spec.m > 20) throw Error(ErrorCode::TooManyNodes, "cut enumeration supports at most 20 nodes");
}

}  // namespace

double connectivity_alpha(const NetworkSpec& spec, std::span<const double> phi) {
  check_cut_size(spec);
  const std::uint32_t full = (1u << spec.m) - 1u;
  double alpha = 1e300;
  for (std::uint32_t mask = 1; mask < full; ++mask) alpha = std::min(alpha, cut_rates(spec, phi, mask).out);
  return alpha;
}

CrpWitness crp_witness(const NetworkSpec& spec, std::span<const double> phi) {
  check_cut_size(spec);
  const std::uint32_t full = (1u << spec.m) - 1u;
  for (std::uint32_t mask = 1; mask < full; ++mask) {
    CutRates r = cut_rates(spec, phi, mask);
    if (r.out >= r.in) {
      CrpWitness w;
      for (int j = 0; j < spec.m; ++j)
        if ((mask >> j) & 1u) w.subset.push_back(j);
      w.mu = r.out;
      w.lambda = r.in;
      return w;
    }
  }
  throw Error(ErrorCode::NoCut, "no subset has outflow at least its inflow");
}

// ---------------------------------------------------------------- sampling

DemandSampler::DemandSampler(const DemandModel& model) : model_(&model) {
  if (model.stationary()) build(model.phi);
}

void DemandSampler::build(const std::vector<double>& phi) {
  cumulative_.resize(phi.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < phi.size(); ++i) cumulative_[i] = (acc += phi[i]);
}

int DemandSampler::sample(std::int64_t t, double u) {
  if (!model_->stationary()) {
    model_->rates_at(t, scratch_);
    build(scratch_);
  }
  const double x = u * cumulative_.back();
  const std::size_t n = cumulative_.size();
  for (std::size_t i = 0; i < n; ++i)
    if (x < cumulative_[i]) return static_cast<int>(i);
  for (std::size_t i = n; i-- > 0;)
    if (i == 0 || cumulative_[i] > cumulative_[i - 1]) return static_cast<int>(i);
  return 0;
}

}  // namespace mbp

namespace mbp {

namespace {

QueueState empty_state(const NetworkSpec& spec, std::int64_t K) {
  QueueState s;
  s.K = K;
  s.cap = buffer_capacities(spec, K);
  s.q.assign(spec.m, 0);
  return s;
}

}  // namespace

QueueState balanced_state(const NetworkSpec& spec, std::int64_t K) {
  QueueState s = empty_state(spec, K);
  std::int64_t left = K;
  // Whole rounds first, then one unit at a time.
  while (left > 0) {
    int open = 0;
    for (int j = 0; j < spec.m; ++j) open += s.q[j] < s.cap[j];
    std::int64_t per = left / open;
    if (per == 0) break;
    for (int j = 0; j < spec.m; ++j) {
      std::int64_t add = std::min(per, s.cap[j] - s.q[j]);
      s.q[j] += add;
      left -= add;
    }
  }
  for (int j = 0; left > 0; j = (j + 1) % spec.m) {
    if (s.q[j] < s.cap[j]) {
      ++s.q[j];
      --left;
    }
  }
  return s;
}

QueueState uniform_state(const NetworkSpec& spec, std::int64_t K, std::mt19937_64& rng) {
  QueueState s = empty_state(spec, K);
  const int m = spec.m;
  std::vector<std::int64_t> bars(m - 1);
  for (int attempt = 0; attempt < 1000000; ++attempt) {
    // Stars and bars: m-1 distinct bar positions among K+m-1 slots.
    std::uniform_int_distribution<std::int64_t> pick(0, K + m - 2);
    for (int i = 0; i < m - 1; ++i) {
      std::int64_t b;
      do {
        b = pick(rng);
      } while (std::find(bars.begin(), bars.begin() + i, b) != bars.begin() + i);
      bars[i] = b;
    }
    std::sort(bars.begin(), bars.end());
    std::int64_t prev = -1;
    bool ok = true;
    for (int j = 0; j < m; ++j) {
      std::int64_t edge = j < m - 1 ? bars[j] : K + m - 1;
      s.q[j] = edge - prev - 1;
      prev = edge;
      ok = ok && s.q[j] <= s.cap[j];
    }
    if (ok) return s;
  }
  throw Error(ErrorCode::BufferInfeasible, "could not sample a state within the buffers");
}

QueueState boundary_state(const NetworkSpec& spec, std::int64_t K, std::mt19937_64& rng) {
  QueueState s = uniform_state(spec, K, rng);
  std::uniform_int_distribution<int> node(0, spec.m - 1);
  int j = 0;
  std::int64_t target = 0;
  // Pick a node and a boundary level the other buffers can make room for.
  for (;;) {
    j = node(rng);
    bool make_full = spec.buffered(j) && (rng() & 1u);
    target = make_full ? s.cap[j] : 0;
    std::int64_t room = 0;
    for (int i = 0; i < spec.m; ++i)
      if (i != j) room += s.cap[i];
    if (room >= K - target) break;
  }
  // Move units between j and the others until j reaches the target.
  while (s.q[j] != target) {
    int i = node(rng);
    if (i == j) continue;
    std::int64_t move = s.q[j] > target ? std::min(s.q[j] - target, s.cap[i] - s.q[i])
                                        : -std::min(target - s.q[j], s.q[i]);
    s.q[j] -= move;
    s.q[i] += move;
  }
  return s;
}

QueueState mixed_state(const NetworkSpec& spec, std::int64_t K, std::mt19937_64& rng) {
  return uniform01(rng) < 0.1 ? boundary_state(spec, K, rng) : uniform_state(spec, K, rng);
}

QueueState corner_state(const NetworkSpec& spec, std::int64_t K, int j) {
  QueueState s = empty_state(spec, K);
  std::int64_t left = K;
  s.q[j] = std::min(left, s.cap[j]);
  left -= s.q[j];
  for (int i = 0; i < spec.m && left > 0; ++i) {
    if (i == j) continue;
    std::int64_t add = std::min(left, s.cap[i]);
    s.q[i] = add;
    left -= add;
  }
  return s;
}

QueueState explicit_state(const NetworkSpec& spec, std::int64_t K, std::vector<std::int64_t> q) {
  QueueState s = empty_state(spec, K);
  if (static_cast<int>(q.size()) != spec.m) throw Error(ErrorCode::BadInput, "state length");
  std::int64_t total = 0;
  for (int j = 0; j < spec.m; ++j) {
    if (q[j] < 0 || q[j] > s.cap[j]) throw Error(ErrorCode::BadInput, "state outside buffers");
    total += q[j];
  }
  if (total != K) throw Error(ErrorCode::BadInput, "state does not hold K units");
  s.q = std::move(q);
  return s;
}

}  // namespace mbp

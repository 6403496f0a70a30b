#include "mbp/diagnostics.hpp"

#include <algorithm>
#include <cmath>

namespace mbp {

namespace {

struct Outcome {
  double prob = 0.0;  // probability that the unit moves
  double payoff = 0.0;
  int j = -1;
  int k = -1;
};

Outcome mbp_outcome(const NetworkSpec& spec, const DemandType& t, std::span<const double> cost,
                    const QueueState& s) {
  Outcome o;
  Decision d;
  switch (spec.setting) {
    case Setting::EntryControl: d = mbp_entry_decide(t, cost, s); break;
    case Setting::JEA:
    case Setting::Scrip: d = mbp_jea_decide(t, cost, s); break;
    case Setting::JPA: d = mbp_jpa_decide(t, cost, s); break;
  }
  if (!d.serve) return o;
  o.j = d.pickup;
  o.k = d.dropoff;
  if (spec.setting == Setting::JPA) {
    o.prob = d.mu;
    o.payoff = d.price - t.c(d.a, d.b);
  } else {
    o.prob = 1.0;
    o.payoff = t.w(d.a, d.b);
  }
  return o;
}

}  // namespace

DriftTerms drift_terms(const NetworkSpec& spec, const Congestion& f, const QueueState& s, std::span<const double> phi,
                       double W_spp) {
  const int m = spec.m;
  const double kt = f.ktilde();
  const double h = 1.0 / kt;
  std::vector<double> qbar(m), cost(m);
  for (int j = 0; j < m; ++j) {
    qbar[j] = f.qbar(j, s.q[j]);
    cost[j] = f.value(j, qbar[j]);
  }

  DriftTerms d;
  double Ev = 0.0, dF = 0.0, breg = 0.0;
  for (std::size_t tau = 0; tau < spec.types.size(); ++tau) {
    if (phi[tau] <= 0.0) continue;
    Outcome o = mbp_outcome(spec, spec.types[tau], cost, s);
    if (o.prob <= 0.0) continue;
    Ev += phi[tau] * o.prob * o.payoff;
    if (o.j == o.k) continue;
    // Only the two touched coordinates change.
    double qj = qbar[o.j] - h, qk = qbar[o.k] + h;
    double drop = (f.antiderivative(o.j, qbar[o.j]) - f.antiderivative(o.j, qj)) +
                  (f.antiderivative(o.k, qbar[o.k]) - f.antiderivative(o.k, qk));
    dF += phi[tau] * o.prob * drop;
    // Bregman divergence of the next state from the current one.
    double b = -drop + h * cost[o.j] - h * cost[o.k];
    breg += phi[tau] * o.prob * b;
  }
  d.lhs = W_spp - Ev;
  d.V1 = kt * dF;
  d.remainder = kt * breg;

  double dmax = 0.0, dmax_nb = 0.0;
  for (int j = 0; j < m; ++j) {
    dmax = std::max(dmax, std::abs(f.derivative(j, qbar[j])));
    for (std::int64_t q = std::max<std::int64_t>(0, s.q[j] - 1); q <= std::min(s.cap[j], s.q[j] + 1); ++q)
      dmax_nb = std::max(dmax_nb, f.derivative(j, f.qbar(j, q)));
    if (s.q[j] == 0 || s.q[j] == s.cap[j]) d.boundary = true;
  }
  d.V2 = dmax / (2.0 * kt);
  d.V2c = dmax_nb / kt;
  d.V3 = W_spp - eval_dual(spec, phi, cost);
  d.V4 = d.boundary ? 1.0 : 0.0;
  return d;
}

DualBound dual_subopt_bound(const NetworkSpec& spec, const Congestion& f, const QueueState& s,
                            std::span<const double> phi, double W_spp, double alpha) {
  std::vector<double> cost(spec.m);
  for (int j = 0; j < spec.m; ++j) cost[j] = f.cost(j, s.q[j]);
  auto [lo, hi] = std::minmax_element(cost.begin(), cost.end());
  DualBound b;
  b.V3 = W_spp - eval_dual(spec, phi, cost);
  b.bound = -alpha * std::max(0.0, *hi - *lo - 2.0 * spec.m);
  return b;
}

double bregman(const Congestion& f, std::span<const double> q1, std::span<const double> q2) {
  double d = f.lyapunov(q1) - f.lyapunov(q2);
  for (int j = 0; j < f.m(); ++j) d -= f.value(j, q2[j]) * (q1[j] - q2[j]);
  return d;
}

double subgradient_slack(const NetworkSpec& spec, std::span<const double> phi, std::span<const double> y,
                         std::span<const double> y_other) {
  std::vector<double> sub;
  double g = eval_dual(spec, phi, y, sub);
  double g2 = eval_dual(spec, phi, y_other);
  double lin = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j) lin += sub[j] * (y_other[j] - y[j]);
  return g2 - g - lin;
}

std::vector<double> mbp_drift(const NetworkSpec& spec, const Congestion& f, const QueueState& s,
                              std::span<const double> phi) {
  std::vector<double> cost(spec.m), out(spec.m, 0.0);
  for (int j = 0; j < spec.m; ++j) cost[j] = f.cost(j, s.q[j]);
  for (std::size_t tau = 0; tau < spec.types.size(); ++tau) {
    if (phi[tau] <= 0.0) continue;
    Outcome o = mbp_outcome(spec, spec.types[tau], cost, s);
    if (o.prob <= 0.0 || o.j == o.k) continue;
    out[o.j] += phi[tau] * o.prob;
    out[o.k] -= phi[tau] * o.prob;
  }
  return out;
}

double subgradient_slack(const NetworkSpec& spec, std::span<const double> phi, std::span<const double> y,
                         std::span<const double> sub, std::span<const double> y_other) {
  double lin = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j) lin += sub[j] * (y_other[j] - y[j]);
  return eval_dual(spec, phi, y_other) - eval_dual(spec, phi, y) - lin;
}

TelescopeReport telescoping_check(const Congestion& f, double F0, const std::vector<double>& trace) {
  TelescopeReport r;
  double sum = 0.0, comp = 0.0, prev = F0;
  for (double F : trace) {
    double x = f.ktilde() * (prev - F);
    double t = sum + x;
    comp += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
    prev = F;
  }
  r.sum_V1 = sum + comp;
  r.endpoint = trace.empty() ? 0.0 : f.ktilde() * (F0 - trace.back());
  r.abs_error = std::abs(r.sum_V1 - r.endpoint);
  return r;
}

LemmaReport verify_lemmas(const NetworkSpec& spec, std::int64_t K, const CongestionConfig& cfg, int samples,
                          int directions, std::int64_t periods, std::uint64_t seed, double tol) {
  LemmaReport rep;
  Congestion f(spec, K, cfg);
  const auto& phi = spec.demand.phi;
  const double W = solve_spp(spec, phi).W;
  const double alpha = connectivity_alpha(spec, phi);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  rep.worst_loss_slack = rep.worst_printed_slack = rep.worst_dual_slack = rep.worst_subgradient_slack = 1e300;

  for (int i = 0; i < samples; ++i) {
    QueueState s = mixed_state(spec, K, rng);
    ++rep.states;
    DriftTerms d = drift_terms(spec, f, s, phi, W);
    double slack = d.rhs_conservative() - d.lhs;
    rep.worst_loss_slack = std::min(rep.worst_loss_slack, slack);
    if (slack < -tol) ++rep.loss_violations;
    double printed = d.rhs() - d.lhs;
    rep.worst_printed_slack = std::min(rep.worst_printed_slack, printed);
    if (printed < -tol) ++rep.printed_loss_violations;
    rep.max_remainder = std::max(rep.max_remainder, d.remainder);

    DualBound b = dual_subopt_bound(spec, f, s, phi, W, alpha);
    rep.worst_dual_slack = std::min(rep.worst_dual_slack, b.bound - b.V3);
    if (b.V3 > b.bound + tol) ++rep.dual_violations;

    std::vector<double> y(spec.m), qbar(spec.m), other(spec.m);
    for (int j = 0; j < spec.m; ++j) {
      qbar[j] = f.qbar(j, s.q[j]);
      y[j] = f.value(j, qbar[j]);
    }
    if (!d.boundary) {
      ++rep.interior_states;
      auto sub = mbp_drift(spec, f, s, phi);
      for (int r = 0; r < directions; ++r) {
        std::vector<double> y2 = y;
        for (double& v : y2) v += N(rng);
        double sl = subgradient_slack(spec, phi, y, sub, y2);
        rep.worst_subgradient_slack = std::min(rep.worst_subgradient_slack, sl);
        if (sl < -tol) ++rep.subgradient_violations;
      }
    }
    QueueState t = mixed_state(spec, K, rng);
    for (int j = 0; j < spec.m; ++j) other[j] = f.qbar(j, t.q[j]);
    if (bregman(f, other, qbar) < -tol) ++rep.bregman_violations;
  }

  if (periods > 0) {
    Policy p(spec, K, {PolicyKind::MBP, cfg});
    RunConfig rc;
    rc.K = K;
    rc.T = periods;
    rc.seed = seed + 1;
    rc.record_lyapunov = true;
    RunMetrics r = run(spec, p, rc);
    QueueState s0 = balanced_state(spec, K);
    std::vector<double> q0(spec.m);
    for (int j = 0; j < spec.m; ++j) q0[j] = f.qbar(j, s0.q[j]);
    rep.telescoping_error = telescoping_check(f, f.lyapunov(q0), r.lyapunov).abs_error;
    rep.telescoping_periods = periods;
  }
  return rep;
}

NetworkSpec example_cycle(double eps, double w) {
  NetworkSpec spec;
  spec.name = "three_node_cycle";
  spec.setting = Setting::EntryControl;
  spec.m = 3;
  auto add = [&](const char* id, int j, int k, double payoff, double rate) {
    DemandType t;
    t.id = id;
    t.pickup = {j};
    t.dropoff = {k};
    t.payoff = {payoff};
    spec.types.push_back(t);
    spec.demand.phi.push_back(rate);
  };
  add("12", 0, 1, w / 2.0, eps);
  add("21", 1, 0, w / 2.0, 1.0 / 3.0 - eps);
  add("23", 1, 2, w, 1.0 / 3.0 + eps);
  add("32", 2, 1, w / 2.0, 1.0 / 3.0 - eps);
  finalize(spec);
  return spec;
}

NetworkSpec example_buffered() {
  NetworkSpec s;
  s.name = "buffered_three_node";
  s.setting = Setting::JEA;
  s.m = 3;
  s.buffers = {0.4, 0.4, 1.0};
  s.types = {
      {"x", {0, 1}, {2}, {0.6, 0.8}, {}, {}},
      {"y", {2}, {0, 1}, {1.0, 0.5}, {}, {}},
      {"z", {1, 2}, {0}, {0.3, 0.4}, {}, {}},
      {"u", {0}, {1, 2}, {0.2, 0.9}, {}, {}},
  };
  s.demand.phi = {0.3, 0.3, 0.2, 0.2};
  finalize(s);
  return s;
}

BpCounterexample bp_counterexample(double w, double c, double eps, std::int64_t K) {
  BpCounterexample r;
  r.q2_star = (2.0 * c - 3.0 * w) / (6.0 * c);
  const double star[3] = {1.0 / 3.0, r.q2_star, (2.0 * c + 3.0 * w) / (6.0 * c)};
  r.interior = r.q2_star > 0.0;

  // Probe state with q = (2K/3, 0, K/3) and the linear policy on q/K.
  std::int64_t q[3] = {2 * K / 3, 0, K - 2 * K / 3};
  const double Kd = static_cast<double>(K);
  struct Edge {
    int j, k;
    double w, rate;
  };
  const Edge edges[4] = {{0, 1, w / 2.0, eps}, {1, 0, w / 2.0, 1.0 / 3.0 - eps}, {1, 2, w, 1.0 / 3.0 + eps},
                         {2, 1, w / 2.0, 1.0 / 3.0 - eps}};
  auto dist2 = [&](const double* x) {
    double s = 0.0;
    for (int i = 0; i < 3; ++i) s += (x[i] - star[i]) * (x[i] - star[i]);
    return s;
  };
  double now[3];
  for (int i = 0; i < 3; ++i) now[i] = static_cast<double>(q[i]) / Kd;
  const double base = dist2(now);
  double drift = 0.0;
  for (const auto& e : edges) {
    bool serve = q[e.j] > 0 && e.w + c * (now[e.j] - now[e.k]) >= 0.0;
    if (!serve) continue;
    double next[3] = {now[0], now[1], now[2]};
    next[e.j] -= 1.0 / Kd;
    next[e.k] += 1.0 / Kd;
    drift += e.rate * (dist2(next) - base);
  }
  r.drift_at_probe = drift;
  r.probe_linear_coefficient = drift * Kd;
  return r;
}

}  // namespace mbp

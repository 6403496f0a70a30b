#include "mbp/planning.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace mbp {

namespace {

struct VarIndex {
  std::vector<int> offset;  // first variable of each type
  int count = 0;
};

VarIndex index_vars(const NetworkSpec& spec) {
  VarIndex v;
  for (const auto& t : spec.types) {
    v.offset.push_back(v.count);
    v.count += static_cast<int>(t.pickup.size() * t.dropoff.size());
  }
  return v;
}

// Flow balance on nodes 1..m-1 (node 0 is implied) and one demand row per type.
LinearProgram flow_polytope(const NetworkSpec& spec, std::span<const double> phi, const VarIndex& vars) {
  LinearProgram lp;
  lp.c.assign(vars.count, 0.0);
  for (int j = 1; j < spec.m; ++j) {
    std::vector<double> row(vars.count, 0.0);
    for (std::size_t tau = 0; tau < spec.types.size(); ++tau) {
      const auto& t = spec.types[tau];
      for (std::size_t a = 0; a < t.pickup.size(); ++a)
        for (std::size_t b = 0; b < t.dropoff.size(); ++b) {
          int v = vars.offset[tau] + static_cast<int>(a * t.dropoff.size() + b);
          if (t.pickup[a] == j) row[v] += 1.0;
          if (t.dropoff[b] == j) row[v] -= 1.0;
        }
    }
    lp.add_row(std::move(row), RowSense::Eq, 0.0);
  }
  for (std::size_t tau = 0; tau < spec.types.size(); ++tau) {
    std::vector<double> row(vars.count, 0.0);
    const auto& t = spec.types[tau];
    for (std::size_t i = 0; i < t.pickup.size() * t.dropoff.size(); ++i) row[vars.offset[tau] + i] = 1.0;
    lp.add_row(std::move(row), RowSense::Le, phi[tau]);
  }
  return lp;
}

std::vector<std::vector<double>> split_flows(const NetworkSpec& spec, const VarIndex& vars,
                                             const std::vector<double>& x) {
  std::vector<std::vector<double>> z(spec.types.size());
  for (std::size_t tau = 0; tau < spec.types.size(); ++tau) {
    std::size_t n = spec.types[tau].pickup.size() * spec.types[tau].dropoff.size();
    z[tau].assign(x.begin() + vars.offset[tau], x.begin() + vars.offset[tau] + n);
  }
  return z;
}

std::vector<double> served_fractions(std::span<const double> phi, const std::vector<std::vector<double>>& z) {
  std::vector<double> s(z.size(), 0.0);
  for (std::size_t tau = 0; tau < z.size(); ++tau) {
    double total = 0.0;
    for (double v : z[tau]) total += v;
    s[tau] = phi[tau] > 0.0 ? total / phi[tau] : 0.0;
  }
  return s;
}

}  // namespace

SppSolution solve_spp(const NetworkSpec& spec, std::span<const double> phi, std::optional<SupplyCap> supply) {
  if (spec.setting == Setting::JPA) {
    if (supply) throw Error(ErrorCode::NotSupported, "supply cap with pricing");
    return solve_spp_jpa(spec, phi);
  }
  VarIndex vars = index_vars(spec);
  LinearProgram lp = flow_polytope(spec, phi, vars);
  for (std::size_t tau = 0; tau < spec.types.size(); ++tau) {
    const auto& t = spec.types[tau];
    for (std::size_t i = 0; i < t.payoff.size(); ++i) lp.c[vars.offset[tau] + i] = t.payoff[i];
  }
  if (supply) {
    if (spec.travel.empty()) throw Error(ErrorCode::BadInput, "supply cap needs travel times");
    std::vector<double> row(vars.count, 0.0);
    for (std::size_t tau = 0; tau < spec.types.size(); ++tau) {
      const auto& t = spec.types[tau];
      for (std::size_t a = 0; a < t.pickup.size(); ++a)
        for (std::size_t b = 0; b < t.dropoff.size(); ++b)
          row[vars.offset[tau] + a * t.dropoff.size() + b] = spec.travel.delay(static_cast<int>(tau), a, b);
    }
    lp.add_row(std::move(row), RowSense::Le, supply->cap);
  }

  LpSolution lps = solve_lp(lp);
  SppSolution sol;
  sol.W = lps.objective;
  sol.z = split_flows(spec, vars, lps.x);
  sol.served = served_fractions(phi, sol.z);
  sol.cert = certify(lp, lps);
  sol.iterations = lps.iterations;
  // Row j-1 holds node j's balance; its multiplier enters the dual with the opposite sign.
  sol.y.assign(spec.m, 0.0);
  for (int j = 1; j < spec.m; ++j) sol.y[j] = -lps.y[j - 1];
  return sol;
}

// ---------------------------------------------------------------- pricing

namespace {

struct PricingObjective {
  const NetworkSpec& spec;
  std::span<const double> phi;
  const VarIndex& vars;

  std::vector<double> type_sums(const std::vector<double>& z) const {
    std::vector<double> s(spec.types.size(), 0.0);
    for (std::size_t tau = 0; tau < spec.types.size(); ++tau) {
      std::size_t n = spec.types[tau].cost.size();
      for (std::size_t i = 0; i < n; ++i) s[tau] += z[vars.offset[tau] + i];
    }
    return s;
  }

  double fraction(std::size_t tau, double s) const {
    return phi[tau] > 0.0 ? std::clamp(s / phi[tau], 0.0, 1.0) : 0.0;
  }

  double value(const std::vector<double>& z) const {
    auto s = type_sums(z);
    double h = 0.0;
    for (std::size_t tau = 0; tau < spec.types.size(); ++tau) {
      const auto& t = spec.types[tau];
      h += phi[tau] * t.wtp.revenue(fraction(tau, s[tau]));
      for (std::size_t i = 0; i < t.cost.size(); ++i) h -= t.cost[i] * z[vars.offset[tau] + i];
    }
    return h;
  }

  std::vector<double> gradient(const std::vector<double>& z) const {
    auto s = type_sums(z);
    std::vector<double> g(z.size(), 0.0);
    for (std::size_t tau = 0; tau < spec.types.size(); ++tau) {
      const auto& t = spec.types[tau];
      double slope = t.wtp.revenue_slope(fraction(tau, s[tau]));
      for (std::size_t i = 0; i < t.cost.size(); ++i) g[vars.offset[tau] + i] = slope - t.cost[i];
    }
    return g;
  }

  // Slope of gamma -> h(z + gamma d).
  double directional(const std::vector<double>& z, const std::vector<double>& d, double gamma) const {
    std::vector<double> p(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) p[i] = z[i] + gamma * d[i];
    auto g = gradient(p);
    double v = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) v += g[i] * d[i];
    return v;
  }
};

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

SppSolution solve_spp_jpa(const NetworkSpec& spec, std::span<const double> phi, FrankWolfeOptions opt) {
  if (spec.setting != Setting::JPA) throw Error(ErrorCode::NotSupported, "pricing solver needs a pricing network");
  VarIndex vars = index_vars(spec);
  LinearProgram lp = flow_polytope(spec, phi, vars);
  PricingObjective obj{spec, phi, vars};
  const std::size_t n = static_cast<std::size_t>(vars.count);

  struct Atom {
    std::vector<double> v;
    double weight;
  };
  // The zero flow is a vertex of the polytope.
  std::vector<Atom> active{{std::vector<double>(n, 0.0), 1.0}};
  std::vector<double> z(n, 0.0);

  SppSolution sol;
  double gap = 0.0;
  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    auto g = obj.gradient(z);
    lp.c = g;
    std::vector<double> v = solve_lp(lp).x;
    gap = dot(g, v) - dot(g, z);
    double h = obj.value(z);
    if (gap <= opt.rel_gap * std::max(std::abs(h), 1e-12)) break;

    std::size_t away = 0;
    for (std::size_t i = 1; i < active.size(); ++i)
      if (dot(g, active[i].v) < dot(g, active[away].v)) away = i;
    double away_gain = dot(g, z) - dot(g, active[away].v);

    std::vector<double> d(n);
    double gamma_max;
    bool fw_step = gap >= away_gain || active.size() == 1;
    if (fw_step) {
      for (std::size_t i = 0; i < n; ++i) d[i] = v[i] - z[i];
      gamma_max = 1.0;
    } else {
      for (std::size_t i = 0; i < n; ++i) d[i] = z[i] - active[away].v[i];
      double wa = active[away].weight;
      gamma_max = wa / (1.0 - wa);
    }

    // Exact line search on the concave restriction.
    double lo = 0.0, hi = gamma_max;
    if (obj.directional(z, d, gamma_max) >= 0.0) {
      lo = hi;
    } else {
      for (int k = 0; k < 100 && hi - lo > 1e-15 * gamma_max; ++k) {
        double mid = 0.5 * (lo + hi);
        if (obj.directional(z, d, mid) > 0.0) lo = mid; else hi = mid;
      }
    }
    double gamma = lo;
    for (std::size_t i = 0; i < n; ++i) z[i] += gamma * d[i];

    if (fw_step) {
      for (auto& a : active) a.weight *= (1.0 - gamma);
      auto same = [&](const Atom& a) {
        for (std::size_t i = 0; i < n; ++i)
          if (std::abs(a.v[i] - v[i]) > 1e-12) return false;
        return true;
      };
      auto found = std::find_if(active.begin(), active.end(), same);
      if (found != active.end()) found->weight += gamma;
      else active.push_back({v, gamma});
      if (gamma >= 1.0) active.erase(std::remove_if(active.begin(), active.end(),
                                                     [&](const Atom& a) { return !same(a); }),
                                      active.end());
    } else {
      for (auto& a : active) a.weight *= (1.0 + gamma);
      active[away].weight -= gamma;
      if (gamma >= gamma_max) active.erase(active.begin() + static_cast<long>(away));
    }
    active.erase(std::remove_if(active.begin(), active.end(), [](const Atom& a) { return a.weight <= 1e-15; }),
                 active.end());
  }

  sol.W = obj.value(z);
  sol.z = split_flows(spec, vars, z);
  sol.served = served_fractions(phi, sol.z);
  sol.price.resize(spec.types.size());
  for (std::size_t tau = 0; tau < spec.types.size(); ++tau)
    sol.price[tau] = spec.types[tau].wtp.price_at(std::min(1.0, sol.served[tau]));
  sol.iterations = it;
  sol.gap = gap;
  return sol;
}

// ---------------------------------------------------------------- dual

double eval_dual(const NetworkSpec& spec, std::span<const double> phi, std::span<const double> y,
                 std::vector<double>& subgradient) {
  subgradient.assign(spec.m, 0.0);
  double g = 0.0;
  for (std::size_t tau = 0; tau < spec.types.size(); ++tau) {
    const auto& t = spec.types[tau];
    double best = -1e300;
    int bj = -1, bk = -1;
    for (std::size_t a = 0; a < t.pickup.size(); ++a)
      for (std::size_t b = 0; b < t.dropoff.size(); ++b) {
        int j = t.pickup[a], k = t.dropoff[b];
        double gain = spec.setting == Setting::JPA ? -t.c(a, b) : t.w(a, b);
        double score = gain + y[j] - y[k];
        if (score > best) {
          best = score;
          bj = j;
          bk = k;
        }
      }
    double weight;
    double term;
    if (spec.setting == Setting::JPA) {
      double mu = t.wtp.best_fraction(best);
      term = t.wtp.revenue(mu) + mu * best;
      weight = mu;
    } else {
      term = std::max(0.0, best);
      weight = best > 0.0 ? 1.0 : 0.0;
    }
    g += phi[tau] * term;
    subgradient[bj] += phi[tau] * weight;
    subgradient[bk] -= phi[tau] * weight;
  }
  return g;
}

double eval_dual(const NetworkSpec& spec, std::span<const double> phi, std::span<const double> y) {
  std::vector<double> s;
  return eval_dual(spec, phi, y, s);
}

// ---------------------------------------------------------------- flows

std::vector<FlowArc> spp_arcs(const NetworkSpec& spec, const SppSolution& sol) {
  std::vector<FlowArc> arcs;
  for (std::size_t tau = 0; tau < spec.types.size(); ++tau) {
    const auto& t = spec.types[tau];
    for (std::size_t a = 0; a < t.pickup.size(); ++a)
      for (std::size_t b = 0; b < t.dropoff.size(); ++b)
        arcs.push_back({t.pickup[a], t.dropoff[b], sol.z[tau][a * t.dropoff.size() + b]});
  }
  return arcs;
}

namespace {

// Finds a directed cycle among arcs with positive remaining flow; returns arc ids.
std::vector<int> find_cycle(int m, const std::vector<FlowArc>& arcs, const std::vector<double>& rest) {
  std::vector<std::vector<int>> out(m);
  for (std::size_t e = 0; e < arcs.size(); ++e)
    if (rest[e] > 0.0) out[arcs[e].from].push_back(static_cast<int>(e));
  std::vector<int> color(m, 0), via(m, -1);
  for (int root = 0; root < m; ++root) {
    if (color[root]) continue;
    // Iterative DFS keeping the arc used to enter each node.
    std::vector<std::pair<int, std::size_t>> stack{{root, 0}};
    color[root] = 1;
    while (!stack.empty()) {
      auto& [u, next] = stack.back();
      if (next == out[u].size()) {
        color[u] = 2;
        stack.pop_back();
        continue;
      }
      int e = out[u][next++];
      int w = arcs[e].to;
      if (color[w] == 1) {
        std::vector<int> cycle{e};
        for (int x = u; x != w; x = arcs[via[x]].from) cycle.push_back(via[x]);
        return cycle;
      }
      if (color[w] == 0) {
        color[w] = 1;
        via[w] = e;
        stack.push_back({w, 0});
      }
    }
  }
  return {};
}

}  // namespace

FlowDecomposition flow_decompose(int m, const std::vector<FlowArc>& arcs) {
  FlowDecomposition d;
  d.acyclic.resize(arcs.size());
  d.cyclic.assign(arcs.size(), 0.0);
  for (std::size_t e = 0; e < arcs.size(); ++e) {
    if (arcs[e].flow < 0.0) throw Error(ErrorCode::BadInput, "negative flow");
    d.acyclic[e] = arcs[e].flow;
  }
  // Self-loops are cycles on their own.
  for (std::size_t e = 0; e < arcs.size(); ++e)
    if (arcs[e].from == arcs[e].to && d.acyclic[e] > 0.0) {
      d.cyclic[e] = d.acyclic[e];
      d.acyclic[e] = 0.0;
      ++d.cycles;
    }
  for (;;) {
    std::vector<int> cycle = find_cycle(m, arcs, d.acyclic);
    if (cycle.empty()) break;
    int argmin = cycle[0];
    for (int e : cycle)
      if (d.acyclic[e] < d.acyclic[argmin]) argmin = e;
    double u = d.acyclic[argmin];
    for (int e : cycle) {
      if (e == argmin) continue;
      d.cyclic[e] += u;
      d.acyclic[e] -= u;
      if (d.acyclic[e] < 0.0) d.acyclic[e] = 0.0;
    }
    // The bottleneck arc moves over exactly so that at least one arc empties.
    d.cyclic[argmin] += d.acyclic[argmin];
    d.acyclic[argmin] = 0.0;
    ++d.cycles;
  }
  // Kahn's algorithm on what remains.
  std::vector<int> indeg(m, 0);
  std::vector<std::vector<int>> out(m);
  for (std::size_t e = 0; e < arcs.size(); ++e)
    if (d.acyclic[e] > 0.0) {
      out[arcs[e].from].push_back(arcs[e].to);
      ++indeg[arcs[e].to];
    }
  std::queue<int> ready;
  for (int j = 0; j < m; ++j)
    if (indeg[j] == 0) ready.push(j);
  while (!ready.empty()) {
    int u = ready.front();
    ready.pop();
    d.topo_order.push_back(u);
    for (int w : out[u])
      if (--indeg[w] == 0) ready.push(w);
  }
  return d;
}

// ---------------------------------------------------------------- slowly varying rates

AveragedSppReport averaged_spp_gap_check(const NetworkSpec& spec, const std::vector<std::vector<double>>& sequence) {
  AveragedSppReport rep;
  if (sequence.empty()) throw Error(ErrorCode::BadInput, "empty rate sequence");
  const std::size_t T = sequence.size();
  const std::size_t n = spec.types.size();
  std::vector<double> avg(n, 0.0);
  for (const auto& phi : sequence)
    for (std::size_t i = 0; i < n; ++i) avg[i] += phi[i] / static_cast<double>(T);
  for (std::size_t s = 0; s + 1 < T; ++s) {
    double l1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) l1 += std::abs(sequence[s + 1][i] - sequence[s][i]);
    rep.eta = std::max(rep.eta, l1);
  }
  rep.W_avg = solve_spp(spec, avg).W;
  const double slack = rep.eta * static_cast<double>(T) * spec.m / 2.0;
  rep.min_margin = 1e300;
  for (const auto& phi : sequence) {
    double w = solve_spp(spec, phi).W;
    rep.W_t.push_back(w);
    rep.min_margin = std::min(rep.min_margin, w - (rep.W_avg - slack));
  }
  return rep;
}

}  // namespace mbp

#include "mbp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <mutex>
#include <ostream>
#include <thread>

#include "mbp/diagnostics.hpp"
#include "mbp/planning.hpp"

namespace mbp {

int resolve_workers(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("NUM_WORKERS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::uint64_t replication_seed(std::uint64_t base, std::size_t cell, int rep, std::size_t init) {
  // splitmix64 over the packed coordinates
  std::uint64_t x = base ^ (0x9E3779B97F4A7C15ull * (cell + 1)) ^ (0xBF58476D1CE4E5B9ull * (rep + 1)) ^
                    (0x94D049BB133111EBull * (init + 1));
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  workers = std::max(1, std::min<int>(resolve_workers(workers), static_cast<int>(n)));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

double benchmark_value(const NetworkSpec& spec, std::int64_t warmup, std::int64_t T) {
  const auto& d = spec.demand;
  switch (d.mode) {
    case DemandModel::Mode::Stationary: return solve_spp(spec, d.phi).W;
    case DemandModel::Mode::Sinusoid: {
      // The optimum depends on the period only through the sine; tabulate it.
      const int grid = 2048;
      std::vector<double> table(grid + 1);
      std::vector<double> phi(d.phi.size());
      for (int i = 0; i <= grid; ++i) {
        double s = -1.0 + 2.0 * i / grid;
        for (std::size_t k = 0; k < phi.size(); ++k) phi[k] = std::max(0.0, d.phi[k] + s * d.direction[k]);
        table[i] = solve_spp(spec, phi).W;
      }
      double sum = 0.0;
      for (std::int64_t t = warmup; t < warmup + T; ++t) {
        double s = std::sin(2.0 * M_PI * static_cast<double>(t) / d.period + d.phase);
        double x = (s + 1.0) * 0.5 * grid;
        int i = std::clamp(static_cast<int>(x), 0, grid - 1);
        double frac = x - i;
        sum += table[i] + frac * (table[i + 1] - table[i]);
      }
      return sum / static_cast<double>(T);
    }
    case DemandModel::Mode::Sequence: {
      double sum = 0.0, last = 0.0;
      const std::vector<double>* prev = nullptr;
      for (std::int64_t t = warmup; t < warmup + T; ++t) {
        std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(t), d.sequence.size() - 1);
        if (!prev || *prev != d.sequence[i]) {
          last = solve_spp(spec, d.sequence[i]).W;
          prev = &d.sequence[i];
        }
        sum += last;
      }
      return sum / static_cast<double>(T);
    }
  }
  return 0.0;
}

double averaged_rates_value(const NetworkSpec& spec, std::int64_t warmup, std::int64_t T) {
  if (spec.demand.stationary()) return solve_spp(spec, spec.demand.phi).W;
  std::vector<double> avg(spec.types.size(), 0.0), phi;
  for (std::int64_t t = warmup; t < warmup + T; ++t) {
    spec.demand.rates_at(t, phi);
    for (std::size_t i = 0; i < avg.size(); ++i) avg[i] += phi[i];
  }
  double total = 0.0;
  for (double& x : avg) total += x;
  for (double& x : avg) x /= total;
  return solve_spp(spec, avg).W;
}

namespace {

std::vector<double> type_values(const NetworkSpec& spec, const std::vector<double>& phi) {
  SppSolution sol = solve_spp(spec, phi);
  std::vector<double> unit(spec.types.size(), 0.0), h;
  for (std::size_t tau = 0; tau < unit.size(); ++tau) {
    unit[tau] = 1.0;
    h.push_back(eval_dual(spec, unit, sol.y));
    unit[tau] = 0.0;
  }
  return h;
}

}  // namespace

DualValues::DualValues(const NetworkSpec& spec) : spec_(&spec) {
  const auto& d = spec.demand;
  switch (d.mode) {
    case DemandModel::Mode::Stationary:
      rates_.push_back(d.phi);
      break;
    case DemandModel::Mode::Sinusoid: {
      grid_ = 2048;
      for (int i = 0; i <= grid_; ++i) {
        double s = -1.0 + 2.0 * i / grid_;
        std::vector<double> phi(d.phi.size());
        for (std::size_t k = 0; k < phi.size(); ++k) phi[k] = std::max(0.0, d.phi[k] + s * d.direction[k]);
        rates_.push_back(phi);
      }
      break;
    }
    case DemandModel::Mode::Sequence:
      rates_ = d.sequence;
      break;
  }
  for (std::size_t i = 0; i < rates_.size(); ++i) {
    if (i > 0 && rates_[i] == rates_[i - 1]) {
      table_.push_back(table_.back());
      continue;
    }
    table_.push_back(type_values(spec, rates_[i]));
  }
}

double DualValues::centred(std::int64_t t, int tau) const {
  const auto& d = spec_->demand;
  std::size_t i = 0;
  if (d.mode == DemandModel::Mode::Sinusoid) {
    double s = std::sin(2.0 * M_PI * static_cast<double>(t) / d.period + d.phase);
    i = static_cast<std::size_t>(std::clamp<long>(std::lround((s + 1.0) * 0.5 * grid_), 0, grid_));
  } else if (d.mode == DemandModel::Mode::Sequence) {
    i = std::min<std::size_t>(static_cast<std::size_t>(std::max<std::int64_t>(t, 0)), rates_.size() - 1);
  }
  // The table row need not match the rates at t; centring on the true rates
  // keeps the mean at zero either way.
  thread_local std::vector<double> phi;
  d.rates_at(t, phi);
  const auto& h = table_[i];
  double mean = 0.0;
  for (std::size_t k = 0; k < h.size(); ++k) mean += phi[k] * h[k];
  return h[tau] - mean;
}

namespace {

double normal_quantile(double p) {
  double lo = -10.0, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    if (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

struct Task {
  std::size_t policy, cell, init;
  int rep;
};

}  // namespace

std::vector<GapReport> run_experiment(const Experiment& ex) {
  const NetworkSpec& spec = ex.spec;
  const std::size_t P = ex.policies.size(), C = ex.cells.size();

  // Starting states: one configured state, or corners plus random states.
  std::vector<RunConfig> inits;
  {
    RunConfig base;
    base.init = ex.init;
    base.explicit_q = ex.explicit_q;
    if (!ex.worst_case_init) {
      inits.push_back(base);
    } else {
      for (int j = 0; j < spec.m; ++j) {
        RunConfig c = base;
        c.init = InitialState::Corner;
        c.corner_node = j;
        inits.push_back(c);
      }
      for (int r = 0; r < ex.random_inits; ++r) {
        RunConfig c = base;
        c.init = InitialState::Explicit;
        inits.push_back(c);
      }
    }
  }

  // Plans for the static policy, one per cell.
  std::vector<std::optional<SppSolution>> plans(P);
  for (std::size_t p = 0; p < P; ++p)
    if (ex.policies[p].cfg.kind == PolicyKind::StaticFluid) {
      if (!spec.demand.stationary())
        throw Error(ErrorCode::NotSupported, "static policy with time-varying rates");
      plans[p] = solve_spp(spec, spec.demand.phi);
    }

  std::optional<DualValues> dual;
  if (ex.control_variate) dual.emplace(spec);
  std::vector<double> y;
  if (ex.telescoping_correction) {
    if (!spec.demand.stationary() || !spec.travel.empty())
      throw Error(ErrorCode::NotSupported, "telescoping correction needs stationary rates and no travel times");
    y = solve_spp(spec, spec.demand.phi).y;
  }

  std::vector<Task> tasks;
  for (std::size_t p = 0; p < P; ++p)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t i = 0; i < inits.size(); ++i)
        for (int r = 0; r < ex.replications; ++r) tasks.push_back({p, c, i, r});

  std::vector<RunMetrics> results(tasks.size());
  parallel_for(tasks.size(), ex.workers, [&](std::size_t n) {
    const Task& task = tasks[n];
    const Cell& cell = ex.cells[task.cell];
    RunConfig cfg = inits[task.init];
    cfg.K = cell.K;
    cfg.T = cell.T;
    cfg.warmup = static_cast<std::int64_t>(std::llround(ex.warmup_per_K * static_cast<double>(cell.K)));
    // Common random numbers across policies.
    cfg.seed = replication_seed(ex.seed, task.cell, task.rep, task.init);
    if (cfg.init == InitialState::Explicit && ex.worst_case_init) {
      std::mt19937_64 rng(replication_seed(ex.seed, task.cell, -1, task.init));
      cfg.explicit_q = uniform_state(spec, cell.K, rng).q;
    }
    if (dual) cfg.arrival_weight = [&dual](std::int64_t t, int tau) { return dual->centred(t, tau); };
    Policy policy(spec, cell.K, ex.policies[task.policy].cfg);
    if (plans[task.policy]) policy.set_plan(*plans[task.policy]);
    results[n] = spec.travel.empty() ? run(spec, policy, cfg) : run_with_travel_times(spec, policy, cfg, spec.travel);
  });

  const double z = normal_quantile(0.5 + ex.ci_level / 2.0);
  std::vector<GapReport> reports;
  for (std::size_t c = 0; c < C; ++c) {
    const Cell& cell = ex.cells[c];
    std::int64_t warmup = static_cast<std::int64_t>(std::llround(ex.warmup_per_K * static_cast<double>(cell.K)));
    double bench = benchmark_value(spec, warmup, cell.T);
    double upper = averaged_rates_value(spec, warmup, cell.T);
    for (std::size_t p = 0; p < P; ++p) {
      GapReport best;
      bool have = false;
      for (std::size_t i = 0; i < inits.size(); ++i) {
        GapReport r;
        r.policy = ex.policies[p].label;
        r.K = cell.K;
        r.T = cell.T;
        r.replications = ex.replications;
        for (std::size_t n = 0; n < tasks.size(); ++n) {
          const Task& t = tasks[n];
          if (t.policy != p || t.cell != c || t.init != i) continue;
          double w = results[n].W;
          const auto periods = static_cast<double>(results[n].periods);
          w -= results[n].mean_arrival_weight;
          for (std::size_t j = 0; j < y.size(); ++j)
            w -= y[j] * static_cast<double>(results[n].final_state.q[j] - results[n].start_state.q[j]) / periods;
          r.rep_W.push_back(w);
          r.underflow_blocks += results[n].underflow_blocks;
          r.overflow_blocks += results[n].overflow_blocks;
        }
        double mean = 0.0;
        for (double w : r.rep_W) mean += w;
        mean /= static_cast<double>(r.rep_W.size());
        double var = 0.0;
        for (double w : r.rep_W) var += (w - mean) * (w - mean);
        var = r.rep_W.size() > 1 ? var / static_cast<double>(r.rep_W.size() - 1) : 0.0;
        r.mean_W = mean;
        r.se = std::sqrt(var / static_cast<double>(r.rep_W.size()));
        r.ci_low = mean - z * r.se;
        r.ci_high = mean + z * r.se;
        r.W_bench = bench;
        r.W_upper = upper;
        r.bound = payoff_upper_bound(upper, spec.m, cell.K, cell.T);
        r.gap = bench - mean;
        r.L_T = r.bound - mean;
        if (!have || r.gap > best.gap) best = r;
        have = true;
      }
      reports.push_back(best);
    }
  }
  return reports;
}

Experiment experiment_from_json(const json& j, const std::string& base_dir) {
  Experiment ex;
  try {
    const auto& ji = j.at("instance");
    if (ji.is_object()) {
      ex.spec = network_from_json(ji);
    } else {
      std::filesystem::path inst = ji.get<std::string>();
      if (inst.is_relative()) inst = std::filesystem::path(base_dir) / inst;
      ex.spec = load_network(inst.string());
    }
    for (const auto& jp : j.at("policies")) {
      PolicySpec ps;
      std::string key = jp.at("policy").get<std::string>();
      ps.cfg.kind = policy_from_string(key);
      ps.label = jp.value("label", key);
      if (jp.contains("congestion")) {
        const auto& jc = jp["congestion"];
        ps.cfg.congestion.kind = congestion_from_string(jc.value("kind", std::string("inv_sqrt")));
        if (jc.contains("c")) ps.cfg.congestion.c = jc["c"].get<double>();
      } else if (ps.cfg.kind == PolicyKind::BP) {
        ps.cfg.congestion.kind = CongestionKind::Linear;
      }
      if (jp.contains("c")) ps.cfg.congestion.c = jp["c"].get<double>();
      ps.cfg.fallback_assignment = jp.value("fallback_assignment", false);
      ps.cfg.rho = jp.value("rho", 0.95);
      ex.policies.push_back(ps);
    }
    if (j.contains("cells")) {
      for (const auto& c : j["cells"]) ex.cells.push_back({c.at("K").get<std::int64_t>(), c.at("T").get<std::int64_t>()});
    } else {
      auto Ks = j.at("K").get<std::vector<std::int64_t>>();
      for (auto K : Ks) {
        if (j.contains("T")) {
          for (auto T : j["T"].get<std::vector<std::int64_t>>()) ex.cells.push_back({K, T});
        } else {
          double per = j.at("T_per_K").get<double>();
          ex.cells.push_back({K, static_cast<std::int64_t>(std::llround(per * static_cast<double>(K)))});
        }
      }
    }
    ex.replications = j.value("replications", 50);
    ex.seed = j.value("seed", std::uint64_t{1});
    ex.warmup_per_K = j.value("warmup_per_K", 0.0);
    ex.init = initial_state_from_string(j.value("initial_state", std::string("balanced")));
    if (j.contains("explicit_state")) ex.explicit_q = j["explicit_state"].get<std::vector<std::int64_t>>();
    ex.worst_case_init = j.value("worst_case_init", false);
    ex.random_inits = j.value("random_inits", 20);
    ex.ci_level = j.value("ci_level", 0.90);
    ex.control_variate = j.value("control_variate", false);
    ex.telescoping_correction = j.value("telescoping_correction", false);
    ex.workers = j.value("workers", 0);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadInput, e.what());
  }
  return ex;
}

json to_json(const GapReport& r) {
  return json{{"policy", r.policy},   {"K", r.K},         {"T", r.T},           {"replications", r.replications},
              {"mean_W", r.mean_W},   {"se", r.se},       {"ci_low", r.ci_low}, {"ci_high", r.ci_high},
              {"W_bench", r.W_bench}, {"W_upper", r.W_upper}, {"bound", r.bound}, {"gap", r.gap},
              {"L_T", r.L_T},         {"underflow_blocks", r.underflow_blocks},
              {"overflow_blocks", r.overflow_blocks}};
}

void write_reports_csv(std::ostream& os, const std::vector<GapReport>& reports) {
  os << "policy,K,T,replications,mean_W,se,ci_low,ci_high,W_bench,W_upper,bound,gap,L_T\n";
  for (const auto& r : reports)
    os << r.policy << ',' << r.K << ',' << r.T << ',' << r.replications << ',' << r.mean_W << ',' << r.se << ','
       << r.ci_low << ',' << r.ci_high << ',' << r.W_bench << ',' << r.W_upper << ',' << r.bound << ',' << r.gap
       << ',' << r.L_T << '\n';
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& gap) {
  const std::size_t n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double lx = std::log(x[i]), ly = std::log(gap[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace mbp

namespace mbp {

bool under_bound(const GapReport& r, double z) { return r.mean_W <= r.bound + z * r.se; }

namespace {

Experiment cycle_experiment(const ScalingOptions& opt) {
  Experiment ex;
  ex.spec = example_cycle(0.05);
  ex.policies = {{"mbp", {PolicyKind::MBP, {CongestionKind::InverseSqrt, std::nullopt}}}};
  ex.replications = opt.replications;
  ex.seed = opt.seed;
  ex.workers = opt.workers;
  ex.worst_case_init = true;
  ex.random_inits = 0;
  ex.control_variate = true;
  return ex;
}

std::string describe(const ScalingVerdict& v, const char* label) {
  std::string out;
  char buf[96];
  for (std::size_t i = 0; i < v.x.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%s%s=%g gap=%.4g", i ? ", " : "", label, v.x[i], v.gap[i]);
    out += buf;
  }
  return out;
}

bool positive_decreasing(const std::vector<double>& g) {
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!(g[i] > 0.0) || (i > 0 && !(g[i] < g[i - 1]))) return false;
  return true;
}

}  // namespace

ScalingVerdict steady_state_check(const ScalingOptions& opt) {
  Experiment ex = cycle_experiment(opt);
  for (std::int64_t K : {50, 200, 800}) ex.cells.push_back({K, 10000 * K});
  ScalingVerdict v;
  v.name = "steady_state_1_over_K";
  v.reports = run_experiment(ex);
  for (const auto& r : v.reports) {
    v.x.push_back(static_cast<double>(r.K));
    v.gap.push_back(r.gap);
  }
  v.pass = positive_decreasing(v.gap) && v.gap.back() <= v.gap.front() / 4.0;
  v.detail = describe(v, "K");
  return v;
}

ScalingVerdict transient_check(const ScalingOptions& opt) {
  Experiment ex = cycle_experiment(opt);
  const std::int64_t K = 200;
  for (std::int64_t m : {1, 10, 1000}) ex.cells.push_back({K, m * K});
  ScalingVerdict v;
  v.name = "transient_K_over_T";
  v.reports = run_experiment(ex);
  for (const auto& r : v.reports) {
    v.x.push_back(static_cast<double>(r.T));
    v.gap.push_back(r.gap);
  }
  v.pass = positive_decreasing(v.gap) && v.gap.back() <= v.gap.front() / 3.0;
  v.detail = describe(v, "T");
  return v;
}

ScalingVerdict time_varying_check(const ScalingOptions& opt) {
  const std::vector<double> etas{1e-6, 4e-6, 1.6e-5};
  const std::vector<double> dir{0.1, -0.1, 0.05, -0.05};
  const std::int64_t K = 400;
  NetworkSpec base = example_buffered();
  // Two full periods of the slowest sinusoid; a whole number for the others.
  const auto T = static_cast<std::int64_t>(
      std::llround(2.0 * DemandModel::sinusoid(base.demand.phi, dir, etas.front()).period));
  ScalingVerdict v;
  v.name = "time_varying_sqrt_eta";
  for (double eta : etas) {
    Experiment ex;
    ex.spec = base;
    ex.spec.demand = DemandModel::sinusoid(base.demand.phi, dir, eta);
    ex.policies = {{"mbp", {PolicyKind::MBP, {CongestionKind::InverseSqrtBuffered, std::nullopt}}}};
    ex.cells = {{K, T}};
    ex.replications = opt.replications;
    ex.seed = opt.seed;
    ex.workers = opt.workers;
    ex.warmup_per_K = 200.0;
    ex.control_variate = true;
    GapReport r = run_experiment(ex).front();
    v.x.push_back(eta);
    v.gap.push_back(r.gap);
    v.reports.push_back(r);
  }
  double lo = 1e300, hi = -1e300;
  bool positive = true;
  for (std::size_t i = 0; i < etas.size(); ++i) {
    positive = positive && v.gap[i] > 0.0;
    double ratio = v.gap[i] / std::sqrt(etas[i]);
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
  }
  v.pass = positive && hi <= 3.0 * lo;
  char buf[64];
  std::snprintf(buf, sizeof buf, "; spread of gap/sqrt(eta) %.3g", positive ? hi / lo : 0.0);
  v.detail = describe(v, "eta") + buf;
  return v;
}

std::vector<ScalingVerdict> gap_scaling_suite(const ScalingOptions& opt) {
  return {steady_state_check(opt), transient_check(opt), time_varying_check(opt)};
}

json to_json(const ScalingVerdict& v) {
  json j = {{"check", v.name}, {"pass", v.pass}, {"detail", v.detail}, {"x", v.x}, {"gap", v.gap}};
  for (const auto& r : v.reports) j["reports"].push_back(to_json(r));
  return j;
}

}  // namespace mbp

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "mbp/diagnostics.hpp"
#include "mbp/harness.hpp"

namespace fs = std::filesystem;
using namespace mbp;

namespace {

constexpr const char* kVersion = "0.1.0";

void write_replications_csv(std::ostream& os, const std::vector<GapReport>& reports) {
  os << "policy,K,T,replication,W\n";
  for (const auto& r : reports)
    for (std::size_t i = 0; i < r.rep_W.size(); ++i)
      os << r.policy << ',' << r.K << ',' << r.T << ',' << i << ',' << r.rep_W[i] << '\n';
}

int simulate(const std::string& config, const std::string& out_dir) {
  json j = read_json_file(config);
  Experiment ex = experiment_from_json(j, fs::path(config).parent_path().string());
  auto reports = run_experiment(ex);
  json summary = json::array();
  for (const auto& r : reports) summary.push_back(to_json(r));
  if (out_dir.empty()) {
    std::cout << summary.dump(2) << '\n';
    return 0;
  }
  fs::create_directories(out_dir);
  std::ofstream reps(fs::path(out_dir) / "replications.csv");
  write_replications_csv(reps, reports);
  std::ofstream cells(fs::path(out_dir) / "cells.csv");
  write_reports_csv(cells, reports);
  std::ofstream js(fs::path(out_dir) / "summary.json");
  js << summary.dump(2) << '\n';
  std::cout << "wrote " << out_dir << '\n';
  return 0;
}

int solve(const std::string& instance) {
  NetworkSpec spec = load_network(instance);
  if (!spec.demand.stationary()) throw Error(ErrorCode::NotSupported, "solve-spp needs stationary rates");
  std::cout << to_json(spec, solve_spp(spec, spec.demand.phi)).dump(2) << '\n';
  return 0;
}

int lemmas(const std::string& instance, int samples, std::int64_t K, const std::string& kind, std::int64_t periods,
           std::uint64_t seed) {
  NetworkSpec spec = load_network(instance);
  CongestionConfig cfg{congestion_from_string(kind), std::nullopt};
  LemmaReport r = verify_lemmas(spec, K, cfg, samples, 100, periods, seed);
  json j = {{"instance", spec.name},
            {"K", K},
            {"congestion", kind},
            {"states", r.states},
            {"interior_states", r.interior_states},
            {"loss_violations", r.loss_violations},
            {"printed_loss_violations", r.printed_loss_violations},
            {"dual_violations", r.dual_violations},
            {"subgradient_violations", r.subgradient_violations},
            {"bregman_violations", r.bregman_violations},
            {"worst_loss_slack", r.worst_loss_slack},
            {"worst_printed_slack", r.worst_printed_slack},
            {"worst_dual_slack", r.worst_dual_slack},
            {"worst_subgradient_slack", r.worst_subgradient_slack},
            {"max_remainder", r.max_remainder},
            {"telescoping_periods", r.telescoping_periods},
            {"telescoping_error", r.telescoping_error},
            {"holds", r.holds()}};
  std::cout << j.dump(2) << '\n';
  return r.holds() ? 0 : 1;
}

int scaling(int replications, std::uint64_t seed) {
  ScalingOptions opt;
  opt.replications = replications;
  opt.seed = seed;
  json out = json::array();
  bool all = true;
  for (auto& v : gap_scaling_suite(opt)) {
    std::cerr << (v.pass ? "PASS " : "FAIL ") << v.name << ": " << v.detail << '\n';
    all = all && v.pass;
    out.push_back(to_json(v));
  }
  std::cout << out.dump(2) << '\n';
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mirror backpressure simulator"};
  app.require_subcommand(1);

  std::string config, out_dir;
  auto* sim = app.add_subcommand("simulate", "Run an experiment config");
  sim->add_option("--config", config, "Experiment JSON")->required()->check(CLI::ExistingFile);
  sim->add_option("--out", out_dir, "Directory for CSV and JSON output; stdout if omitted");

  std::string instance;
  auto* spp = app.add_subcommand("solve-spp", "Solve the static planning problem");
  spp->add_option("--instance", instance, "Instance JSON")->required()->check(CLI::ExistingFile);

  int samples = 1000;
  std::int64_t K = 500, periods = 100000;
  std::string kind = "inv_sqrt";
  std::uint64_t seed = 1;
  auto* lem = app.add_subcommand("verify-lemmas", "Check the drift inequalities at sampled states");
  lem->add_option("--instance", instance, "Instance JSON")->required()->check(CLI::ExistingFile);
  lem->add_option("--samples", samples, "Number of sampled states")->check(CLI::PositiveNumber);
  lem->add_option("-K,--fleet", K, "Fleet size")->check(CLI::PositiveNumber);
  lem->add_option("--congestion", kind, "inv_sqrt | inv_sqrt_buffered | log | linear");
  lem->add_option("--periods", periods, "Trajectory length for the telescoping check");
  lem->add_option("--seed", seed);

  int replications = 50;
  auto* gap = app.add_subcommand("gap-scaling", "Run the three gap scaling checks");
  gap->add_option("--replications", replications)->check(CLI::PositiveNumber);
  gap->add_option("--seed", seed);

  app.add_subcommand("version", "Print the version");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*sim) return simulate(config, out_dir);
    if (*spp) return solve(instance);
    if (*lem) return lemmas(instance, samples, K, kind, periods, seed);
    if (*gap) return scaling(replications, seed);
    std::cout << "mbp " << kVersion << '\n';
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

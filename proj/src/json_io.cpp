#include "mbp/json_io.hpp"

#include <fstream>

namespace mbp {

namespace {

std::vector<double> flat_matrix(const json& v, std::size_t rows, std::size_t cols, const std::string& what) {
  if (v.is_number()) return {v.get<double>()};
  std::vector<double> out;
  if (!v.is_array() || v.size() != rows) throw Error(ErrorCode::BadInput, what + " needs one row per pickup node");
  for (const auto& row : v) {
    if (row.is_number() && cols == 1) {
      out.push_back(row.get<double>());
      continue;
    }
    if (!row.is_array() || row.size() != cols) throw Error(ErrorCode::BadInput, what + " row length");
    for (const auto& x : row) out.push_back(x.get<double>());
  }
  return out;
}

}  // namespace

NetworkSpec network_from_json(const json& j) {
  try {
    NetworkSpec spec;
    spec.name = j.value("name", std::string("network"));
    spec.setting = setting_from_string(j.value("setting", std::string("entry_control")));
    spec.m = j.at("nodes").get<int>();
    if (j.contains("buffers")) spec.buffers = j.at("buffers").get<std::vector<double>>();
    for (const auto& jt : j.at("demand_types")) {
      DemandType t;
      t.id = jt.value("id", std::to_string(spec.types.size()));
      t.pickup = jt.at("pickup").get<std::vector<int>>();
      t.dropoff = jt.at("dropoff").get<std::vector<int>>();
      if (spec.setting == Setting::JPA) {
        t.cost = jt.contains("cost") ? flat_matrix(jt.at("cost"), t.pickup.size(), t.dropoff.size(), "cost")
                                     : std::vector<double>{0.0};
        auto bounds = jt.at("price_bounds").get<std::vector<double>>();
        if (bounds.size() != 2) throw Error(ErrorCode::BadInput, "price_bounds needs two entries");
        t.wtp.pmin = bounds[0];
        t.wtp.pmax = bounds[1];
        const json wtp = jt.value("wtp", json{{"kind", "uniform"}});
        std::string kind = wtp.value("kind", std::string("uniform"));
        if (kind == "uniform") {
          t.wtp.kind = WtpModel::Kind::Uniform;
        } else if (kind == "piecewise_linear_cdf") {
          t.wtp.kind = WtpModel::Kind::PiecewiseLinearCdf;
          for (const auto& k : wtp.at("knots")) t.wtp.knots.emplace_back(k.at(0).get<double>(), k.at(1).get<double>());
        } else {
          throw Error(ErrorCode::UnknownKind, "wtp kind '" + kind + "'");
        }
      } else {
        t.payoff = flat_matrix(jt.at("payoff"), t.pickup.size(), t.dropoff.size(), "payoff");
      }
      spec.types.push_back(std::move(t));
    }
    const json& a = j.at("arrival");
    std::string mode = a.value("mode", std::string("stationary"));
    if (mode == "stationary") {
      spec.demand.mode = DemandModel::Mode::Stationary;
      spec.demand.phi = a.at("phi").get<std::vector<double>>();
    } else if (mode == "sinusoid") {
      auto phi = a.at("phi").get<std::vector<double>>();
      auto dir = a.at("direction").get<std::vector<double>>();
      if (a.contains("eta")) {
        spec.demand = DemandModel::sinusoid(phi, dir, a.at("eta").get<double>(), a.value("phase", 0.0));
      } else {
        spec.demand.mode = DemandModel::Mode::Sinusoid;
        spec.demand.phi = phi;
        spec.demand.direction = dir;
        spec.demand.period = a.at("period").get<double>();
        spec.demand.phase = a.value("phase", 0.0);
      }
    } else if (mode == "sequence") {
      spec.demand.mode = DemandModel::Mode::Sequence;
      spec.demand.sequence = a.at("sequence").get<std::vector<std::vector<double>>>();
    } else {
      throw Error(ErrorCode::UnknownKind, "arrival mode '" + mode + "'");
    }
    if (j.contains("travel")) {
      spec.travel.pickup = j["travel"].at("pickup").get<std::vector<std::vector<int>>>();
      spec.travel.trip = j["travel"].at("trip").get<std::vector<std::vector<int>>>();
    }
    finalize(spec);
    return spec;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadInput, e.what());
  }
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::BadInput, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadInput, path + ": " + e.what());
  }
}

NetworkSpec load_network(const std::string& path) { return network_from_json(read_json_file(path)); }

json network_to_json(const NetworkSpec& spec) {
  auto matrix = [](const std::vector<double>& v, std::size_t rows, std::size_t cols) {
    if (v.size() == 1) return json(v[0]);
    json out = json::array();
    for (std::size_t a = 0; a < rows; ++a)
      out.push_back(std::vector<double>(v.begin() + static_cast<long>(a * cols), v.begin() + static_cast<long>((a + 1) * cols)));
    return out;
  };
  json j;
  j["name"] = spec.name;
  j["setting"] = to_string(spec.setting);
  j["nodes"] = spec.m;
  j["buffers"] = spec.buffers;
  json types = json::array();
  for (const auto& t : spec.types) {
    json jt{{"id", t.id}, {"pickup", t.pickup}, {"dropoff", t.dropoff}};
    if (spec.setting == Setting::JPA) {
      jt["cost"] = matrix(t.cost, t.pickup.size(), t.dropoff.size());
      jt["price_bounds"] = {t.wtp.pmin, t.wtp.pmax};
      if (t.wtp.kind == WtpModel::Kind::PiecewiseLinearCdf) {
        json knots = json::array();
        for (auto [x, F] : t.wtp.knots) knots.push_back({x, F});
        jt["wtp"] = {{"kind", "piecewise_linear_cdf"}, {"knots", knots}};
      } else {
        jt["wtp"] = {{"kind", "uniform"}};
      }
    } else {
      jt["payoff"] = matrix(t.payoff, t.pickup.size(), t.dropoff.size());
    }
    types.push_back(jt);
  }
  j["demand_types"] = types;
  const auto& d = spec.demand;
  switch (d.mode) {
    case DemandModel::Mode::Stationary: j["arrival"] = {{"mode", "stationary"}, {"phi", d.phi}}; break;
    case DemandModel::Mode::Sinusoid:
      j["arrival"] = {{"mode", "sinusoid"}, {"phi", d.phi}, {"direction", d.direction}, {"period", d.period},
                      {"phase", d.phase}};
      break;
    case DemandModel::Mode::Sequence: j["arrival"] = {{"mode", "sequence"}, {"sequence", d.sequence}}; break;
  }
  if (!spec.travel.empty()) j["travel"] = {{"pickup", spec.travel.pickup}, {"trip", spec.travel.trip}};
  return j;
}

json to_json(const NetworkSpec& spec, const SppSolution& sol) {
  json j;
  j["W"] = sol.W;
  j["W_raw"] = sol.W / spec.payoff_scale;
  j["y"] = sol.y;
  j["served_fraction"] = sol.served;
  if (!sol.price.empty()) j["price"] = sol.price;
  json flows = json::array();
  for (std::size_t tau = 0; tau < spec.types.size(); ++tau) {
    const auto& t = spec.types[tau];
    for (std::size_t a = 0; a < t.pickup.size(); ++a)
      for (std::size_t b = 0; b < t.dropoff.size(); ++b) {
        double z = sol.z[tau][a * t.dropoff.size() + b];
        if (z == 0.0) continue;
        flows.push_back({{"type", t.id}, {"pickup", t.pickup[a]}, {"dropoff", t.dropoff[b]}, {"z", z}});
      }
  }
  j["flows"] = flows;
  j["certificate"] = {{"primal_residual", sol.cert.primal_residual},
                      {"dual_residual", sol.cert.dual_residual},
                      {"complementarity", sol.cert.complementarity},
                      {"duality_gap", sol.cert.duality_gap}};
  j["iterations"] = sol.iterations;
  return j;
}

json to_json(const RunMetrics& r) {
  return json{{"W", r.W},
              {"W_raw", r.W_raw},
              {"periods", r.periods},
              {"served", r.served},
              {"underflow_blocks", r.underflow_blocks},
              {"overflow_blocks", r.overflow_blocks},
              {"mean_in_transit", r.mean_in_transit},
              {"final_state", r.final_state.q}};
}

}  // namespace mbp

#pragma once

#include <string>

#include "json.hpp"
#include "mbp/network.hpp"
#include "mbp/planning.hpp"
#include "mbp/simulator.hpp"

namespace mbp {

using json = nlohmann::json;

// Instance format:
// {
//   "name": "...", "setting": "entry_control" | "jea" | "jpa" | "scrip",
//   "nodes": 3, "buffers": [1, 1, 0.4],
//   "demand_types": [
//     {"id": "a", "pickup": [0], "dropoff": [1], "payoff": 0.5},
//     {"id": "b", "pickup": [0, 2], "dropoff": [1], "cost": [[0.1], [0.2]],
//      "price_bounds": [0, 1], "wtp": {"kind": "uniform"}}
//   ],
//   "arrival": {"mode": "stationary", "phi": [...]}
//            | {"mode": "sinusoid", "phi": [...], "direction": [...], "eta": 1e-5, "phase": 0}
//            | {"mode": "sequence", "sequence": [[...], ...]},
//   "travel": {"pickup": [[...] per type], "trip": [[...] per type]}
// }
// Payoff and cost accept a scalar or a |pickup| x |dropoff| matrix.
NetworkSpec network_from_json(const json& j);
NetworkSpec load_network(const std::string& path);
json network_to_json(const NetworkSpec& spec);

json to_json(const NetworkSpec& spec, const SppSolution& sol);
json to_json(const RunMetrics& r);

json read_json_file(const std::string& path);

}  // namespace mbp

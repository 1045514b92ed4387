#include "errp/plan.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "errp/instance.hpp"
#include "json.hpp"

namespace errp {

using nlohmann::json;
using nlohmann::ordered_json;

double Plan::vehicle_inventory_after(const Instance& inst, int t) const {
  double inv = inst.initial_vehicle_load;
  for (int k = 0; k < t; ++k) {
    inv += loads[k];
    for (const auto& q : deliveries) inv -= q[k];
  }
  return inv;
}

bool Plan::is_zero_delivery() const {
  for (const auto& q : deliveries)
    for (double v : q)
      if (v > 0.0) return false;
  return true;
}

void Plan::validate(const Instance& inst) const {
  auto fail = [](const std::string& what) { throw ValidationError("plan: " + what); };
  const int T = inst.horizon;

  if (static_cast<int>(route.size()) != T)
    fail("route has " + std::to_string(route.size()) + " entries, horizon is " +
         std::to_string(T));
  if (static_cast<int>(loads.size()) != T) fail("loads must have one entry per period");
  if (deliveries.size() != inst.retailers.size())
    fail("deliveries must have one row per retailer");
  for (const auto& q : deliveries)
    if (static_cast<int>(q.size()) != T) fail("delivery rows must have one entry per period");

  if (route[0] != inst.start_node)
    fail("route must begin at the start node " + std::to_string(inst.start_node));
  for (int t = 0; t < T; ++t)
    if (route[t] < 0 || route[t] >= inst.network.node_count)
      fail("route node " + std::to_string(route[t]) + " out of range in period " +
           std::to_string(t + 1));

  // Movement happens in periods 1..T-1; the final period has none.
  for (int t = 0; t + 1 < T; ++t) {
    const int from = route[t], to = route[t + 1];
    if (from == to) {
      if (!inst.network.allow_stay)
        fail("stay at node " + std::to_string(from) + " in period " + std::to_string(t + 1) +
             " but the network does not allow staying");
    } else if (!inst.network.has_arc(from, to)) {
      fail("no arc from " + std::to_string(from) + " to " + std::to_string(to) +
           " (period " + std::to_string(t + 1) + ")");
    }
  }

  for (int t = 0; t < T; ++t) {
    if (loads[t] < 0.0) fail("negative load in period " + std::to_string(t + 1));
    if (loads[t] > 0.0 && route[t] != inst.network.depot)
      fail("load in period " + std::to_string(t + 1) + " away from the depot");
  }
  for (std::size_t i = 0; i < deliveries.size(); ++i) {
    for (int t = 0; t < T; ++t) {
      if (deliveries[i][t] < 0.0)
        fail("negative delivery to retailer node " + std::to_string(inst.retailers[i].node));
      if (deliveries[i][t] > 0.0 && route[t] != inst.retailers[i].node)
        fail("delivery to retailer node " + std::to_string(inst.retailers[i].node) +
             " in period " + std::to_string(t + 1) + " without visiting it");
    }
  }

  // Cargo conservation: within [0, capacity] after loading, nonnegative
  // after delivering.
  double inv = inst.initial_vehicle_load;
  for (int t = 0; t < T; ++t) {
    inv += loads[t];
    if (inv > inst.vehicle.load_capacity + 1e-9)
      fail("vehicle inventory " + std::to_string(inv) + " exceeds capacity in period " +
           std::to_string(t + 1));
    for (const auto& q : deliveries) inv -= q[t];
    if (inv < -1e-9)
      fail("vehicle inventory negative after deliveries in period " + std::to_string(t + 1));
  }
}

Plan load_plan(const std::string& path, const Instance& inst) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open plan file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path + ": " + e.what());
  }
  Plan p;
  if (!j.contains("route")) throw ValidationError(path + ": missing field 'route'");
  p.route = j.at("route").get<std::vector<int>>();
  p.loads = j.value("loads", std::vector<double>(p.route.size(), 0.0));
  p.deliveries.assign(inst.retailers.size(), std::vector<double>(p.route.size(), 0.0));
  if (j.contains("deliveries")) {
    for (auto& [key, arr] : j.at("deliveries").items()) {
      const int node = std::stoi(key);
      const int idx = inst.retailer_index(node);
      if (idx < 0)
        throw ValidationError(path + ": deliveries key " + key + " is not a retailer node");
      p.deliveries[idx] = arr.get<std::vector<double>>();
    }
  }
  p.predicted_cost = j.value("predicted_cost", 0.0);
  p.validate(inst);
  return p;
}

void save_plan(const Plan& plan, const Instance& inst, const std::string& path) {
  ordered_json j;
  j["route"] = plan.route;
  j["loads"] = plan.loads;
  j["deliveries"] = ordered_json::object();
  for (std::size_t i = 0; i < plan.deliveries.size(); ++i)
    j["deliveries"][std::to_string(inst.retailers[i].node)] = plan.deliveries[i];
  j["predicted_cost"] = plan.predicted_cost;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write plan file: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace errp

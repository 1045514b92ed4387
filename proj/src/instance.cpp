#include "errp/instance.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>

#include "errp/energy.hpp"
#include "errp/rng.hpp"
#include "json.hpp"

namespace errp {

using nlohmann::json;
using nlohmann::ordered_json;

int RoadNetwork::arc_index(int from, int to) const {
  for (std::size_t i = 0; i < arcs.size(); ++i)
    if (arcs[i].from == from && arcs[i].to == to) return static_cast<int>(i);
  return -1;
}

std::vector<int> RoadNetwork::out_neighbors(int node) const {
  std::vector<int> out;
  for (const ArcSpec& a : arcs)
    if (a.from == node) out.push_back(a.to);
  std::sort(out.begin(), out.end());
  return out;
}

bool RoadNetwork::is_retailer(int node) const {
  return std::find(retailers.begin(), retailers.end(), node) != retailers.end();
}

int Instance::retailer_index(int node) const {
  for (std::size_t i = 0; i < retailers.size(); ++i)
    if (retailers[i].node == node) return static_cast<int>(i);
  return -1;
}

void Instance::validate() const {
  auto fail = [](const std::string& what) { throw ValidationError("instance: " + what); };

  if (network.node_count < 1) fail("node_count must be at least 1");
  if (network.depot < 0 || network.depot >= network.node_count)
    fail("depot node out of range");
  if (horizon < 1) fail("horizon must be at least 1");
  if (retailers.empty()) fail("at least one retailer is required");

  std::set<std::pair<int, int>> seen;
  for (const ArcSpec& a : network.arcs) {
    if (a.from < 0 || a.from >= network.node_count || a.to < 0 || a.to >= network.node_count)
      fail("arc (" + std::to_string(a.from) + "," + std::to_string(a.to) + ") out of range");
    if (a.from == a.to)
      fail("explicit self-loop on node " + std::to_string(a.from) +
           "; staying in place is controlled by allow_stay");
    if (!seen.insert({a.from, a.to}).second)
      fail("duplicate arc (" + std::to_string(a.from) + "," + std::to_string(a.to) + ")");
    if (a.supplied_energy < 0.0)
      fail("arc (" + std::to_string(a.from) + "," + std::to_string(a.to) +
           ") has negative supplied_energy");
    if (!allow_regen) {
      // Affine in mass, so checking both mass extremes is enough.
      const double lo = required_battery_energy(a, vehicle.unladen_weight);
      const double hi = required_battery_energy(a, max_total_weight());
      if (lo < 0.0 || hi < 0.0)
        fail("arc (" + std::to_string(a.from) + "," + std::to_string(a.to) +
             ") has negative required energy; set allow_regen to permit regenerative arcs");
    }
  }

  if (vehicle.unladen_weight < 0.0) fail("unladen_weight must be nonnegative");
  if (vehicle.load_capacity < 0) fail("load_capacity must be nonnegative");
  if (vehicle.battery_capacity <= 0.0) fail("battery_capacity must be positive");
  if (vehicle.efficiency <= 0.0 || vehicle.efficiency > 1.0)
    fail("vehicle efficiency must be in (0, 1]");
  if (vehicle.weight_per_unit < 0.0) fail("weight_per_unit must be nonnegative");

  if (retailers.size() != network.retailers.size())
    fail("retailer list and network retailer set differ in size");
  std::set<int> nodes;
  for (const RetailerSpec& r : retailers) {
    const std::string who = "retailer at node " + std::to_string(r.node);
    if (r.node < 0 || r.node >= network.node_count) fail(who + ": node out of range");
    if (r.node == network.depot) fail(who + ": retailer cannot sit on the depot");
    if (!nodes.insert(r.node).second) fail(who + ": duplicate retailer node");
    if (!network.is_retailer(r.node)) fail(who + ": missing from network retailer set");
    if (r.capacity < 0) fail(who + ": negative capacity");
    if (r.initial_inventory < 0 || r.initial_inventory > r.capacity)
      fail(who + ": initial_inventory " + std::to_string(r.initial_inventory) +
           " outside [0, capacity " + std::to_string(r.capacity) + "]");
    if (static_cast<int>(r.demand.size()) != horizon)
      fail(who + ": expected " + std::to_string(horizon) + " demand distributions, got " +
           std::to_string(r.demand.size()));
    for (int t = 0; t < horizon; ++t) {
      try {
        r.demand[t].validate();
      } catch (const std::exception& e) {
        fail(who + ", period " + std::to_string(t + 1) + ": " + e.what());
      }
    }
  }

  if (electricity_cost < 0.0 || fuel_cost < 0.0 || penalty < 0.0)
    fail("costs must be nonnegative");
  if (start_node < 0 || start_node >= network.node_count) fail("start node out of range");
  if (initial_vehicle_load < 0 || initial_vehicle_load > vehicle.load_capacity)
    fail("initial vehicle load outside [0, load_capacity]");
  if (start_battery < 0.0 || start_battery > vehicle.battery_capacity)
    fail("start battery outside [0, battery_capacity]");
}

// ---------------------------------------------------------------------------
// JSON I/O

namespace {

const json& require_field(const json& j, const std::string& key,
                          const std::string& ctx) {
  if (!j.contains(key))
    throw ValidationError(ctx + ": missing field '" + key + "'");
  return j.at(key);
}

double num_field(const json& j, const std::string& key, const std::string& ctx) {
  const json& v = require_field(j, key, ctx);
  if (!v.is_number())
    throw ValidationError(ctx + ": field '" + key + "' must be a number");
  return v.get<double>();
}

int int_field(const json& j, const std::string& key, const std::string& ctx) {
  const json& v = require_field(j, key, ctx);
  if (!v.is_number_integer())
    throw ValidationError(ctx + ": field '" + key + "' must be an integer");
  return v.get<int>();
}

DemandDistribution parse_demand(const json& j, const std::string& ctx) {
  if (j.contains("pmf")) {
    const json& arr = j.at("pmf");
    if (!arr.is_array()) throw ValidationError(ctx + ": pmf must be an array");
    DemandDistribution d;
    for (const auto& v : arr) d.pmf.push_back(v.get<double>());
    return d;
  }
  if (j.contains("poisson_mean")) {
    const double mean = num_field(j, "poisson_mean", ctx);
    const int trunc = int_field(j, "truncate_at", ctx);
    return truncated_poisson(mean, trunc);
  }
  throw ValidationError(ctx + ": demand needs either 'pmf' or 'poisson_mean'");
}

}  // namespace

Instance parse_instance(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(origin + ": " + e.what());
  }

  Instance inst;
  const json& net = require_field(j, "network", origin);
  inst.network.node_count = int_field(net, "node_count", origin + ": network");
  inst.network.depot = net.value("depot", 0);
  inst.network.allow_stay = net.value("allow_stay", true);
  for (const auto& ja : require_field(net, "arcs", origin + ": network")) {
    ArcSpec a;
    const std::string ctx = origin + ": arc";
    a.from = int_field(ja, "from", ctx);
    a.to = int_field(ja, "to", ctx);
    a.alpha = num_field(ja, "alpha", ctx);
    a.beta = num_field(ja, "beta", ctx);
    a.supplied_energy = ja.value("supplied_energy", 0.0);
    inst.network.arcs.push_back(a);
  }

  const json& veh = require_field(j, "vehicle", origin);
  const std::string vctx = origin + ": vehicle";
  inst.vehicle.unladen_weight = num_field(veh, "unladen_weight", vctx);
  inst.vehicle.load_capacity = int_field(veh, "load_capacity", vctx);
  inst.vehicle.battery_capacity = num_field(veh, "battery_capacity", vctx);
  inst.vehicle.efficiency = veh.value("efficiency", 1.0);
  inst.vehicle.weight_per_unit = veh.value("weight_per_unit", 1.0);

  inst.horizon = int_field(j, "horizon", origin);

  for (const auto& jr : require_field(j, "retailers", origin)) {
    RetailerSpec r;
    const std::string rctx = origin + ": retailer";
    r.node = int_field(jr, "node", rctx);
    r.name = jr.value("name", "");
    r.capacity = int_field(jr, "capacity", rctx);
    r.initial_inventory = int_field(jr, "initial_inventory", rctx);
    const json& dem = require_field(jr, "demand", rctx + " " + std::to_string(r.node));
    if (!dem.is_array())
      throw ValidationError(rctx + " " + std::to_string(r.node) + ": demand must be an array");
    int t = 0;
    for (const auto& jd : dem)
      r.demand.push_back(parse_demand(
          jd, rctx + " " + std::to_string(r.node) + ", period " + std::to_string(++t)));
    inst.retailers.push_back(std::move(r));
    inst.network.retailers.push_back(inst.retailers.back().node);
  }

  const json& costs = require_field(j, "costs", origin);
  const std::string cctx = origin + ": costs";
  inst.electricity_cost = num_field(costs, "electricity", cctx);
  inst.fuel_cost = num_field(costs, "fuel", cctx);
  inst.penalty = num_field(costs, "penalty", cctx);
  const std::string basis = costs.value("ers_cost_basis", "consumed");
  if (basis == "consumed") {
    inst.ers_cost_basis = ErsCostBasis::consumed;
  } else if (basis == "supplied") {
    inst.ers_cost_basis = ErsCostBasis::supplied;
  } else {
    throw ValidationError(cctx + ": ers_cost_basis must be 'consumed' or 'supplied'");
  }
  inst.allow_regen = costs.value("allow_regen", false);

  const json& start = require_field(j, "start", origin);
  const std::string sctx = origin + ": start";
  inst.start_node = int_field(start, "node", sctx);
  inst.initial_vehicle_load = start.value("load", 0);
  inst.start_battery = start.value("battery", 0.0);

  if (j.contains("meta")) inst.meta_json = j.at("meta").dump();

  inst.validate();
  return inst;
}

Instance load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open instance file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_instance(ss.str(), path);
}

std::string instance_to_json(const Instance& inst) {
  ordered_json j;
  j["network"]["node_count"] = inst.network.node_count;
  j["network"]["depot"] = inst.network.depot;
  j["network"]["allow_stay"] = inst.network.allow_stay;
  j["network"]["arcs"] = ordered_json::array();
  for (const ArcSpec& a : inst.network.arcs) {
    ordered_json ja;
    ja["from"] = a.from;
    ja["to"] = a.to;
    ja["alpha"] = a.alpha;
    ja["beta"] = a.beta;
    ja["supplied_energy"] = a.supplied_energy;
    j["network"]["arcs"].push_back(ja);
  }
  j["vehicle"]["unladen_weight"] = inst.vehicle.unladen_weight;
  j["vehicle"]["load_capacity"] = inst.vehicle.load_capacity;
  j["vehicle"]["battery_capacity"] = inst.vehicle.battery_capacity;
  j["vehicle"]["efficiency"] = inst.vehicle.efficiency;
  j["vehicle"]["weight_per_unit"] = inst.vehicle.weight_per_unit;
  j["horizon"] = inst.horizon;
  j["retailers"] = ordered_json::array();
  for (const RetailerSpec& r : inst.retailers) {
    ordered_json jr;
    jr["node"] = r.node;
    if (!r.name.empty()) jr["name"] = r.name;
    jr["capacity"] = r.capacity;
    jr["initial_inventory"] = r.initial_inventory;
    jr["demand"] = ordered_json::array();
    for (const DemandDistribution& d : r.demand)
      jr["demand"].push_back(ordered_json{{"pmf", d.pmf}});
    j["retailers"].push_back(jr);
  }
  j["costs"]["electricity"] = inst.electricity_cost;
  j["costs"]["fuel"] = inst.fuel_cost;
  j["costs"]["penalty"] = inst.penalty;
  j["costs"]["ers_cost_basis"] =
      inst.ers_cost_basis == ErsCostBasis::consumed ? "consumed" : "supplied";
  j["costs"]["allow_regen"] = inst.allow_regen;
  j["start"]["node"] = inst.start_node;
  j["start"]["load"] = inst.initial_vehicle_load;
  j["start"]["battery"] = inst.start_battery;
  if (!inst.meta_json.empty()) j["meta"] = json::parse(inst.meta_json);
  return j.dump(2) + "\n";
}

void save_instance(const Instance& inst, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write instance file: " + path);
  out << instance_to_json(inst);
}

// ---------------------------------------------------------------------------
// Generator

namespace {

struct Edge {
  int a, b;
  bool ers;
};

struct Topology {
  int nodes;
  bool bidirectional;
  std::vector<Edge> edges;
};

// The four study road networks.  T1 is an undirected regional net; T2..T4
// are directed ring-and-chord layouts.  `ers` marks electrified links.
const Topology& builtin_topology(const std::string& name) {
  static const Topology t1{
      14,
      true,
      {{0, 1, false}, {0, 2, false},  {0, 7, false},  {0, 12, true},
       {1, 3, true},  {1, 5, false},  {1, 11, false}, {2, 3, false},
       {2, 4, false}, {2, 6, false},  {4, 6, false},  {4, 7, true},
       {5, 9, false}, {7, 13, false}, {8, 9, true},   {8, 12, false},
       {8, 13, false}, {9, 10, false}, {10, 11, true}}};
  static const Topology t2{
      10,
      false,
      {{0, 1, false}, {1, 2, true},  {1, 3, true},  {2, 4, false},
       {2, 8, true},  {3, 4, false}, {3, 9, true},  {4, 0, false},
       {4, 1, true},  {4, 5, false}, {5, 6, false}, {6, 0, false},
       {6, 1, true},  {6, 7, true},  {7, 5, true},  {8, 1, false},
       {9, 7, false}}};
  static const Topology t3{
      10,
      false,
      {{0, 1, false}, {0, 2, true},  {0, 3, true},  {0, 4, false},
       {1, 2, false}, {1, 4, true},  {1, 5, true},  {2, 0, false},
       {2, 6, false}, {3, 2, false}, {3, 8, true},  {4, 0, false},
       {4, 2, false}, {4, 5, false}, {4, 9, true},  {5, 1, false},
       {5, 8, true},  {6, 5, false}, {6, 7, true},  {7, 2, false},
       {7, 4, true},  {7, 5, false}, {8, 0, false}, {8, 6, false},
       {9, 0, true},  {9, 5, false}, {9, 8, false}}};
  static const Topology t4{
      10,
      false,
      {{0, 1, false}, {0, 2, false}, {0, 3, false}, {0, 4, true},
       {1, 3, false}, {1, 4, false}, {1, 7, true},  {2, 0, false},
       {2, 3, true},  {2, 4, false}, {2, 5, true},  {3, 4, false},
       {3, 9, true},  {4, 1, false}, {4, 3, true},  {4, 6, true},
       {5, 1, true},  {5, 6, false}, {6, 2, false}, {6, 4, false},
       {7, 3, true},  {8, 0, false}, {8, 1, false}, {8, 4, false},
       {8, 5, true},  {9, 7, false}, {9, 8, false}}};
  if (name == "T1") return t1;
  if (name == "T2") return t2;
  if (name == "T3") return t3;
  if (name == "T4") return t4;
  throw ValidationError("generate_instance: unknown topology '" + name + "'");
}

// Study demand patterns: 9 periods of Poisson means, two retailer profiles
// each (cycled when the instance has more retailers).
std::vector<std::vector<double>> builtin_pattern(const std::string& name) {
  if (name == "D1") return {{2, 2, 2, 2, 2, 2, 2, 2, 2}, {2, 2, 2, 2, 2, 2, 2, 2, 2}};
  if (name == "D2") return {{1, 1, 2, 2, 3, 3, 4, 4, 5}, {5, 4, 4, 3, 3, 2, 2, 1, 1}};
  if (name == "D3") return {{1, 1, 2, 1, 1, 2, 2, 3, 1}, {1, 1, 2, 1, 1, 2, 2, 3, 1}};
  throw ValidationError("generate_instance: unknown demand pattern '" + name + "'");
}

bool reachable_within(const RoadNetwork& net, int from, int to, int steps) {
  if (from == to) return true;
  std::vector<int> dist(net.node_count, -1);
  std::queue<int> q;
  dist[from] = 0;
  q.push(from);
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    if (dist[u] >= steps) continue;
    for (const ArcSpec& a : net.arcs) {
      if (a.from != u || dist[a.to] >= 0) continue;
      dist[a.to] = dist[u] + 1;
      if (a.to == to) return true;
      q.push(a.to);
    }
  }
  return false;
}

}  // namespace

Instance generate_instance(const GeneratorConfig& cfg, unsigned long seed) {
  Rng rng(seed);

  Instance inst;
  inst.horizon = cfg.horizon;
  inst.vehicle.unladen_weight = cfg.unladen_weight;
  inst.vehicle.load_capacity = cfg.vehicle_capacity;
  inst.vehicle.battery_capacity = cfg.battery_capacity;
  inst.vehicle.efficiency = cfg.efficiency;
  inst.vehicle.weight_per_unit = cfg.weight_per_unit;
  inst.electricity_cost = cfg.electricity_cost;
  inst.fuel_cost = cfg.fuel_cost;
  inst.penalty = cfg.penalty;
  inst.start_node = 0;

  const double max_weight = cfg.unladen_weight + cfg.vehicle_capacity * cfg.weight_per_unit;
  if (cfg.topology == "custom") {
    if (cfg.custom_node_count < 1)
      throw ValidationError("generate_instance: custom topology needs custom_node_count");
    inst.network.node_count = cfg.custom_node_count;
    inst.network.arcs = cfg.custom_arcs;
  } else {
    const Topology& topo = builtin_topology(cfg.topology);
    inst.network.node_count = topo.nodes;
    for (const Edge& e : topo.edges) {
      ArcSpec a;
      a.alpha = rng_uniform(rng, cfg.alpha_min, cfg.alpha_max);
      a.beta = rng_uniform(rng, cfg.beta_min, cfg.beta_max);
      if (e.ers)
        a.supplied_energy = cfg.supply_factor * (a.alpha * max_weight + a.beta);
      a.from = e.a;
      a.to = e.b;
      inst.network.arcs.push_back(a);
      if (topo.bidirectional) {
        std::swap(a.from, a.to);
        inst.network.arcs.push_back(a);
      }
    }
  }
  inst.network.depot = 0;

  // Retailer placement.  Explicit nodes must be reachable; random picks are
  // resampled until they are.
  const int reach_steps = cfg.horizon - 1;
  std::vector<int> chosen = cfg.retailer_nodes;
  if (chosen.empty()) {
    if (cfg.retailer_count < 1)
      throw ValidationError("generate_instance: at least one retailer is required");
    for (int attempt = 0;; ++attempt) {
      if (attempt >= 1000)
        throw ValidationError(
            "generate_instance: could not place reachable retailers in 1000 attempts");
      std::set<int> pick;
      while (static_cast<int>(pick.size()) < cfg.retailer_count)
        pick.insert(static_cast<int>(rng_int(rng, 1, inst.network.node_count - 1)));
      const bool ok = std::all_of(pick.begin(), pick.end(), [&](int n) {
        return reachable_within(inst.network, inst.network.depot, n, reach_steps);
      });
      if (ok) {
        chosen.assign(pick.begin(), pick.end());
        break;
      }
    }
  } else {
    for (int n : chosen)
      if (!reachable_within(inst.network, inst.network.depot, n, reach_steps))
        throw ValidationError("generate_instance: retailer node " + std::to_string(n) +
                              " is not reachable from the depot within " +
                              std::to_string(reach_steps) + " traversals");
  }

  std::vector<std::vector<double>> means;
  if (cfg.demand_pattern == "custom") {
    means = cfg.custom_means;
    if (means.empty())
      throw ValidationError("generate_instance: custom demand pattern needs custom_means");
  } else {
    means = builtin_pattern(cfg.demand_pattern);
  }
  for (const auto& row : means)
    if (static_cast<int>(row.size()) < cfg.horizon)
      throw ValidationError("generate_instance: demand pattern defines " +
                            std::to_string(row.size()) + " periods, horizon is " +
                            std::to_string(cfg.horizon));

  for (std::size_t i = 0; i < chosen.size(); ++i) {
    RetailerSpec r;
    r.node = chosen[i];
    r.name = "R" + std::to_string(i + 1);
    r.capacity = cfg.retailer_capacity;
    if (!cfg.initial_inventory.empty()) {
      r.initial_inventory = cfg.initial_inventory.size() == 1
                                ? cfg.initial_inventory[0]
                                : cfg.initial_inventory.at(i);
    }
    const auto& row = means[i % means.size()];
    for (int t = 0; t < cfg.horizon; ++t) {
      r.demand.push_back(cfg.deterministic_demand
                             ? point_mass(static_cast<int>(std::llround(row[t])))
                             : truncated_poisson(row[t], cfg.demand_truncate));
    }
    inst.retailers.push_back(std::move(r));
    inst.network.retailers.push_back(chosen[i]);
  }

  ordered_json meta;
  meta["generator"]["topology"] = cfg.topology;
  meta["generator"]["demand_pattern"] = cfg.demand_pattern;
  meta["generator"]["deterministic_demand"] = cfg.deterministic_demand;
  meta["generator"]["seed"] = seed;
  meta["generator"]["retailers"] = chosen;
  inst.meta_json = meta.dump();

  inst.validate();
  return inst;
}

}  // namespace errp

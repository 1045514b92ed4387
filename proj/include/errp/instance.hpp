#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "errp/demand.hpp"

namespace errp {

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Directed road link.  Battery draw at total mass m is alpha*m + beta (kWh);
// supplied_energy > 0 marks an electrified stretch that feeds the vehicle
// that amount of charge during one traversal.
struct ArcSpec {
  int from = 0;
  int to = 0;
  double alpha = 0.0;            // kWh per kg
  double beta = 0.0;             // kWh
  double supplied_energy = 0.0;  // kWh per traversal
  bool operator==(const ArcSpec&) const = default;
};

struct RoadNetwork {
  int node_count = 0;
  int depot = 0;
  std::vector<int> retailers;  // node ids, subset of 0..node_count-1
  std::vector<ArcSpec> arcs;
  // Whether the vehicle may remain in place during a movement period
  // (implicit self-loop with zero required and supplied energy).
  bool allow_stay = true;

  bool has_arc(int from, int to) const { return arc_index(from, to) >= 0; }
  int arc_index(int from, int to) const;  // -1 if absent
  std::vector<int> out_neighbors(int node) const;
  bool is_retailer(int node) const;
  bool operator==(const RoadNetwork&) const = default;
};

struct VehicleSpec {
  double unladen_weight = 0.0;    // kg, curb weight incl. everything but cargo
  int load_capacity = 0;          // cargo units
  double battery_capacity = 0.0;  // kWh
  double efficiency = 1.0;        // driveline efficiency, in (0, 1]
  double weight_per_unit = 1.0;   // kg per cargo unit
  bool operator==(const VehicleSpec&) const = default;
};

struct RetailerSpec {
  int node = 0;
  std::string name;  // optional label, used in report tables
  int capacity = 0;
  int initial_inventory = 0;
  std::vector<DemandDistribution> demand;  // one per period, size = horizon
  bool operator==(const RetailerSpec&) const = default;
};

// How traversing an electrified arc is charged.
//  consumed: pay electricity for the traction energy actually drawn from the
//            road and the battery; charge absorbed into the battery is free.
//  supplied: pay electricity for everything the road feeds the vehicle plus
//            battery discharge (the accounting used by the optimization
//            model's objective).
enum class ErsCostBasis { consumed, supplied };

struct Instance {
  RoadNetwork network;
  VehicleSpec vehicle;
  std::vector<RetailerSpec> retailers;
  int horizon = 0;
  double electricity_cost = 0.0;  // per kWh
  double fuel_cost = 0.0;         // per kWh mechanical
  double penalty = 0.0;           // per unit of unmet demand
  ErsCostBasis ers_cost_basis = ErsCostBasis::consumed;
  // Steep descents make alpha*m+beta negative; reject them unless the model
  // is explicitly told regeneration is intended.
  bool allow_regen = false;
  int start_node = 0;
  int initial_vehicle_load = 0;
  double start_battery = 0.0;  // kWh
  // Free-form provenance blob (generator settings etc.), preserved on I/O.
  std::string meta_json;

  int retailer_index(int node) const;  // -1 if the node is not a retailer
  double max_total_weight() const {
    return vehicle.unladen_weight +
           vehicle.load_capacity * vehicle.weight_per_unit;
  }
  // Throws ValidationError naming the violated requirement.
  void validate() const;
  bool operator==(const Instance&) const = default;
};

Instance load_instance(const std::string& path);
Instance parse_instance(const std::string& text, const std::string& origin);
void save_instance(const Instance& inst, const std::string& path);
std::string instance_to_json(const Instance& inst);

// ---------------------------------------------------------------------------
// Generator

// The built-in road topologies T1..T4 and demand patterns D1..D3 used by the
// benchmark study; `custom_arcs` overrides the topology entirely.
struct GeneratorConfig {
  std::string topology = "T2";       // T1..T4 or "custom"
  std::vector<ArcSpec> custom_arcs;  // used when topology == "custom"
  int custom_node_count = 0;
  std::string demand_pattern = "D1";  // D1..D3 or "custom"
  std::vector<std::vector<double>> custom_means;  // per retailer, per period
  bool deterministic_demand = false;  // point mass at the mean instead of
                                      // truncated Poisson
  std::vector<int> retailer_nodes;    // empty: pick `retailer_count` at random
  int retailer_count = 2;
  std::vector<int> initial_inventory;  // per retailer; single value broadcast
  int horizon = 9;
  int retailer_capacity = 8;
  int vehicle_capacity = 10;
  double unladen_weight = 12000.0;
  double weight_per_unit = 1000.0;
  double battery_capacity = 150.0;
  double efficiency = 0.9;
  double electricity_cost = 1.0;
  double fuel_cost = 3.0;
  double penalty = 10.0;
  int demand_truncate = 8;
  double alpha_min = 0.0005, alpha_max = 0.002;  // kWh per kg
  double beta_min = 1.0, beta_max = 5.0;         // kWh
  // Electrified arcs supply twice the fully-laden draw of the arc.
  double supply_factor = 2.0;
};

// Deterministic in (config, seed).  Every retailer is checked reachable from
// the depot within the horizon.
Instance generate_instance(const GeneratorConfig& cfg, unsigned long seed);

}  // namespace errp

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "errp/instance.hpp"
#include "errp/milp.hpp"

namespace errp {

// Full-factorial study configuration: the cell set is the cross product of
// topologies x retailer sets x initial inventories x penalties x demand
// patterns, each instantiated with a seed derived from (base_seed, cell id).
struct BenchConfig {
  std::vector<std::string> topologies;               // e.g. {"T1", "T2"}
  std::vector<std::vector<int>> retailer_sets;       // node id lists
  std::vector<std::vector<int>> initial_inventories; // per retailer
  std::vector<double> penalties;
  std::vector<std::string> demand_patterns;          // e.g. {"D1", "D2"}
  bool deterministic_demand = false;
  int horizon = 6;
  int levels = 20;
  unsigned long base_seed = 1;
  int workers = 1;
  long long enum_budget = 20'000'000;
  GeneratorConfig base;  // capacities, costs, coefficient ranges
};

BenchConfig load_bench_config(const std::string& path);

struct BenchCell {
  int id = 0;
  std::string topology, demand_pattern;
  std::vector<int> retailer_nodes, initial_inventory;
  double penalty = 0.0;
  unsigned long seed = 0;
  double policy_cost = 0.0;     // optimal expected cost (lower bound)
  double heuristic_cost = 0.0;  // exact expected cost of the static plan
  std::optional<double> gap_percent;
  std::string failure;  // nonempty if the cell failed; the run continues
};

struct PivotRow {
  std::string dimension, level;
  int cells = 0;
  double mpe = 0.0;   // mean percentage error
  double mdpe = 0.0;  // median
  double sd = 0.0;    // sample standard deviation
};

struct BenchResult {
  std::vector<BenchCell> cells;  // ordered by cell id
  std::vector<PivotRow> pivot;
  double min_gap = 0.0, max_gap = 0.0;
};

// Runs every cell (optionally across workers; cell order in the result is
// always by id).  Throws if any gap is below -1e-6: the heuristic can never
// beat the optimal policy, so that indicates an implementation bug.
BenchResult run_benchmark(const BenchConfig& cfg);

std::string format_pivot(const BenchResult& result);
std::string bench_result_to_json(const BenchResult& result);
std::string bench_cells_to_csv(const BenchResult& result);

// ---------------------------------------------------------------------------
// Fuel-price sensitivity of the static heuristic on one instance.

struct SensitivityConfig {
  std::vector<double> fuel_costs;
  std::vector<double> penalties;
  struct InventoryCase {
    std::string label;
    std::vector<int> values;  // per retailer
  };
  std::vector<InventoryCase> inventories;
  EnumOptions enum_opt;
};

struct SensitivityRow {
  std::string inventory_label;
  double penalty = 0.0, fuel_cost = 0.0;
  double total_load = 0.0;
  std::vector<double> delivered;  // per retailer
  std::string visit_order;        // "D,A,B,D" style; "N/A" if no deliveries
  double plan_cost = 0.0;
};

std::vector<SensitivityRow> fuel_sensitivity(const Instance& inst,
                                             const SensitivityConfig& cfg);

std::string format_sensitivity(const std::vector<SensitivityRow>& rows,
                               const Instance& inst);
std::string sensitivity_to_json(const std::vector<SensitivityRow>& rows);

}  // namespace errp

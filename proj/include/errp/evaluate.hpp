#pragma once

#include <optional>
#include <string>
#include <vector>

#include "errp/instance.hpp"
#include "errp/plan.hpp"

namespace errp {

// Battery bookkeeping during evaluation: exact kWh, or the same whole-level
// grid the dynamic program uses (so plan costs are comparable with policy
// values).
struct EvalOptions {
  bool discretized_battery = false;
  int levels = 20;
};

struct CostBreakdown {
  double ers_energy_cost = 0.0;  // electricity drawn from the road
  double battery_cost = 0.0;     // electricity drawn from the battery
  double fuel_cost = 0.0;
  double penalty_cost = 0.0;
  double total() const {
    return ers_energy_cost + battery_cost + fuel_cost + penalty_cost;
  }
};

struct EvaluationReport {
  double expected_total_cost = 0.0;
  CostBreakdown breakdown;
  // expected_shortage[t-1][i]: expected unmet demand of retailer i in period t.
  std::vector<std::vector<double>> expected_shortage;
  std::string method;  // "exact" or "monte_carlo(n=..., seed=...)"
  // Monte-Carlo only: 99% confidence halfwidth and standard error of the mean.
  double ci99_halfwidth = 0.0;
  double std_error = 0.0;
};

// Expected cost of a fixed plan: travel legs are deterministic, per-retailer
// shortage is computed by exact forward propagation of the inventory
// distribution (delivery overflow beyond retailer capacity is discarded).
EvaluationReport exact_plan_cost(const Plan& plan, const Instance& inst,
                                 const EvalOptions& opt = {});

// Sampling estimate of the same quantity; deterministic per seed.
EvaluationReport monte_carlo_plan_cost(const Plan& plan, const Instance& inst,
                                       long samples, unsigned long seed,
                                       const EvalOptions& opt = {});

// 100 * (heuristic - optimal) / optimal.  Both zero -> 0; optimal zero with a
// positive heuristic has no meaningful value -> nullopt.
std::optional<double> percentage_error(double heuristic_cost,
                                       double optimal_cost);

// Shared leg-cost engine (also used by the enumerator): walks the route with
// the battery dynamics and splits each leg's traction energy into road-fed,
// battery-fed and fuel-fed parts, priced per the instance's cost basis.
struct TravelLeg {
  int from = 0, to = 0;
  double weight = 0.0;          // total vehicle mass during the leg, kg
  double required_energy = 0.0; // kWh (level-grid value if discretized)
  double battery_before = 0.0, battery_after = 0.0;
  double ers_cost = 0.0, battery_cost = 0.0, fuel_cost = 0.0;
  double cost() const { return ers_cost + battery_cost + fuel_cost; }
};

std::vector<TravelLeg> travel_legs(const Plan& plan, const Instance& inst,
                                   const EvalOptions& opt);

}  // namespace errp

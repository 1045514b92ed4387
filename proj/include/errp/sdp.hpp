#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "errp/instance.hpp"

namespace errp {

// Start-of-period system state.  Battery is tracked in whole level units
// (0..levels); retailer inventories in cargo units.
struct SdpState {
  int t = 1;
  int pos = 0;
  int vehicle_inv = 0;
  int battery_level = 0;
  std::vector<int> retailer_inv;
  bool operator==(const SdpState&) const = default;
};

// One period's decision: load at the depot, deliver at a retailer, then move
// to next_pos for the following period.  In the final period there is no
// movement and next_pos equals the current position.
struct SdpAction {
  int next_pos = 0;
  int load_up = 0;
  int delivery = 0;
  bool operator==(const SdpAction&) const = default;
  bool operator<(const SdpAction& o) const {
    if (next_pos != o.next_pos) return next_pos < o.next_pos;
    if (load_up != o.load_up) return load_up < o.load_up;
    return delivery < o.delivery;
  }
};

struct SdpOptions {
  int levels = 20;
  // Refuse instances whose reachable state space exceeds this many states.
  std::uint64_t state_cap = 20'000'000;
  int workers = 1;  // parallelism across states within a period
};

// Optimal value and action for every reachable state, one table per period.
struct Policy {
  struct Entry {
    double value = 0.0;
    SdpAction action;
  };

  int levels = 20;
  double value_at_initial = 0.0;
  SdpState initial_state;
  std::vector<std::unordered_map<std::uint64_t, Entry>> table;  // [t-1]

  std::uint64_t encode(const SdpState& s) const;
  const Entry* lookup(const SdpState& s) const;
  std::uint64_t state_count() const;

  // Key layout; filled from the instance when solving.
  int node_count = 0, load_cap = 0;
  std::vector<int> retailer_caps;
};

// All feasible actions in lexicographic (next_pos, load_up, delivery) order.
// Empty only when the node has no outgoing arc and staying is not allowed.
std::vector<SdpAction> enumerate_actions(const SdpState& s,
                                         const Instance& inst);

// Travel cost of the movement decided this period plus the expected
// lost-sales penalty on post-delivery inventories.
double immediate_cost(const SdpState& s, const SdpAction& a,
                      const Instance& inst, int levels);

// Backward recursion over the exact reachable state space. Ties are broken
// towards the lexicographically smallest action, so results do not depend on
// the worker count.
Policy solve_backward(const Instance& inst, const SdpOptions& opt = {});

// One simulated trajectory under a fixed demand realization.
struct TrajectoryRow {
  int t = 0;
  int pos = 0;
  int load_up = 0;
  int delivery = 0;
  int delivery_retailer = -1;     // index into inst.retailers, -1 if none
  double battery = 0.0;           // kWh at start of period
  double weight = 0.0;            // total mass after this period's actions
  int vehicle_inv = 0;            // cargo units after actions
  std::vector<int> retailer_inv;  // after delivery and demand
  double required_energy = 0.0;   // kWh for the movement decided this period
  double travel_cost = 0.0;
  double penalty_cost = 0.0;      // realized
};

struct Trajectory {
  std::vector<TrajectoryRow> rows;
  double total_cost = 0.0;
  double total_travel = 0.0;
  double total_penalty = 0.0;
};

// demand_trace[i][t-1] = realized demand of retailer i in period t.  Throws
// logic_error if the policy table is missing a state reached by the trace.
Trajectory replay(const Policy& policy, const Instance& inst,
                  const std::vector<std::vector<int>>& demand_trace);

std::string format_trajectory(const Trajectory& traj, const Instance& inst);

}  // namespace errp

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "errp/evaluate.hpp"
#include "errp/milp.hpp"

namespace errp {

namespace {

// Exhaustive search over route / delivery-schedule combinations.  Deliveries
// are restricted so a retailer can never overflow under any demand outcome
// that has positive probability (tracked through the maximal inventory chain
// fed by each period's minimum possible demand); such a schedule is a valid
// fixed policy, which is what makes enumerated costs comparable with the
// dynamic program's policy values.
struct Enumerator {
  const Instance& inst;
  const EnumOptions& opt;
  int T, C, K;

  std::vector<std::vector<int>> succ;  // sorted successors, stay included
  long long used = 0;
  double route_estimate = 0.0;

  std::vector<int> route;
  std::vector<std::pair<int, int>> slots;        // (retailer, period idx)
  std::vector<std::vector<int>> dmin;            // [retailer][period idx]
  std::vector<std::vector<int>> del;             // [retailer][period idx]
  std::vector<int> depot_visits;                 // period idxs, ascending

  bool found = false;
  double best_cost = std::numeric_limits<double>::infinity();
  Plan best;

  explicit Enumerator(const Instance& i, const EnumOptions& o)
      : inst(i),
        opt(o),
        T(i.horizon),
        C(static_cast<int>(i.retailers.size())),
        K(i.vehicle.load_capacity) {
    succ.resize(inst.network.node_count);
    std::size_t branch = 0;
    for (int n = 0; n < inst.network.node_count; ++n) {
      succ[n] = inst.network.out_neighbors(n);
      if (inst.network.allow_stay) succ[n].push_back(n);
      std::sort(succ[n].begin(), succ[n].end());
      succ[n].erase(std::unique(succ[n].begin(), succ[n].end()), succ[n].end());
      branch = std::max(branch, succ[n].size());
    }
    route_estimate = std::pow(static_cast<double>(branch), T - 1);
    route.assign(T, inst.start_node);
    dmin.assign(C, std::vector<int>(T, 0));
    for (int r = 0; r < C; ++r)
      for (int j = 0; j < T; ++j) {
        const auto& pmf = inst.retailers[r].demand[j].pmf;
        for (std::size_t k = 0; k < pmf.size(); ++k)
          if (pmf[k] > 0.0) {
            dmin[r][j] = static_cast<int>(k);
            break;
          }
      }
    del.assign(C, std::vector<int>(T, 0));
  }

  void charge() {
    if (++used > opt.budget) {
      std::ostringstream msg;
      msg << "plan enumeration exceeded its budget of " << opt.budget
          << " search nodes (roughly " << route_estimate
          << " routes before delivery choices); shrink the instance or raise "
             "the budget / delivery step";
      throw EnumBudgetExceeded(msg.str());
    }
  }

  // Minimal loads serving the current delivery schedule: consume the initial
  // cargo first, then pull the remainder from the latest depot visits that
  // still have head-room.  Later loading carries less weight, so this is
  // never worse than any other load placement for the same deliveries.
  bool derive_loads(std::vector<double>* loads_out) {
    std::vector<int> cur(T, inst.initial_vehicle_load), loads(T, 0);
    int init_rem = inst.initial_vehicle_load;
    for (int j = 0; j < T; ++j) {
      int need = 0;
      for (int r = 0; r < C; ++r) need += del[r][j];
      if (need == 0) continue;
      const int take = std::min(need, init_rem);
      if (take > 0) {
        init_rem -= take;
        need -= take;
        for (int u = j; u < T; ++u) cur[u] -= take;
      }
      for (auto it = depot_visits.rbegin(); need > 0 && it != depot_visits.rend();
           ++it) {
        const int tau = *it;
        if (tau >= j) continue;
        int head = 0;
        for (int u = tau; u < j; ++u) head = std::max(head, cur[u]);
        const int add = std::min(need, K - head);
        if (add <= 0) continue;
        loads[tau] += add;
        for (int u = tau; u < j; ++u) cur[u] += add;
        need -= add;
      }
      if (need > 0) return false;
    }
    loads_out->assign(loads.begin(), loads.end());
    return true;
  }

  void candidate() {
    charge();
    Plan plan;
    plan.route = route;
    if (!derive_loads(&plan.loads)) return;
    plan.deliveries.assign(C, std::vector<double>(T, 0.0));
    for (int r = 0; r < C; ++r)
      for (int j = 0; j < T; ++j) plan.deliveries[r][j] = del[r][j];
    const double cost =
        exact_plan_cost(plan, inst, opt.eval).expected_total_cost;
    if (cost < best_cost) {
      best_cost = cost;
      plan.predicted_cost = cost;
      best = std::move(plan);
      found = true;
    }
  }

  // inv_max is the highest inventory the current retailer can be holding just
  // before the slot's delivery, reached when every period sells only its
  // minimum possible demand; deliveries above capacity - inv_max could
  // overflow in a reachable outcome, so they are not offered.  Slots are
  // retailer-major / period-ascending, so the chain state threads through the
  // recursion by value.
  void dfs_slot(std::size_t s, int cur_r, int inv_max, int drained_to) {
    if (s == slots.size()) {
      candidate();
      return;
    }
    const auto [r, j] = slots[s];
    if (r != cur_r) {
      inv_max = inst.retailers[r].initial_inventory;
      drained_to = 0;
    }
    for (int u = drained_to; u < j; ++u)
      inv_max = std::max(0, inv_max - dmin[r][u]);
    for (int q = 0; q <= inst.retailers[r].capacity - inv_max;
         q += opt.delivery_step) {
      del[r][j] = q;
      dfs_slot(s + 1, r, inv_max + q, j);
      del[r][j] = 0;
    }
  }

  void route_done() {
    slots.clear();
    depot_visits.clear();
    for (int j = 0; j < T; ++j) {
      if (route[j] == inst.network.depot) depot_visits.push_back(j);
      const int r = inst.retailer_index(route[j]);
      if (r >= 0) slots.push_back({r, j});
    }
    std::stable_sort(slots.begin(), slots.end());
    dfs_slot(0, -1, 0, 0);
  }

  void dfs_route(int depth) {
    if (depth == T) {
      route_done();
      return;
    }
    for (int next : succ[route[depth - 1]]) {
      charge();
      route[depth] = next;
      dfs_route(depth + 1);
    }
  }

  Plan run() {
    if (T == 1)
      route_done();
    else
      dfs_route(1);
    if (!found)
      throw std::runtime_error(
          "plan enumeration found no feasible plan: the vehicle cannot make " +
          std::to_string(T - 1) + " consecutive moves from node " +
          std::to_string(inst.start_node));
    return best;
  }
};

}  // namespace

Plan enumerate_optimal_plan(const Instance& inst, const EnumOptions& opt) {
  inst.validate();
  if (opt.delivery_step < 1)
    throw std::runtime_error("enumerate_optimal_plan: delivery step must be >= 1");
  if (opt.budget < 1)
    throw std::runtime_error("enumerate_optimal_plan: budget must be >= 1");
  Enumerator e(inst, opt);
  return e.run();
}

}  // namespace errp

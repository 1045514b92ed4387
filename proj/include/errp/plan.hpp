#pragma once

#include <string>
#include <vector>

namespace errp {

struct Instance;

// A static route-and-delivery schedule.  route[t-1] is the vehicle position
// in period t; loads happen at the depot, deliveries at the visited retailer,
// both at the start of the period before demand hits.  Quantities are cargo
// units; fractional values are legal (they arise from decoded LP solutions).
struct Plan {
  std::vector<int> route;                       // size = horizon
  std::vector<double> loads;                    // size = horizon
  std::vector<std::vector<double>> deliveries;  // [retailer][period]
  double predicted_cost = 0.0;  // what the producing solver believed

  // Throws ValidationError naming the violated rule: start node, arc
  // adjacency (stays require allow_stay), depot-only loads, visited-retailer
  // deliveries, vehicle inventory within [0, capacity].
  void validate(const Instance& inst) const;
  // On-board units after the period-t actions (t is 1-based).
  double vehicle_inventory_after(const Instance& inst, int t) const;
  bool is_zero_delivery() const;
};

Plan load_plan(const std::string& path, const Instance& inst);
void save_plan(const Plan& plan, const Instance& inst, const std::string& path);

}  // namespace errp

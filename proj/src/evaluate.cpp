#include "errp/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "errp/energy.hpp"
#include "errp/rng.hpp"

namespace errp {

std::vector<TravelLeg> travel_legs(const Plan& plan, const Instance& inst,
                                   const EvalOptions& opt) {
  const int T = inst.horizon;
  const double B = inst.vehicle.battery_capacity;
  const double kappa = opt.discretized_battery ? B / opt.levels : 1.0;
  const bool consumed = inst.ers_cost_basis == ErsCostBasis::consumed;

  // Battery state in kWh (exact) or level units (discretized).
  double bat = opt.discretized_battery
                   ? static_cast<double>(discretize_kwh(inst.start_battery, opt.levels, B))
                   : inst.start_battery;
  const double bat_cap = opt.discretized_battery ? opt.levels : B;

  // Total mass after the period's load/delivery actions.
  double units = inst.initial_vehicle_load;
  std::vector<TravelLeg> legs;
  for (int t = 1; t < T; ++t) {
    units += plan.loads[t - 1];
    for (const auto& q : plan.deliveries) units -= q[t - 1];
    const double weight = inst.vehicle.unladen_weight + units * inst.vehicle.weight_per_unit;

    TravelLeg leg;
    leg.from = plan.route[t - 1];
    leg.to = plan.route[t];
    leg.weight = weight;
    double req = 0.0, sup_raw = 0.0;
    if (leg.from != leg.to) {
      const ArcSpec& arc = inst.network.arcs[inst.network.arc_index(leg.from, leg.to)];
      sup_raw = arc.supplied_energy;
      req = opt.discretized_battery
                ? static_cast<double>(discretize_energy(arc, weight, opt.levels, B))
                : required_battery_energy(arc, weight);
    }
    const double sup = opt.discretized_battery && leg.from != leg.to
                           ? static_cast<double>(discretize_kwh(sup_raw, opt.levels, B))
                           : sup_raw;

    const double ers_direct = std::min(req, sup);
    const double from_battery = std::min(bat, std::max(0.0, req - sup));
    const double deficit = std::max(0.0, req - sup - bat);
    leg.battery_before = bat * kappa;
    bat = std::clamp(bat + sup - req, 0.0, bat_cap);
    leg.battery_after = bat * kappa;
    leg.required_energy = req * kappa;

    // Electricity for the road-fed share: what the wheels drew from the rail
    // under the consumed basis, everything the rail fed under supplied.
    leg.ers_cost = inst.electricity_cost * (consumed ? ers_direct * kappa : sup_raw);
    leg.battery_cost = inst.electricity_cost * from_battery * kappa;
    leg.fuel_cost = inst.fuel_cost *
                    fuel_energy_from_deficit(deficit * kappa, inst.vehicle.efficiency);
    legs.push_back(leg);
  }
  return legs;
}

namespace {

// Forward propagation of one retailer's inventory distribution under a fixed
// delivery schedule.  Returns the expected shortage per period.  Atoms are
// exact inventory levels (fractional deliveries keep this off the integer
// grid, so a map is used instead of a dense vector).
std::vector<double> expected_shortages(const RetailerSpec& r,
                                       const std::vector<double>& deliveries,
                                       int horizon) {
  std::map<double, double> atoms{{static_cast<double>(r.initial_inventory), 1.0}};
  std::vector<double> shortage(horizon, 0.0);
  for (int t = 0; t < horizon; ++t) {
    const DemandDistribution& d = r.demand[t];
    std::map<double, double> next;
    for (const auto& [x, p] : atoms) {
      // Delivery first; overflow beyond the shelf is discarded.
      const double post = std::min(x + deliveries[t], static_cast<double>(r.capacity));
      shortage[t] += p * loss(d, post);
      for (std::size_t k = 0; k < d.pmf.size(); ++k) {
        if (d.pmf[k] == 0.0) continue;
        next[std::max(post - static_cast<double>(k), 0.0)] += p * d.pmf[k];
      }
    }
    atoms.swap(next);
    if (atoms.size() > 200000)
      throw std::runtime_error(
          "exact_plan_cost: inventory distribution support exploded (fractional "
          "deliveries with wide demand support)");
  }
  return shortage;
}

}  // namespace

EvaluationReport exact_plan_cost(const Plan& plan, const Instance& inst,
                                 const EvalOptions& opt) {
  plan.validate(inst);
  EvaluationReport rep;
  rep.method = "exact";
  for (const TravelLeg& leg : travel_legs(plan, inst, opt)) {
    rep.breakdown.ers_energy_cost += leg.ers_cost;
    rep.breakdown.battery_cost += leg.battery_cost;
    rep.breakdown.fuel_cost += leg.fuel_cost;
  }
  rep.expected_shortage.assign(inst.horizon, std::vector<double>(inst.retailers.size(), 0.0));
  for (std::size_t i = 0; i < inst.retailers.size(); ++i) {
    const auto shortage =
        expected_shortages(inst.retailers[i], plan.deliveries[i], inst.horizon);
    for (int t = 0; t < inst.horizon; ++t) {
      rep.expected_shortage[t][i] = shortage[t];
      rep.breakdown.penalty_cost += inst.penalty * shortage[t];
    }
  }
  rep.expected_total_cost = rep.breakdown.total();
  return rep;
}

EvaluationReport monte_carlo_plan_cost(const Plan& plan, const Instance& inst,
                                       long samples, unsigned long seed,
                                       const EvalOptions& opt) {
  if (samples < 1) throw std::runtime_error("monte_carlo_plan_cost: samples must be >= 1");
  plan.validate(inst);

  EvaluationReport rep;
  double travel = 0.0;
  for (const TravelLeg& leg : travel_legs(plan, inst, opt)) {
    rep.breakdown.ers_energy_cost += leg.ers_cost;
    rep.breakdown.battery_cost += leg.battery_cost;
    rep.breakdown.fuel_cost += leg.fuel_cost;
    travel += leg.cost();
  }

  // Per-(retailer, period) demand CDFs for inverse sampling.
  std::vector<std::vector<std::vector<double>>> cdf(inst.retailers.size());
  for (std::size_t i = 0; i < inst.retailers.size(); ++i) {
    cdf[i].resize(inst.horizon);
    for (int t = 0; t < inst.horizon; ++t) {
      double acc = 0.0;
      for (double p : inst.retailers[i].demand[t].pmf) cdf[i][t].push_back(acc += p);
    }
  }

  rep.expected_shortage.assign(inst.horizon, std::vector<double>(inst.retailers.size(), 0.0));
  Rng rng(seed);
  double sum = 0.0, sumsq = 0.0;
  for (long s = 0; s < samples; ++s) {
    double penalty_units = 0.0;
    for (std::size_t i = 0; i < inst.retailers.size(); ++i) {
      double inv = inst.retailers[i].initial_inventory;
      for (int t = 0; t < inst.horizon; ++t) {
        inv = std::min(inv + plan.deliveries[i][t],
                       static_cast<double>(inst.retailers[i].capacity));
        const double u = rng_unit(rng);
        int d = 0;
        while (d + 1 < static_cast<int>(cdf[i][t].size()) && u > cdf[i][t][d]) ++d;
        const double short_t = std::max(static_cast<double>(d) - inv, 0.0);
        penalty_units += short_t;
        rep.expected_shortage[t][i] += short_t;
        inv = std::max(inv - static_cast<double>(d), 0.0);
      }
    }
    const double cost = travel + inst.penalty * penalty_units;
    sum += cost;
    sumsq += cost * cost;
  }

  const double n = static_cast<double>(samples);
  const double mean = sum / n;
  const double var = samples > 1 ? std::max(0.0, (sumsq - n * mean * mean) / (n - 1)) : 0.0;
  rep.expected_total_cost = mean;
  rep.breakdown.penalty_cost = mean - travel;
  for (auto& row : rep.expected_shortage)
    for (double& v : row) v /= n;
  rep.std_error = std::sqrt(var / n);
  rep.ci99_halfwidth = 2.5758293035489004 * rep.std_error;  // 99% two-sided normal
  rep.method = "monte_carlo(n=" + std::to_string(samples) + ", seed=" + std::to_string(seed) + ")";
  return rep;
}

std::optional<double> percentage_error(double heuristic_cost, double optimal_cost) {
  if (optimal_cost > 0.0) return 100.0 * (heuristic_cost - optimal_cost) / optimal_cost;
  if (std::abs(optimal_cost) <= 1e-12 && std::abs(heuristic_cost) <= 1e-12) return 0.0;
  return std::nullopt;  // optimal zero, heuristic positive: undefined
}

}  // namespace errp

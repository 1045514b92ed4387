#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "errp/bench.hpp"
#include "errp/evaluate.hpp"
#include "errp/instance.hpp"
#include "errp/milp.hpp"
#include "errp/plan.hpp"
#include "errp/sdp.hpp"
#include "json.hpp"

using namespace errp;
using nlohmann::ordered_json;

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << text;
  if (!f) throw std::runtime_error("write failed: " + path);
}

void emit(const std::string& out_path, const std::string& text) {
  if (out_path.empty())
    std::cout << text;
  else
    write_text(out_path, text);
}

std::string retailer_label(const Instance& inst, int r) {
  const RetailerSpec& spec = inst.retailers[r];
  return spec.name.empty() ? "node " + std::to_string(spec.node) : spec.name;
}

void print_plan(const Plan& plan, const Instance& inst) {
  std::cout << "route:";
  for (int n : plan.route) std::cout << " " << n;
  std::cout << "\nloads:";
  for (double l : plan.loads) std::cout << " " << l;
  std::cout << "\n";
  for (std::size_t r = 0; r < inst.retailers.size(); ++r) {
    std::cout << "deliveries " << retailer_label(inst, static_cast<int>(r)) << ":";
    for (double q : plan.deliveries[r]) std::cout << " " << q;
    std::cout << "\n";
  }
  std::cout << "predicted cost: " << plan.predicted_cost << "\n";
}

// -1 when the distribution is not a point mass.
int deterministic_value(const DemandDistribution& d) {
  for (std::size_t k = 0; k < d.pmf.size(); ++k)
    if (d.pmf[k] > 1.0 - 1e-9) return static_cast<int>(k);
  return -1;
}

SdpState decode_policy_key(const Policy& p, std::uint64_t key, int t) {
  SdpState s;
  s.t = t;
  s.retailer_inv.assign(p.retailer_caps.size(), 0);
  for (std::size_t i = p.retailer_caps.size(); i-- > 0;) {
    const std::uint64_t radix = static_cast<std::uint64_t>(p.retailer_caps[i]) + 1;
    s.retailer_inv[i] = static_cast<int>(key % radix);
    key /= radix;
  }
  s.battery_level = static_cast<int>(key % (p.levels + 1));
  key /= static_cast<std::uint64_t>(p.levels + 1);
  s.vehicle_inv = static_cast<int>(key % (p.load_cap + 1));
  key /= static_cast<std::uint64_t>(p.load_cap + 1);
  s.pos = static_cast<int>(key);
  return s;
}

std::string policy_to_json(const Policy& policy, const Instance& inst) {
  ordered_json j;
  j["value_at_initial"] = policy.value_at_initial;
  j["levels"] = policy.levels;
  j["state_count"] = policy.state_count();
  j["periods"] = ordered_json::array();
  for (std::size_t ti = 0; ti < policy.table.size(); ++ti) {
    std::vector<std::pair<std::uint64_t, const Policy::Entry*>> entries;
    entries.reserve(policy.table[ti].size());
    for (const auto& [key, e] : policy.table[ti]) entries.push_back({key, &e});
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    ordered_json jt;
    jt["t"] = ti + 1;
    jt["entries"] = ordered_json::array();
    for (const auto& [key, e] : entries) {
      const SdpState s = decode_policy_key(policy, key, static_cast<int>(ti) + 1);
      ordered_json je;
      je["pos"] = s.pos;
      je["vehicle_inv"] = s.vehicle_inv;
      je["battery_level"] = s.battery_level;
      je["retailer_inv"] = s.retailer_inv;
      je["value"] = e->value;
      je["action"] = ordered_json{{"next_pos", e->action.next_pos},
                                  {"load_up", e->action.load_up},
                                  {"delivery", e->action.delivery}};
      jt["entries"].push_back(std::move(je));
    }
    j["periods"].push_back(std::move(jt));
  }
  (void)inst;
  return j.dump(2) + "\n";
}

std::string report_to_json(const EvaluationReport& rep) {
  ordered_json j;
  j["expected_total_cost"] = rep.expected_total_cost;
  j["method"] = rep.method;
  j["breakdown"] = ordered_json{{"ers_energy_cost", rep.breakdown.ers_energy_cost},
                                {"battery_cost", rep.breakdown.battery_cost},
                                {"fuel_cost", rep.breakdown.fuel_cost},
                                {"penalty_cost", rep.breakdown.penalty_cost}};
  j["expected_shortage"] = rep.expected_shortage;
  if (rep.method != "exact") {
    j["ci99_halfwidth"] = rep.ci99_halfwidth;
    j["std_error"] = rep.std_error;
  }
  return j.dump(2) + "\n";
}

void print_report_table(const EvaluationReport& rep, const Instance& inst) {
  std::cout << "method: " << rep.method << "\n";
  std::cout << "ers energy cost:  " << rep.breakdown.ers_energy_cost << "\n";
  std::cout << "battery cost:     " << rep.breakdown.battery_cost << "\n";
  std::cout << "fuel cost:        " << rep.breakdown.fuel_cost << "\n";
  std::cout << "penalty cost:     " << rep.breakdown.penalty_cost << "\n";
  std::cout << "expected total:   " << rep.expected_total_cost << "\n";
  if (rep.method != "exact")
    std::cout << "99% CI halfwidth: " << rep.ci99_halfwidth << "\n";
  std::cout << "expected shortage by period:\n";
  for (std::size_t t = 0; t < rep.expected_shortage.size(); ++t) {
    std::cout << "  t=" << t + 1 << ":";
    for (std::size_t r = 0; r < rep.expected_shortage[t].size(); ++r)
      std::cout << "  " << retailer_label(inst, static_cast<int>(r)) << "="
                << rep.expected_shortage[t][r];
    std::cout << "\n";
  }
}

SensitivityConfig::InventoryCase parse_inventory_case(const std::string& spec) {
  const std::size_t sep = spec.find_first_of(":=");
  if (sep == std::string::npos)
    throw std::runtime_error("inventory case '" + spec +
                             "' must look like label:v1,v2,...");
  SensitivityConfig::InventoryCase ic;
  ic.label = spec.substr(0, sep);
  std::stringstream ss(spec.substr(sep + 1));
  std::string item;
  while (std::getline(ss, item, ','))
    ic.values.push_back(std::stoi(item));
  if (ic.label.empty() || ic.values.empty())
    throw std::runtime_error("inventory case '" + spec +
                             "' must look like label:v1,v2,...");
  return ic;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"electric-roads routing: exact policy solver, static-plan "
               "heuristic and benchmark harness"};
  app.require_subcommand(1);

  // ---- generate ----------------------------------------------------------
  auto* gen = app.add_subcommand("generate", "generate a benchmark-style instance");
  GeneratorConfig gcfg;
  unsigned long gen_seed = 1;
  std::string gen_out;
  gen->add_option("--topology", gcfg.topology, "T1..T4 (built-in road networks)");
  gen->add_option("--demand-pattern", gcfg.demand_pattern, "D1..D3");
  gen->add_option("--penalty", gcfg.penalty, "lost-sales penalty per unit");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--horizon", gcfg.horizon, "number of periods");
  gen->add_option("--retailer-nodes", gcfg.retailer_nodes,
                  "explicit retailer node ids")
      ->delimiter(',');
  gen->add_option("--retailer-count", gcfg.retailer_count,
                  "number of randomly placed retailers");
  gen->add_option("--initial-inventory", gcfg.initial_inventory,
                  "per-retailer starting inventory (single value broadcasts)")
      ->delimiter(',');
  gen->add_flag("--deterministic", gcfg.deterministic_demand,
                "point-mass demand at the pattern means");
  gen->add_option("--retailer-capacity", gcfg.retailer_capacity, "");
  gen->add_option("--vehicle-capacity", gcfg.vehicle_capacity, "");
  gen->add_option("--unladen-weight", gcfg.unladen_weight, "kg");
  gen->add_option("--weight-per-unit", gcfg.weight_per_unit, "kg per cargo unit");
  gen->add_option("--battery", gcfg.battery_capacity, "kWh");
  gen->add_option("--efficiency", gcfg.efficiency, "driveline efficiency");
  gen->add_option("--electricity-cost", gcfg.electricity_cost, "per kWh");
  gen->add_option("--fuel-cost", gcfg.fuel_cost, "per kWh mechanical");
  gen->add_option("--truncate", gcfg.demand_truncate, "demand truncation point");
  gen->add_option("--supply-factor", gcfg.supply_factor,
                  "ERS supply as a multiple of the full-weight requirement");
  gen->add_option("--out", gen_out, "output path (default stdout)");
  gen->callback([&] {
    const Instance inst = generate_instance(gcfg, gen_seed);
    emit(gen_out, instance_to_json(inst));
  });

  // ---- solve-sdp ---------------------------------------------------------
  auto* sdp = app.add_subcommand(
      "solve-sdp", "optimal policy by backward stochastic dynamic programming");
  std::string sdp_instance, sdp_policy_out;
  SdpOptions sopt;
  bool sdp_trace = false;
  sdp->add_option("instance", sdp_instance, "instance file")->required();
  sdp->add_option("--levels", sopt.levels, "battery levels (default 20)");
  sdp->add_option("--state-cap", sopt.state_cap,
                  "refuse instances with more reachable states than this");
  sdp->add_option("--workers", sopt.workers, "threads within each period");
  sdp->add_option("--policy-out", sdp_policy_out, "dump the full policy as JSON");
  sdp->add_flag("--trace", sdp_trace,
                "replay the policy on the deterministic demand trace "
                "(requires point-mass demand)");
  sdp->callback([&] {
    const Instance inst = load_instance(sdp_instance);
    const Policy policy = solve_backward(inst, sopt);
    std::cout << "expected cost at initial state: " << policy.value_at_initial
              << "\n";
    std::cout << "reachable states: " << policy.state_count() << " over "
              << inst.horizon << " periods\n";
    if (!sdp_policy_out.empty())
      write_text(sdp_policy_out, policy_to_json(policy, inst));
    if (sdp_trace) {
      std::vector<std::vector<int>> trace(inst.retailers.size());
      for (std::size_t r = 0; r < inst.retailers.size(); ++r)
        for (int t = 0; t < inst.horizon; ++t) {
          const int v = deterministic_value(inst.retailers[r].demand[t]);
          if (v < 0)
            throw std::runtime_error(
                "--trace needs deterministic (point-mass) demand; retailer " +
                retailer_label(inst, static_cast<int>(r)) + " period " +
                std::to_string(t + 1) + " is stochastic");
          trace[r].push_back(v);
        }
      std::cout << format_trajectory(replay(policy, inst, trace), inst);
    }
  });

  // ---- build-milp --------------------------------------------------------
  auto* bm = app.add_subcommand(
      "build-milp", "assemble the static-uncertainty model and write LP text");
  std::string bm_instance, bm_out = "model.lp";
  MilpBuildOptions bopt;
  bm->add_option("instance", bm_instance, "instance file")->required();
  bm->add_option("--segments", bopt.segments,
                 "tangent segments per loss function (default 10)");
  bm->add_flag("--discretized", bopt.discretized,
               "track the battery in whole level units");
  bm->add_option("--levels", bopt.levels, "battery levels when discretized");
  bm->add_option("--out", bm_out, "LP output path");
  bm->callback([&] {
    const Instance inst = load_instance(bm_instance);
    const MilpModel model = build_model(inst, bopt);
    write_model(model, bm_out);
    std::cout << "wrote " << bm_out << ": " << model.vars.size()
              << " variables, " << model.constraints.size() << " constraints\n";
    std::cout << "linearization gap bound: " << model.linearization_gap_bound
              << "\n";
    for (const std::string& w : model.warnings)
      std::cerr << "warning: " << w << "\n";
  });

  // ---- decode-plan -------------------------------------------------------
  auto* dp = app.add_subcommand(
      "decode-plan", "turn an external solver's solution file into a plan");
  std::string dp_instance, dp_model, dp_solution, dp_out;
  dp->add_option("instance", dp_instance, "instance file")->required();
  dp->add_option("--model", dp_model, "LP file the solution answers")->required();
  dp->add_option("--solution", dp_solution, "solution file")->required();
  dp->add_option("--out", dp_out, "plan output path");
  dp->callback([&] {
    const Instance inst = load_instance(dp_instance);
    const MilpModel model = read_model(dp_model);
    const SolverSolution sol = read_solution(dp_solution, model);
    for (const std::string& w : sol.warnings) std::cerr << "warning: " << w << "\n";
    const Plan plan = decode_plan(model, sol, inst);
    print_plan(plan, inst);
    if (!dp_out.empty()) save_plan(plan, inst, dp_out);
  });

  // ---- solve-enum --------------------------------------------------------
  auto* se = app.add_subcommand(
      "solve-enum", "best fixed plan by exhaustive enumeration (small instances)");
  std::string se_instance, se_out;
  EnumOptions eopt;
  se->add_option("instance", se_instance, "instance file")->required();
  se->add_option("--budget", eopt.budget, "search-node budget");
  se->add_option("--delivery-step", eopt.delivery_step,
                 "delivery quantity grid (units)");
  se->add_flag("--discretized", eopt.eval.discretized_battery,
               "evaluate candidates on the battery level grid");
  se->add_option("--levels", eopt.eval.levels, "battery levels when discretized");
  se->add_option("--out", se_out, "plan output path");
  se->callback([&] {
    const Instance inst = load_instance(se_instance);
    const Plan plan = enumerate_optimal_plan(inst, eopt);
    print_plan(plan, inst);
    if (!se_out.empty()) save_plan(plan, inst, se_out);
  });

  // ---- evaluate ----------------------------------------------------------
  auto* ev = app.add_subcommand("evaluate", "expected cost of a fixed plan");
  std::string ev_plan, ev_instance, ev_method = "exact", ev_out;
  long ev_samples = 100000;
  unsigned long ev_seed = 1;
  EvalOptions evopt;
  bool ev_table = false;
  ev->add_option("plan", ev_plan, "plan file")->required();
  ev->add_option("instance", ev_instance, "instance file")->required();
  ev->add_option("--method", ev_method, "exact | monte-carlo");
  ev->add_option("--samples", ev_samples, "monte-carlo sample count");
  ev->add_option("--seed", ev_seed, "monte-carlo seed");
  ev->add_flag("--discretized", evopt.discretized_battery,
               "battery on the level grid (matches the policy solver)");
  ev->add_option("--levels", evopt.levels, "battery levels when discretized");
  ev->add_flag("--table", ev_table, "also print a human-readable table");
  ev->add_option("--out", ev_out, "report output path (default stdout)");
  ev->callback([&] {
    const Instance inst = load_instance(ev_instance);
    const Plan plan = load_plan(ev_plan, inst);
    EvaluationReport rep;
    if (ev_method == "exact") {
      rep = exact_plan_cost(plan, inst, evopt);
    } else if (ev_method == "monte-carlo" || ev_method == "mc") {
      rep = monte_carlo_plan_cost(plan, inst, ev_samples, ev_seed, evopt);
    } else {
      throw std::runtime_error("unknown method '" + ev_method +
                               "' (expected exact or monte-carlo)");
    }
    if (ev_table) print_report_table(rep, inst);
    emit(ev_out, report_to_json(rep));
  });

  // ---- bench -------------------------------------------------------------
  auto* bench = app.add_subcommand("bench", "benchmark studies");
  bench->require_subcommand(1);

  auto* br = bench->add_subcommand(
      "run", "full-factorial gap study: static heuristic vs optimal policy");
  std::string br_config, br_out;
  int br_workers = 0;
  br->add_option("--config", br_config, "benchmark config file")->required();
  br->add_option("--out", br_out, "output directory")->required();
  br->add_option("--workers", br_workers, "override the config's worker count");
  br->callback([&] {
    BenchConfig cfg = load_bench_config(br_config);
    if (br_workers > 0) cfg.workers = br_workers;
    const BenchResult result = run_benchmark(cfg);
    std::filesystem::create_directories(br_out);
    const std::string pivot = format_pivot(result);
    write_text(br_out + "/results.json", bench_result_to_json(result));
    write_text(br_out + "/cells.csv", bench_cells_to_csv(result));
    write_text(br_out + "/pivot.txt", pivot);
    std::cout << pivot;
    std::cout << "gap range: [" << result.min_gap << "%, " << result.max_gap
              << "%]\n";
    for (const BenchCell& c : result.cells)
      if (!c.failure.empty())
        throw std::runtime_error("cell " + std::to_string(c.id) +
                                 " failed: " + c.failure);
  });

  auto* bs = bench->add_subcommand(
      "sensitivity", "fuel-price sensitivity of the static heuristic");
  std::string bs_instance, bs_out;
  std::vector<double> bs_fuel, bs_penalties;
  std::vector<std::string> bs_inventories;
  SensitivityConfig scfg;
  bs->add_option("--instance", bs_instance, "instance file")->required();
  bs->add_option("--fuel-costs", bs_fuel, "fuel cost values")
      ->required()
      ->delimiter(',');
  bs->add_option("--penalties", bs_penalties, "penalty values")
      ->required()
      ->delimiter(',');
  bs->add_option("--inventory", bs_inventories,
                 "inventory case label:v1,v2,... (repeatable)")
      ->required();
  bs->add_option("--budget", scfg.enum_opt.budget, "enumeration budget");
  bs->add_option("--delivery-step", scfg.enum_opt.delivery_step,
                 "delivery quantity grid (units)");
  bs->add_flag("--discretized", scfg.enum_opt.eval.discretized_battery,
               "evaluate plans on the battery level grid");
  bs->add_option("--levels", scfg.enum_opt.eval.levels,
                 "battery levels when discretized");
  bs->add_option("--out", bs_out, "output directory (optional)");
  bs->callback([&] {
    const Instance inst = load_instance(bs_instance);
    scfg.fuel_costs = bs_fuel;
    scfg.penalties = bs_penalties;
    for (const std::string& spec : bs_inventories)
      scfg.inventories.push_back(parse_inventory_case(spec));
    const std::vector<SensitivityRow> rows = fuel_sensitivity(inst, scfg);
    const std::string table = format_sensitivity(rows, inst);
    std::cout << table;
    if (!bs_out.empty()) {
      std::filesystem::create_directories(bs_out);
      write_text(bs_out + "/sensitivity.json", sensitivity_to_json(rows));
      write_text(bs_out + "/sensitivity.txt", table);
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

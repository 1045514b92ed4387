#include "errp/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include "errp/evaluate.hpp"
#include "errp/sdp.hpp"
#include "json.hpp"

namespace errp {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string join_ints(const std::vector<int>& v, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += std::to_string(v[i]);
  }
  return out;
}

std::string inv_label(const std::vector<int>& v) {
  return "(" + join_ints(v, ",") + ")";
}

std::string penalty_label(double p) {
  if (p == static_cast<double>(std::llround(p)))
    return std::to_string(std::llround(p));
  std::ostringstream os;
  os << p;
  return os.str();
}

struct GapStats {
  int n = 0;
  double mpe = 0.0, mdpe = 0.0, sd = 0.0;
};

GapStats gap_stats(std::vector<double> gaps) {
  GapStats s;
  s.n = static_cast<int>(gaps.size());
  if (s.n == 0) return s;
  double sum = 0.0;
  for (double g : gaps) sum += g;
  s.mpe = sum / s.n;
  std::sort(gaps.begin(), gaps.end());
  s.mdpe = s.n % 2 ? gaps[s.n / 2]
                   : 0.5 * (gaps[s.n / 2 - 1] + gaps[s.n / 2]);
  if (s.n > 1) {
    double ss = 0.0;
    for (double g : gaps) ss += (g - s.mpe) * (g - s.mpe);
    s.sd = std::sqrt(ss / (s.n - 1));
  }
  return s;
}

}  // namespace

BenchConfig load_bench_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open benchmark config: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }

  BenchConfig cfg;
  auto strings = [&](const char* key, std::vector<std::string>* out) {
    if (!j.contains(key))
      throw std::runtime_error(path + ": missing field '" + key + "'");
    for (const auto& v : j.at(key)) out->push_back(v.get<std::string>());
  };
  strings("topologies", &cfg.topologies);
  strings("demand_patterns", &cfg.demand_patterns);
  if (!j.contains("retailer_sets"))
    throw std::runtime_error(path + ": missing field 'retailer_sets'");
  for (const auto& set : j.at("retailer_sets"))
    cfg.retailer_sets.push_back(set.get<std::vector<int>>());
  if (!j.contains("initial_inventories"))
    throw std::runtime_error(path + ": missing field 'initial_inventories'");
  for (const auto& inv : j.at("initial_inventories"))
    cfg.initial_inventories.push_back(inv.get<std::vector<int>>());
  if (!j.contains("penalties"))
    throw std::runtime_error(path + ": missing field 'penalties'");
  for (const auto& p : j.at("penalties")) cfg.penalties.push_back(p.get<double>());

  cfg.deterministic_demand = j.value("deterministic_demand", false);
  cfg.horizon = j.value("horizon", cfg.horizon);
  cfg.levels = j.value("levels", cfg.levels);
  cfg.base_seed = j.value("base_seed", cfg.base_seed);
  cfg.workers = j.value("workers", cfg.workers);
  cfg.enum_budget = j.value("enum_budget", cfg.enum_budget);

  if (j.contains("base")) {
    const json& b = j.at("base");
    GeneratorConfig& g = cfg.base;
    g.retailer_capacity = b.value("retailer_capacity", g.retailer_capacity);
    g.vehicle_capacity = b.value("vehicle_capacity", g.vehicle_capacity);
    g.unladen_weight = b.value("unladen_weight", g.unladen_weight);
    g.weight_per_unit = b.value("weight_per_unit", g.weight_per_unit);
    g.battery_capacity = b.value("battery_capacity", g.battery_capacity);
    g.efficiency = b.value("efficiency", g.efficiency);
    g.electricity_cost = b.value("electricity_cost", g.electricity_cost);
    g.fuel_cost = b.value("fuel_cost", g.fuel_cost);
    g.demand_truncate = b.value("demand_truncate", g.demand_truncate);
    g.alpha_min = b.value("alpha_min", g.alpha_min);
    g.alpha_max = b.value("alpha_max", g.alpha_max);
    g.beta_min = b.value("beta_min", g.beta_min);
    g.beta_max = b.value("beta_max", g.beta_max);
    g.supply_factor = b.value("supply_factor", g.supply_factor);
  }

  if (cfg.topologies.empty() || cfg.retailer_sets.empty() ||
      cfg.initial_inventories.empty() || cfg.penalties.empty() ||
      cfg.demand_patterns.empty())
    throw std::runtime_error(path + ": every cross-product dimension needs at least one entry");
  return cfg;
}

namespace {

BenchCell run_cell(const BenchConfig& cfg, BenchCell cell) {
  try {
    GeneratorConfig g = cfg.base;
    g.topology = cell.topology;
    g.demand_pattern = cell.demand_pattern;
    g.retailer_nodes = cell.retailer_nodes;
    g.initial_inventory = cell.initial_inventory;
    g.penalty = cell.penalty;
    g.horizon = cfg.horizon;
    g.deterministic_demand = cfg.deterministic_demand;
    const Instance inst = generate_instance(g, cell.seed);

    SdpOptions sopt;
    sopt.levels = cfg.levels;
    const Policy policy = solve_backward(inst, sopt);
    cell.policy_cost = policy.value_at_initial;

    EnumOptions eopt;
    eopt.budget = cfg.enum_budget;
    eopt.eval.discretized_battery = true;
    eopt.eval.levels = cfg.levels;
    const Plan plan = enumerate_optimal_plan(inst, eopt);
    cell.heuristic_cost = plan.predicted_cost;

    cell.gap_percent = percentage_error(cell.heuristic_cost, cell.policy_cost);
  } catch (const std::exception& e) {
    cell.failure = e.what();
  }
  return cell;
}

}  // namespace

BenchResult run_benchmark(const BenchConfig& cfg) {
  std::vector<BenchCell> specs;
  for (const std::string& topo : cfg.topologies)
    for (const std::vector<int>& nodes : cfg.retailer_sets)
      for (const std::vector<int>& inv : cfg.initial_inventories)
        for (double p : cfg.penalties)
          for (const std::string& pattern : cfg.demand_patterns) {
            BenchCell c;
            c.id = static_cast<int>(specs.size()) + 1;
            c.topology = topo;
            c.demand_pattern = pattern;
            c.retailer_nodes = nodes;
            c.initial_inventory = inv;
            c.penalty = p;
            c.seed = cfg.base_seed + static_cast<unsigned long>(specs.size());
            specs.push_back(std::move(c));
          }

  BenchResult result;
  result.cells.resize(specs.size());
  const int workers =
      std::max(1, std::min<int>(cfg.workers, static_cast<int>(specs.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < specs.size(); ++i)
      result.cells[i] = run_cell(cfg, specs[i]);
  } else {
    std::atomic<std::size_t> next{0};
    auto work = [&] {
      for (std::size_t i = next.fetch_add(1); i < specs.size();
           i = next.fetch_add(1))
        result.cells[i] = run_cell(cfg, specs[i]);
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (std::thread& th : pool) th.join();
  }

  std::vector<double> all_gaps;
  for (const BenchCell& c : result.cells)
    if (c.gap_percent) {
      all_gaps.push_back(*c.gap_percent);
      if (*c.gap_percent < -1e-6)
        throw std::logic_error(
            "benchmark cell " + std::to_string(c.id) + " has gap " +
            std::to_string(*c.gap_percent) +
            "%: a fixed plan can never beat the optimal policy, so either "
            "solver is wrong");
    }
  if (!all_gaps.empty()) {
    result.min_gap = *std::min_element(all_gaps.begin(), all_gaps.end());
    result.max_gap = *std::max_element(all_gaps.begin(), all_gaps.end());
  }

  // Pivot rows: one block per study dimension plus the overall summary.
  auto add_rows = [&](const std::string& dim,
                      const std::vector<std::string>& levels,
                      auto&& level_of) {
    for (const std::string& lvl : levels) {
      std::vector<double> gaps;
      for (const BenchCell& c : result.cells)
        if (c.gap_percent && level_of(c) == lvl) gaps.push_back(*c.gap_percent);
      const GapStats s = gap_stats(std::move(gaps));
      result.pivot.push_back({dim, lvl, s.n, s.mpe, s.mdpe, s.sd});
    }
  };
  add_rows("Network", cfg.topologies,
           [](const BenchCell& c) { return c.topology; });
  {
    std::vector<std::string> lv;
    for (const auto& inv : cfg.initial_inventories) lv.push_back(inv_label(inv));
    add_rows("Initial inv.", lv,
             [](const BenchCell& c) { return inv_label(c.initial_inventory); });
  }
  {
    std::vector<std::string> lv;
    for (double p : cfg.penalties) lv.push_back(penalty_label(p));
    add_rows("Penalty", lv,
             [](const BenchCell& c) { return penalty_label(c.penalty); });
  }
  add_rows("Demand pattern", cfg.demand_patterns,
           [](const BenchCell& c) { return c.demand_pattern; });
  {
    const GapStats s = gap_stats(all_gaps);
    result.pivot.push_back({"General", "All", s.n, s.mpe, s.mdpe, s.sd});
  }
  return result;
}

std::string format_pivot(const BenchResult& result) {
  std::ostringstream os;
  os << std::left << std::setw(16) << "Dimension" << std::setw(10) << "Level"
     << std::right << std::setw(7) << "Cells" << std::setw(9) << "MPE%"
     << std::setw(9) << "MdPE%" << std::setw(9) << "SD" << "\n";
  os << std::string(60, '-') << "\n";
  os << std::fixed << std::setprecision(2);
  std::string prev_dim;
  for (const PivotRow& r : result.pivot) {
    if (!prev_dim.empty() && r.dimension != prev_dim)
      os << std::string(60, '-') << "\n";
    prev_dim = r.dimension;
    os << std::left << std::setw(16) << r.dimension << std::setw(10) << r.level
       << std::right << std::setw(7) << r.cells << std::setw(9) << r.mpe
       << std::setw(9) << r.mdpe << std::setw(9) << r.sd << "\n";
  }
  int failed = 0;
  for (const BenchCell& c : result.cells)
    if (!c.failure.empty()) ++failed;
  if (failed) {
    os << "\n" << failed << " cell(s) failed:\n";
    for (const BenchCell& c : result.cells)
      if (!c.failure.empty())
        os << "  cell " << c.id << ": " << c.failure << "\n";
  }
  return os.str();
}

std::string bench_result_to_json(const BenchResult& result) {
  ordered_json j;
  j["cells"] = ordered_json::array();
  for (const BenchCell& c : result.cells) {
    ordered_json jc;
    jc["id"] = c.id;
    jc["topology"] = c.topology;
    jc["demand_pattern"] = c.demand_pattern;
    jc["retailer_nodes"] = c.retailer_nodes;
    jc["initial_inventory"] = c.initial_inventory;
    jc["penalty"] = c.penalty;
    jc["seed"] = c.seed;
    if (c.failure.empty()) {
      jc["policy_cost"] = c.policy_cost;
      jc["heuristic_cost"] = c.heuristic_cost;
    }
    if (c.gap_percent)
      jc["gap_percent"] = *c.gap_percent;
    else
      jc["gap_percent"] = nullptr;
    if (!c.failure.empty()) jc["failure"] = c.failure;
    j["cells"].push_back(std::move(jc));
  }
  j["pivot"] = ordered_json::array();
  for (const PivotRow& r : result.pivot)
    j["pivot"].push_back(ordered_json{{"dimension", r.dimension},
                                      {"level", r.level},
                                      {"cells", r.cells},
                                      {"mpe", r.mpe},
                                      {"mdpe", r.mdpe},
                                      {"sd", r.sd}});
  j["min_gap"] = result.min_gap;
  j["max_gap"] = result.max_gap;
  return j.dump(2) + "\n";
}

std::string bench_cells_to_csv(const BenchResult& result) {
  std::ostringstream os;
  os << "id,topology,demand_pattern,retailer_nodes,initial_inventory,penalty,"
        "seed,policy_cost,heuristic_cost,gap_percent,failure\n";
  os << std::setprecision(17);
  for (const BenchCell& c : result.cells) {
    os << c.id << ',' << c.topology << ',' << c.demand_pattern << ','
       << join_ints(c.retailer_nodes, ";") << ','
       << join_ints(c.initial_inventory, ";") << ',' << c.penalty << ','
       << c.seed << ',';
    if (c.failure.empty()) os << c.policy_cost;
    os << ',';
    if (c.failure.empty()) os << c.heuristic_cost;
    os << ',';
    if (c.gap_percent) os << *c.gap_percent;
    os << ',';
    // Commas inside failure text would break the row apart.
    std::string msg = c.failure;
    std::replace(msg.begin(), msg.end(), ',', ';');
    os << msg << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Fuel-price sensitivity.

namespace {

std::string stop_label(const Instance& inst, int node) {
  if (node == inst.network.depot) return "D";
  const int r = inst.retailer_index(node);
  if (r < 0) return "";
  const std::string& name = inst.retailers[r].name;
  return name.empty() ? "N" + std::to_string(node) : name;
}

std::string visit_order_of(const Plan& plan, const Instance& inst) {
  if (plan.is_zero_delivery()) return "N/A";
  std::string out;
  std::string prev;
  for (int node : plan.route) {
    const std::string lbl = stop_label(inst, node);
    if (lbl.empty() || lbl == prev) continue;
    if (!out.empty()) out += ",";
    out += lbl;
    prev = lbl;
  }
  return out;
}

}  // namespace

std::vector<SensitivityRow> fuel_sensitivity(const Instance& inst,
                                             const SensitivityConfig& cfg) {
  if (cfg.fuel_costs.empty() || cfg.penalties.empty() || cfg.inventories.empty())
    throw std::runtime_error(
        "fuel_sensitivity: fuel costs, penalties and inventory cases must all "
        "be nonempty");
  std::vector<SensitivityRow> rows;
  for (const SensitivityConfig::InventoryCase& ic : cfg.inventories) {
    if (ic.values.size() != inst.retailers.size())
      throw std::runtime_error("fuel_sensitivity: inventory case '" + ic.label +
                               "' has " + std::to_string(ic.values.size()) +
                               " values for " +
                               std::to_string(inst.retailers.size()) +
                               " retailers");
    for (double p : cfg.penalties)
      for (double f : cfg.fuel_costs) {
        Instance probe = inst;
        for (std::size_t r = 0; r < probe.retailers.size(); ++r)
          probe.retailers[r].initial_inventory = ic.values[r];
        probe.penalty = p;
        probe.fuel_cost = f;
        probe.validate();

        const Plan plan = enumerate_optimal_plan(probe, cfg.enum_opt);
        SensitivityRow row;
        row.inventory_label = ic.label;
        row.penalty = p;
        row.fuel_cost = f;
        for (double l : plan.loads) row.total_load += l;
        for (const auto& q : plan.deliveries) {
          double sum = 0.0;
          for (double v : q) sum += v;
          row.delivered.push_back(sum);
        }
        row.visit_order = visit_order_of(plan, probe);
        row.plan_cost = plan.predicted_cost;
        rows.push_back(std::move(row));
      }
  }
  return rows;
}

std::string format_sensitivity(const std::vector<SensitivityRow>& rows,
                               const Instance& inst) {
  std::ostringstream os;
  os << std::left << std::setw(12) << "Inventory" << std::right << std::setw(9)
     << "Penalty" << std::setw(7) << "Fuel" << std::setw(7) << "Load";
  for (const RetailerSpec& r : inst.retailers)
    os << std::setw(9) << (r.name.empty() ? "N" + std::to_string(r.node) : r.name);
  os << "  " << std::left << std::setw(14) << "Visit order" << std::right
     << std::setw(10) << "Cost" << "\n";
  os << std::fixed << std::setprecision(2);
  for (const SensitivityRow& row : rows) {
    os << std::left << std::setw(12) << row.inventory_label << std::right
       << std::setw(9) << penalty_label(row.penalty) << std::setw(7)
       << penalty_label(row.fuel_cost) << std::setw(7) << row.total_load;
    for (double d : row.delivered) os << std::setw(9) << d;
    os << "  " << std::left << std::setw(14) << row.visit_order << std::right
       << std::setw(10) << row.plan_cost << "\n";
  }
  return os.str();
}

std::string sensitivity_to_json(const std::vector<SensitivityRow>& rows) {
  ordered_json j = ordered_json::array();
  for (const SensitivityRow& r : rows)
    j.push_back(ordered_json{{"inventory", r.inventory_label},
                             {"penalty", r.penalty},
                             {"fuel_cost", r.fuel_cost},
                             {"total_load", r.total_load},
                             {"delivered", r.delivered},
                             {"visit_order", r.visit_order},
                             {"plan_cost", r.plan_cost}});
  return j.dump(2) + "\n";
}

}  // namespace errp

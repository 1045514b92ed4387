#include <algorithm>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "errp/bench.hpp"
#include "errp/instance.hpp"

using namespace errp;

namespace {

// A four-cell factorial small enough for a unit test: one topology, one
// retailer set, two inventory levels, two penalties, one demand pattern.
BenchConfig tiny_config() {
  BenchConfig cfg;
  cfg.topologies = {"T2"};
  cfg.retailer_sets = {{1, 3}};
  cfg.initial_inventories = {{2, 2}, {5, 5}};
  cfg.penalties = {5.0, 15.0};
  cfg.demand_patterns = {"D1"};
  cfg.horizon = 4;
  cfg.levels = 10;
  cfg.base_seed = 7;
  cfg.base.retailer_capacity = 5;
  cfg.base.vehicle_capacity = 4;
  cfg.base.unladen_weight = 1000.0;
  cfg.base.weight_per_unit = 250.0;
  cfg.base.battery_capacity = 60.0;
  cfg.base.efficiency = 1.0;
  cfg.base.demand_truncate = 3;
  cfg.base.alpha_min = 0.0005;
  cfg.base.alpha_max = 0.001;
  cfg.base.beta_min = 1.0;
  cfg.base.beta_max = 2.0;
  return cfg;
}

std::string write_temp(const std::string& stem, const std::string& text) {
  const auto path = (std::filesystem::temp_directory_path() / stem).string();
  std::ofstream out(path);
  out << text;
  return path;
}

}  // namespace

TEST_CASE("factorial study: plans never beat policies, layout is stable") {
  const BenchConfig cfg = tiny_config();
  const BenchResult res = run_benchmark(cfg);
  REQUIRE(res.cells.size() == 4);
  for (std::size_t i = 0; i < res.cells.size(); ++i) {
    const BenchCell& c = res.cells[i];
    CHECK(c.id == static_cast<int>(i) + 1);
    CHECK(c.failure.empty());
    CHECK(c.seed == cfg.base_seed + i);
    REQUIRE(c.gap_percent.has_value());
    CHECK(*c.gap_percent >= 0.0);
    CHECK(c.heuristic_cost >= c.policy_cost);
    CHECK(c.policy_cost > 0.0);
  }
  CHECK(res.min_gap >= 0.0);
  CHECK(res.max_gap >= res.min_gap);

  // One pivot block per study dimension, then the overall row.
  REQUIRE(res.pivot.size() == 1 + 2 + 2 + 1 + 1);
  CHECK(res.pivot[0].dimension == "Network");
  CHECK(res.pivot[0].level == "T2");
  CHECK(res.pivot[0].cells == 4);
  CHECK(res.pivot[1].dimension == "Initial inv.");
  CHECK(res.pivot[1].level == "(2,2)");
  CHECK(res.pivot[1].cells == 2);
  CHECK(res.pivot[3].dimension == "Penalty");
  CHECK(res.pivot[3].level == "5");
  CHECK(res.pivot.back().dimension == "General");
  CHECK(res.pivot.back().cells == 4);

  const std::string pretty = format_pivot(res);
  CHECK(pretty.find("Dimension") != std::string::npos);
  CHECK(pretty.find("General") != std::string::npos);
  CHECK(pretty.find("failed") == std::string::npos);

  const std::string csv = bench_cells_to_csv(res);
  CHECK(csv.rfind("id,topology,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);  // header + 4 cells

  const std::string js = bench_result_to_json(res);
  CHECK(js.find("\"pivot\"") != std::string::npos);
  CHECK(js.find("\"max_gap\"") != std::string::npos);
}

TEST_CASE("worker count does not change benchmark results") {
  BenchConfig cfg = tiny_config();
  const BenchResult seq = run_benchmark(cfg);
  cfg.workers = 3;
  const BenchResult par = run_benchmark(cfg);
  REQUIRE(par.cells.size() == seq.cells.size());
  for (std::size_t i = 0; i < seq.cells.size(); ++i) {
    CHECK(par.cells[i].policy_cost == seq.cells[i].policy_cost);
    CHECK(par.cells[i].heuristic_cost == seq.cells[i].heuristic_cost);
  }
}

TEST_CASE("with deterministic demand the static plan is exactly optimal") {
  BenchConfig cfg = tiny_config();
  cfg.deterministic_demand = true;
  const BenchResult res = run_benchmark(cfg);
  REQUIRE(res.cells.size() == 4);
  for (const BenchCell& c : res.cells) {
    CHECK(c.failure.empty());
    REQUIRE(c.gap_percent.has_value());
    CHECK(*c.gap_percent == 0.0);
    CHECK(c.heuristic_cost == c.policy_cost);
  }
  CHECK(res.max_gap == 0.0);
}

TEST_CASE("a failing cell is reported without sinking the run") {
  BenchConfig cfg = tiny_config();
  cfg.retailer_sets = {{9}};  // two hops away, but the horizon allows one
  cfg.initial_inventories = {{0}};
  cfg.penalties = {5.0};
  cfg.horizon = 2;
  const BenchResult res = run_benchmark(cfg);
  REQUIRE(res.cells.size() == 1);
  CHECK_FALSE(res.cells[0].failure.empty());
  CHECK(res.cells[0].failure.find("not reachable") != std::string::npos);
  CHECK_FALSE(res.cells[0].gap_percent.has_value());
  CHECK(res.pivot.back().cells == 0);
  CHECK(format_pivot(res).find("cell(s) failed") != std::string::npos);
}

TEST_CASE("the shipped 48-cell study configuration loads") {
  const BenchConfig cfg = load_bench_config("data/bench48.json");
  CHECK(cfg.topologies == std::vector<std::string>{"T1", "T2"});
  CHECK(cfg.retailer_sets.size() == 2);
  CHECK(cfg.initial_inventories.size() == 2);
  CHECK(cfg.penalties.size() == 3);
  CHECK(cfg.demand_patterns == std::vector<std::string>{"D1", "D2"});
  CHECK_FALSE(cfg.deterministic_demand);
  CHECK(cfg.horizon == 6);
  CHECK(cfg.levels == 20);
  CHECK(cfg.base_seed == 42);
  CHECK(cfg.base.battery_capacity == 150.0);
  CHECK(cfg.base.efficiency == 0.75);
  const std::size_t cells = cfg.topologies.size() * cfg.retailer_sets.size() *
                            cfg.initial_inventories.size() *
                            cfg.penalties.size() * cfg.demand_patterns.size();
  CHECK(cells == 48);
}

TEST_CASE("config loading reports what is missing") {
  const std::string empty = write_temp("errp_bench_empty.json", "{}");
  try {
    load_bench_config(empty);
    FAIL("expected a missing-field error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("topologies") != std::string::npos);
  }
  std::filesystem::remove(empty);

  const std::string hollow = write_temp(
      "errp_bench_hollow.json",
      R"({"topologies":[],"retailer_sets":[[1]],"initial_inventories":[[0]],
          "penalties":[1],"demand_patterns":["D1"]})");
  try {
    load_bench_config(hollow);
    FAIL("expected an empty-dimension error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("at least one entry") != std::string::npos);
  }
  std::filesystem::remove(hollow);

  CHECK_THROWS(load_bench_config("no/such/file.json"));
}

TEST_CASE("raising the fuel price flips the plan to serving nobody") {
  const Instance inst = load_instance("data/sensitivity10.json");
  SensitivityConfig cfg;
  cfg.fuel_costs = {3.0, 10.0};
  cfg.penalties = {0.1};
  cfg.inventories = {{"(0,0)", {0, 0}}};

  const auto rows = fuel_sensitivity(inst, cfg);
  REQUIRE(rows.size() == 2);

  const SensitivityRow& cheap = rows[0];
  CHECK(cheap.fuel_cost == 3.0);
  CHECK(cheap.total_load == 9.0);
  REQUIRE(cheap.delivered.size() == 2);
  CHECK(cheap.delivered[0] == 5.0);
  CHECK(cheap.delivered[1] == 4.0);
  CHECK(cheap.visit_order == "D,R1,R2");
  CHECK(cheap.plan_cost == doctest::Approx(0.675));

  const SensitivityRow& dear = rows[1];
  CHECK(dear.fuel_cost == 10.0);
  CHECK(dear.total_load == 0.0);
  CHECK(dear.delivered == std::vector<double>{0.0, 0.0});
  CHECK(dear.visit_order == "N/A");
  CHECK(dear.plan_cost == doctest::Approx(1.2));
  CHECK(dear.plan_cost > cheap.plan_cost);

  const std::string pretty = format_sensitivity(rows, inst);
  CHECK(pretty.find("Visit order") != std::string::npos);
  CHECK(pretty.find("N/A") != std::string::npos);
  CHECK(pretty.find("D,R1,R2") != std::string::npos);
  const std::string js = sensitivity_to_json(rows);
  CHECK(js.find("\"visit_order\": \"N/A\"") != std::string::npos);
}

TEST_CASE("sensitivity configuration is validated") {
  const Instance inst = load_instance("data/sensitivity10.json");
  SensitivityConfig cfg;
  cfg.penalties = {0.1};
  cfg.inventories = {{"(0,0)", {0, 0}}};
  CHECK_THROWS(fuel_sensitivity(inst, cfg));  // no fuel costs

  cfg.fuel_costs = {3.0};
  cfg.inventories = {{"bad", {0}}};
  try {
    fuel_sensitivity(inst, cfg);
    FAIL("expected an inventory-shape error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("1 values for 2 retailers") !=
          std::string::npos);
  }
}

#include <filesystem>
#include <string>

#include "doctest.h"
#include "errp/instance.hpp"

using namespace errp;

namespace {

std::string validation_message(const Instance& inst) {
  try {
    inst.validate();
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("shipped six-node example parses with its published shape") {
  const Instance inst = load_instance("data/example1.json");
  CHECK(inst.network.node_count == 6);
  CHECK(inst.network.depot == 0);
  CHECK_FALSE(inst.network.allow_stay);
  CHECK(inst.network.arcs.size() == 16);
  CHECK(inst.horizon == 4);
  REQUIRE(inst.retailers.size() == 2);
  CHECK(inst.retailers[0].node == 1);
  CHECK(inst.retailers[0].initial_inventory == 2);
  CHECK(inst.retailers[1].node == 2);
  CHECK(inst.retailers[1].initial_inventory == 3);
  CHECK(inst.vehicle.load_capacity == 4);
  CHECK(inst.vehicle.battery_capacity == 20.0);
  CHECK(inst.penalty == 25.0);
  CHECK(inst.fuel_cost == 5.0);
  CHECK(inst.ers_cost_basis == ErsCostBasis::consumed);

  const int ers = inst.network.arc_index(0, 4);
  REQUIRE(ers >= 0);
  CHECK(inst.network.arcs[ers].supplied_energy == 20.0);
  CHECK(inst.network.arcs[inst.network.arc_index(0, 3)].supplied_energy == 0.0);

  CHECK(inst.retailer_index(1) == 0);
  CHECK(inst.retailer_index(0) == -1);
  CHECK(inst.max_total_weight() == doctest::Approx(5.0));
}

TEST_CASE("instances survive a serialize/parse round trip") {
  const Instance inst = load_instance("data/example1.json");
  const Instance again = parse_instance(instance_to_json(inst), "round-trip");
  CHECK(again == inst);

  const auto path =
      (std::filesystem::temp_directory_path() / "errp_instance_rt.json").string();
  save_instance(inst, path);
  CHECK(load_instance(path) == inst);
  std::filesystem::remove(path);
}

TEST_CASE("parser reports the missing piece") {
  try {
    parse_instance("{}", "bad.json");
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("network") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_instance("{not json", "bad.json"), ValidationError);
}

TEST_CASE("validation names the violated rule") {
  const Instance base = load_instance("data/example1.json");

  Instance dup = base;
  dup.network.arcs.push_back(dup.network.arcs[0]);
  CHECK(validation_message(dup).find("duplicate arc") != std::string::npos);

  Instance self = base;
  self.network.arcs.push_back({.from = 3, .to = 3});
  CHECK(validation_message(self).find("self-loop") != std::string::npos);

  Instance inv = base;
  inv.retailers[0].initial_inventory = 99;
  CHECK(validation_message(inv).find("initial_inventory") != std::string::npos);

  Instance bat = base;
  bat.start_battery = 21.0;
  CHECK(validation_message(bat).find("battery") != std::string::npos);

  Instance depot_ret = base;
  depot_ret.retailers[0].node = 0;
  CHECK(validation_message(depot_ret).find("depot") != std::string::npos);

  Instance neg = base;
  neg.network.arcs[0].alpha = -1.0;  // requirement < 0 at full weight
  CHECK(validation_message(neg).find("regen") != std::string::npos);
  neg.allow_regen = true;
  CHECK(validation_message(neg).empty());
}

TEST_CASE("generator is deterministic in config and seed") {
  GeneratorConfig cfg;
  cfg.topology = "T2";
  cfg.retailer_nodes = {1, 3};
  cfg.initial_inventory = {5};
  cfg.horizon = 6;
  const Instance a = generate_instance(cfg, 7);
  const Instance b = generate_instance(cfg, 7);
  CHECK(a == b);
  const Instance c = generate_instance(cfg, 8);
  CHECK_FALSE(a == c);

  CHECK(a.retailers.size() == 2);
  CHECK(a.retailers[0].name == "R1");
  CHECK(a.retailers[0].initial_inventory == 5);  // broadcast
  CHECK(a.retailers[1].initial_inventory == 5);
  CHECK(a.horizon == 6);
  CHECK(a.start_node == 0);
}

TEST_CASE("generator wires the demand patterns per retailer") {
  GeneratorConfig cfg;
  cfg.topology = "T1";
  cfg.retailer_nodes = {1, 2};
  cfg.horizon = 4;
  cfg.demand_pattern = "D2";
  cfg.deterministic_demand = true;
  const Instance inst = generate_instance(cfg, 3);
  // D2 means: first profile 1,1,2,2..., second profile 5,4,4,3...
  const std::vector<int> first = {1, 1, 2, 2}, second = {5, 4, 4, 3};
  for (int t = 0; t < 4; ++t) {
    CHECK(inst.retailers[0].demand[t] == point_mass(first[t]));
    CHECK(inst.retailers[1].demand[t] == point_mass(second[t]));
  }

  cfg.deterministic_demand = false;
  const Instance stoch = generate_instance(cfg, 3);
  for (int t = 0; t < 4; ++t)
    CHECK(stoch.retailers[1].demand[t] ==
          truncated_poisson(second[t], cfg.demand_truncate));
}

TEST_CASE("generator electrifies the marked links at the supply factor") {
  GeneratorConfig cfg;
  cfg.topology = "T1";
  cfg.retailer_nodes = {1, 2};
  cfg.horizon = 6;
  const Instance inst = generate_instance(cfg, 19);

  const int plain = inst.network.arc_index(0, 1);
  REQUIRE(plain >= 0);
  CHECK(inst.network.arcs[plain].supplied_energy == 0.0);

  const int ers = inst.network.arc_index(0, 12);
  REQUIRE(ers >= 0);
  const ArcSpec& a = inst.network.arcs[ers];
  CHECK(a.supplied_energy ==
        doctest::Approx(cfg.supply_factor *
                        (a.alpha * inst.max_total_weight() + a.beta)));
  // the reverse direction carries the same coefficients and supply
  const ArcSpec& rev = inst.network.arcs[inst.network.arc_index(12, 0)];
  CHECK(rev.alpha == a.alpha);
  CHECK(rev.supplied_energy == a.supplied_energy);
}

TEST_CASE("generator refuses unreachable retailer placements") {
  GeneratorConfig cfg;
  cfg.topology = "T2";
  cfg.retailer_nodes = {6};
  cfg.horizon = 2;  // one traversal cannot reach node 6
  CHECK_THROWS_AS(generate_instance(cfg, 1), ValidationError);
}

TEST_CASE("custom topology and demand means pass through the generator") {
  GeneratorConfig cfg;
  cfg.topology = "custom";
  cfg.custom_node_count = 3;
  cfg.custom_arcs = {{.from = 0, .to = 1, .alpha = 0.001, .beta = 2.0},
                     {.from = 1, .to = 0, .alpha = 0.001, .beta = 2.0},
                     {.from = 1, .to = 2, .alpha = 0.001, .beta = 2.0},
                     {.from = 2, .to = 0, .alpha = 0.001, .beta = 2.0}};
  cfg.demand_pattern = "custom";
  cfg.custom_means = {{1.0, 2.0, 1.0}};
  cfg.retailer_nodes = {2};
  cfg.horizon = 3;
  const Instance inst = generate_instance(cfg, 5);
  CHECK(inst.network.node_count == 3);
  CHECK(inst.network.arcs.size() == 4);
  REQUIRE(inst.retailers.size() == 1);
  CHECK(inst.retailers[0].demand[1] ==
        truncated_poisson(2.0, cfg.demand_truncate));

  cfg.custom_means.clear();
  CHECK_THROWS_AS(generate_instance(cfg, 5), ValidationError);
}

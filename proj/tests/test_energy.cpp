#include <cmath>
#include <fstream>
#include <stdexcept>

#include "doctest.h"
#include "errp/energy.hpp"
#include "errp/instance.hpp"
#include "errp/rng.hpp"
#include "json.hpp"

using namespace errp;

namespace {

ArcPhysicalParams hgv_params() {
  ArcPhysicalParams p;
  p.drag_coefficient = 0.7;
  p.frontal_area = 3.912;
  p.rolling_resistance = 0.01;
  return p;
}

}  // namespace

TEST_CASE("mechanical power sums the four resistance terms") {
  ArcPhysicalParams p = hgv_params();
  // flat road, cruising: aero + rolling only
  CHECK(mechanical_power(0.0, 25.0, 20000.0, p) ==
        doctest::Approx(74810.214375).epsilon(1e-12));
  // uphill while accelerating adds inertia and grade terms
  p.slope_angle = 0.02;
  CHECK(mechanical_power(0.3, 25.0, 20000.0, p) ==
        doctest::Approx(322893.86483279435).epsilon(1e-12));
}

TEST_CASE("arc coefficients collapse the physics onto alpha*m + beta") {
  ArcPhysicalParams p = hgv_params();
  p.distance = 10000.0;
  p.speed = 25.0;
  p.slope_angle = 0.01;
  p.efficiency = 0.9;
  const ArcCoefficients c = arc_coefficients(p);
  CHECK(c.alpha == doctest::Approx(0.0004904836501226246).epsilon(1e-12));
  CHECK(c.beta == doctest::Approx(2.5760214375).epsilon(1e-12));
  CHECK_FALSE(c.regenerative);

  // a descent steep enough to beat rolling resistance flips the mass term
  p.slope_angle = -0.2;
  const ArcCoefficients down = arc_coefficients(p);
  CHECK(down.regenerative);
  CHECK(down.alpha < 0.0);
}

TEST_CASE("arc coefficients reject degenerate inputs") {
  ArcPhysicalParams p = hgv_params();
  p.speed = 25.0;
  CHECK_THROWS_AS(arc_coefficients(p), std::runtime_error);  // distance 0
  p.distance = 100.0;
  p.speed = 0.0;
  CHECK_THROWS_AS(arc_coefficients(p), std::runtime_error);
  p.speed = 25.0;
  p.efficiency = 1.5;
  CHECK_THROWS_AS(arc_coefficients(p), std::runtime_error);
}

TEST_CASE("coefficient path and power path price the same energy") {
  Rng rng(20240811);
  for (int i = 0; i < 1000; ++i) {
    ArcPhysicalParams p;
    p.distance = rng_uniform(rng, 500.0, 50000.0);
    p.speed = rng_uniform(rng, 5.0, 33.0);
    p.slope_angle = rng_uniform(rng, -0.05, 0.05);
    p.drag_coefficient = rng_uniform(rng, 0.5, 1.0);
    p.frontal_area = rng_uniform(rng, 2.0, 10.0);
    p.rolling_resistance = rng_uniform(rng, 0.005, 0.02);
    p.efficiency = rng_uniform(rng, 0.5, 1.0);
    const double mass = rng_uniform(rng, 3000.0, 44000.0);

    const ArcCoefficients c = arc_coefficients(p);
    ArcSpec arc;
    arc.alpha = c.alpha;
    arc.beta = c.beta;
    const double direct = required_battery_energy(arc, mass);
    const double via_power = p.efficiency *
                             mechanical_power(0.0, p.speed, mass, p) *
                             (p.distance / p.speed) / 3.6e6;
    CHECK(std::abs(direct - via_power) < 1e-9);
  }
}

TEST_CASE("required energy is monotone in mass for nonnegative alpha") {
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    ArcSpec arc;
    arc.alpha = rng_uniform(rng, 0.0, 0.01);
    arc.beta = rng_uniform(rng, 0.0, 10.0);
    const double m1 = rng_uniform(rng, 1000.0, 20000.0);
    const double m2 = m1 + rng_uniform(rng, 0.0, 20000.0);
    CHECK(required_battery_energy(arc, m1) <=
          required_battery_energy(arc, m2));
  }
}

TEST_CASE("fuel energy pays the driveline efficiency back out") {
  CHECK(fuel_energy_from_deficit(1.0, 1.0) == doctest::Approx(1.0));
  CHECK(fuel_energy_from_deficit(3.0, 0.75) == doctest::Approx(4.0));
  CHECK(fuel_energy_from_deficit(0.0, 0.9) == 0.0);
  CHECK_THROWS_AS(fuel_energy_from_deficit(1.0, 0.0), std::runtime_error);
}

TEST_CASE("level discretization rounds halves away from zero") {
  ArcSpec arc;
  arc.beta = 9.0;  // 9 kWh at any mass
  CHECK(discretize_energy(arc, 22000.0, 20, 150.0) == 1);  // round(1.2)
  arc.beta = 0.0;
  CHECK(discretize_energy(arc, 22000.0, 20, 150.0) == 0);
  // 7.5 * (B / levels) lands exactly on a half level
  CHECK(discretize_kwh(7.5 * (150.0 / 20), 20, 150.0) == 8);
  CHECK(discretize_kwh(-7.5 * (150.0 / 20), 20, 150.0) == -8);
  CHECK_THROWS_AS(discretize_kwh(1.0, 0, 150.0), std::runtime_error);
  CHECK_THROWS_AS(discretize_kwh(1.0, 20, 0.0), std::runtime_error);
}

TEST_CASE("discretization error stays within half a level") {
  Rng rng(99);
  for (int i = 0; i < 500; ++i) {
    const int levels = static_cast<int>(rng_int(rng, 1, 40));
    const double cap = rng_uniform(rng, 10.0, 400.0);
    const double kwh = rng_uniform(rng, -50.0, 200.0);
    const double kappa = cap / levels;
    const long lv = discretize_kwh(kwh, levels, cap);
    CHECK(std::abs(lv * kappa - kwh) <= 0.5 * kappa + 1e-9);
  }
}

TEST_CASE("shipped vehicle presets drive the physics sensibly") {
  std::ifstream in("data/presets.json");
  REQUIRE(in.good());
  const nlohmann::json j = nlohmann::json::parse(in);
  REQUIRE(j.at("presets").size() == 2);
  for (const auto& preset : j.at("presets")) {
    ArcPhysicalParams p;
    p.distance = 10000.0;
    p.speed = 25.0;
    p.drag_coefficient = preset.at("drag_coefficient").get<double>();
    p.frontal_area = preset.at("frontal_area").get<double>();
    p.rolling_resistance = preset.at("rolling_resistance").get<double>();
    p.efficiency = preset.at("driveline_efficiency").get<double>();
    const ArcCoefficients c = arc_coefficients(p);
    CHECK(c.alpha > 0.0);
    CHECK(c.beta > 0.0);
    ArcSpec arc;
    arc.alpha = c.alpha;
    arc.beta = c.beta;
    const double gvw = preset.at("gross_vehicle_weight").get<double>();
    const double draw = required_battery_energy(arc, gvw);
    CHECK(draw > 0.0);
    // a 10 km flat leg should be a modest fraction of the pack
    CHECK(draw < preset.at("battery_capacity").get<double>());
  }
}

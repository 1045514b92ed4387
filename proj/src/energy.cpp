#include "errp/energy.hpp"

#include <cmath>
#include <stdexcept>

#include "errp/instance.hpp"

namespace errp {

namespace {
constexpr double kJoulePerKwh = 3.6e6;
}

double mechanical_power(double accel, double speed, double mass,
                        const ArcPhysicalParams& p) {
  const double inertia = mass * accel * speed;
  const double grade = mass * p.gravity * std::sin(p.slope_angle) * speed;
  const double aero =
      0.5 * p.drag_coefficient * p.frontal_area * p.air_density * speed * speed * speed;
  const double rolling =
      mass * p.gravity * p.rolling_resistance * std::cos(p.slope_angle) * speed;
  return inertia + grade + aero + rolling;
}

ArcCoefficients arc_coefficients(const ArcPhysicalParams& p) {
  if (p.distance <= 0.0) throw std::runtime_error("arc_coefficients: distance must be positive");
  if (p.speed <= 0.0) throw std::runtime_error("arc_coefficients: speed must be positive");
  if (p.efficiency <= 0.0 || p.efficiency > 1.0)
    throw std::runtime_error("arc_coefficients: efficiency must be in (0, 1]");

  // Constant-speed traversal: energy = power * (distance / speed), scaled by
  // the driveline efficiency, split into the mass term and the drag term.
  ArcCoefficients c;
  const double grade_roll = std::sin(p.slope_angle) +
                            p.rolling_resistance * std::cos(p.slope_angle);
  c.alpha = p.efficiency * p.distance * p.gravity * grade_roll / kJoulePerKwh;
  c.beta = p.efficiency * p.distance * 0.5 * p.drag_coefficient *
           p.frontal_area * p.air_density * p.speed * p.speed / kJoulePerKwh;
  c.regenerative = grade_roll < 0.0;
  return c;
}

double required_battery_energy(const ArcSpec& arc, double mass) {
  return arc.alpha * mass + arc.beta;
}

double fuel_energy_from_deficit(double deficit_kwh, double efficiency) {
  if (efficiency <= 0.0) throw std::runtime_error("fuel_energy_from_deficit: efficiency must be positive");
  return deficit_kwh / efficiency;
}

long discretize_kwh(double kwh, int levels, double battery_capacity) {
  if (levels <= 0) throw std::runtime_error("discretize_kwh: levels must be positive");
  if (battery_capacity <= 0.0)
    throw std::runtime_error("discretize_kwh: battery capacity must be positive");
  return std::llround(kwh * levels / battery_capacity);
}

long discretize_energy(const ArcSpec& arc, double mass, int levels,
                       double battery_capacity) {
  return discretize_kwh(required_battery_energy(arc, mass), levels,
                        battery_capacity);
}

}  // namespace errp

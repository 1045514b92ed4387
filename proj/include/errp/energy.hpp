#pragma once

#include <string>

namespace errp {

struct ArcSpec;  // instance.hpp

// Physical description of one road link, used to derive the affine energy
// coefficients that instances carry around.
struct ArcPhysicalParams {
  double distance = 0.0;            // m
  double slope_angle = 0.0;         // rad
  double speed = 0.0;               // m/s, assumed constant over the arc
  double drag_coefficient = 0.0;    // dimensionless
  double frontal_area = 0.0;        // m^2
  double air_density = 1.2041;      // kg/m^3
  double rolling_resistance = 0.0;  // dimensionless
  double gravity = 9.81;            // m/s^2
  double efficiency = 1.0;          // tank/battery-to-wheel, in (0, 1]
};

// Affine per-arc energy model: battery draw in kWh for total mass m is
// alpha * m + beta.  `regenerative` flags a descent steep enough that the
// mass-proportional term is negative; callers decide whether to allow it.
struct ArcCoefficients {
  double alpha = 0.0;  // kWh per kg
  double beta = 0.0;   // kWh
  bool regenerative = false;
};

// Instantaneous traction power (W) at acceleration a (m/s^2), speed v (m/s),
// total mass m (kg): inertia + grade + aero drag + rolling resistance.
double mechanical_power(double accel, double speed, double mass,
                        const ArcPhysicalParams& p);

// Collapse the physics onto the affine form.  Throws if distance, speed or
// efficiency are non-positive.
ArcCoefficients arc_coefficients(const ArcPhysicalParams& p);

// Battery draw in kWh to traverse `arc` at total vehicle mass `mass` (kg).
double required_battery_energy(const ArcSpec& arc, double mass);

// Mechanical energy delivered by the combustion engine when the battery is
// short by `deficit_kwh`; the engine bypasses the battery so the electric
// driveline efficiency is paid back out.
double fuel_energy_from_deficit(double deficit_kwh, double efficiency);

// Battery draw expressed in whole battery-level units: round(r * levels / B),
// halves away from zero.  Negative values pass through for regenerative arcs.
long discretize_energy(const ArcSpec& arc, double mass, int levels,
                       double battery_capacity);

// Same rounding applied to an arbitrary energy amount.
long discretize_kwh(double kwh, int levels, double battery_capacity);

}  // namespace errp

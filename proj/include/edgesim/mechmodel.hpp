#pragma once

// Kinematic and force model of the two actuation chains.
//
// Surface axis: lead-screw stepper moving the contact frame linearly.
// Edge axis: geared stepper winding a cable on a spool; cable tension is
// amplified by a lever and opposed by a constant return spring.
//
// Everything here is pure arithmetic over immutable specs.

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "edgesim/condition.hpp"

namespace edgesim::mech {

/// A command or force outside the physical range of one axis.
class RangeError : public std::out_of_range {
 public:
  RangeError(Axis axis, const std::string& what)
      : std::out_of_range(std::string(to_string(axis)) + " axis: " + what), axis_(axis) {}
  Axis axis() const noexcept { return axis_; }

 private:
  Axis axis_;
};

struct MotorSpec {
  double step_angle_deg = 18.0;
  int steps_per_rev = 20;
  /// Linear travel per revolution; empty for rotary output.
  std::optional<double> stroke_per_rev_mm;
  double max_step_rate = 1000.0;
  double power_w = 0.76;

  /// Throws std::invalid_argument unless all fields are positive and
  /// step_angle_deg * steps_per_rev == 360.
  void validate() const;
};

struct SurfaceDriveSpec {
  MotorSpec motor{18.0, 20, 0.3, 1000.0, 0.76};
  double max_force_n = 3.18;
  double stroke_range_mm = 6.5;

  double mm_per_step() const { return *motor.stroke_per_rev_mm / motor.steps_per_rev; }
  void validate() const;
};

struct EdgeDriveSpec {
  MotorSpec motor{18.0, 20, std::nullopt, 1000.0, 0.52};
  double gear_ratio = 26.45;
  double lever_gain = 2.63;
  double spool_radius_mm = 5.0;
  double max_cable_tension_n = 2.21;
  double spring_force_n = 0.3;

  void validate() const;
};

struct Load {
  std::string label;
  double watts = 0.0;
};

struct PowerBudget {
  double battery_voltage_v = 3.7;
  double battery_capacity_mah = 2000.0;
  std::vector<Load> loads{{"surface", 0.76}, {"edge", 0.52}};

  double energy_wh() const { return battery_voltage_v * battery_capacity_mah / 1000.0; }
  void validate() const;
};

/// Every physical constant of the device.
struct MechanismConfig {
  SurfaceDriveSpec surface;
  EdgeDriveSpec edge;
  PowerBudget power;

  void validate() const;
};

double surface_steps_to_mm(std::int64_t steps, const SurfaceDriveSpec& spec);

/// Nearest step count (half away from zero). Throws RangeError when
/// |target_mm| exceeds the stroke range.
std::int64_t surface_mm_to_steps(double target_mm, const SurfaceDriveSpec& spec);

/// Output-shaft angle per motor step.
double edge_effective_step_deg(const EdgeDriveSpec& spec);

/// Cable length wound per motor step.
double edge_mm_per_step(const EdgeDriveSpec& spec);

double edge_steps_to_cable_mm(std::int64_t steps, const EdgeDriveSpec& spec);
std::int64_t edge_cable_mm_to_steps(double cable_mm, const EdgeDriveSpec& spec);

/// Net force at the edge element: lever-amplified tension minus the return
/// spring, never negative. Throws RangeError for tension outside
/// [0, max_cable_tension_n].
double edge_net_force_n(double cable_tension_n, const EdgeDriveSpec& spec);

/// Time to execute |steps| at `rate` steps per second.
double motion_duration_s(std::int64_t steps, double rate);

/// Hours of continuous operation with the named loads active.
/// Throws std::invalid_argument for an empty set or an unknown label.
double endurance_h(const PowerBudget& budget, std::span<const std::string> active);

}  // namespace edgesim::mech

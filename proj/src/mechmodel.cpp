#include "edgesim/mechmodel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace edgesim::mech {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

void MotorSpec::validate() const {
  require(step_angle_deg > 0 && steps_per_rev > 0 && max_step_rate > 0 && power_w > 0,
          "motor spec fields must be strictly positive");
  require(std::abs(step_angle_deg * steps_per_rev - 360.0) < 1e-9,
          "motor step angle x steps per revolution must equal 360 degrees");
  if (stroke_per_rev_mm) require(*stroke_per_rev_mm > 0, "stroke per revolution must be positive");
}

void SurfaceDriveSpec::validate() const {
  motor.validate();
  require(motor.stroke_per_rev_mm.has_value(), "surface motor needs a linear stroke per revolution");
  require(max_force_n > 0, "surface max force must be positive");
  require(stroke_range_mm > 0, "surface stroke range must be positive");
}

void EdgeDriveSpec::validate() const {
  motor.validate();
  require(gear_ratio > 1, "edge gear ratio must exceed 1");
  require(lever_gain > 1, "edge lever gain must exceed 1");
  require(spool_radius_mm > 0, "spool radius must be positive");
  require(max_cable_tension_n > 0, "max cable tension must be positive");
  require(spring_force_n >= 0, "spring force must be non-negative");
}

void PowerBudget::validate() const {
  require(energy_wh() > 0, "battery energy must be positive");
  for (const auto& l : loads) require(l.watts > 0, "load '" + l.label + "' must draw positive power");
}

void MechanismConfig::validate() const {
  surface.validate();
  edge.validate();
  power.validate();
}

double surface_steps_to_mm(std::int64_t steps, const SurfaceDriveSpec& spec) {
  return static_cast<double>(steps) * *spec.motor.stroke_per_rev_mm / spec.motor.steps_per_rev;
}

std::int64_t surface_mm_to_steps(double target_mm, const SurfaceDriveSpec& spec) {
  if (!std::isfinite(target_mm) || std::abs(target_mm) > spec.stroke_range_mm) {
    throw RangeError(Axis::Surface, "target " + std::to_string(target_mm) +
                                        " mm outside stroke range " +
                                        std::to_string(spec.stroke_range_mm) + " mm");
  }
  return static_cast<std::int64_t>(std::round(target_mm / spec.mm_per_step()));
}

double edge_effective_step_deg(const EdgeDriveSpec& spec) {
  return spec.motor.step_angle_deg / spec.gear_ratio;
}

double edge_mm_per_step(const EdgeDriveSpec& spec) {
  return edge_effective_step_deg(spec) * std::numbers::pi / 180.0 * spec.spool_radius_mm;
}

double edge_steps_to_cable_mm(std::int64_t steps, const EdgeDriveSpec& spec) {
  return static_cast<double>(steps) * edge_mm_per_step(spec);
}

std::int64_t edge_cable_mm_to_steps(double cable_mm, const EdgeDriveSpec& spec) {
  if (!std::isfinite(cable_mm)) throw RangeError(Axis::Edge, "non-finite cable target");
  return static_cast<std::int64_t>(std::round(cable_mm / edge_mm_per_step(spec)));
}

double edge_net_force_n(double cable_tension_n, const EdgeDriveSpec& spec) {
  if (!(cable_tension_n >= 0.0 && cable_tension_n <= spec.max_cable_tension_n)) {
    throw RangeError(Axis::Edge, "cable tension " + std::to_string(cable_tension_n) +
                                     " N outside [0, " +
                                     std::to_string(spec.max_cable_tension_n) + "] N");
  }
  return std::max(0.0, spec.lever_gain * cable_tension_n - spec.spring_force_n);
}

double motion_duration_s(std::int64_t steps, double rate) {
  if (!(rate > 0)) throw std::invalid_argument("step rate must be positive");
  return static_cast<double>(steps < 0 ? -steps : steps) / rate;
}

double endurance_h(const PowerBudget& budget, std::span<const std::string> active) {
  if (active.empty()) throw std::invalid_argument("endurance needs at least one active load");
  double watts = 0.0;
  for (const auto& label : active) {
    auto it = std::find_if(budget.loads.begin(), budget.loads.end(),
                           [&](const Load& l) { return l.label == label; });
    if (it == budget.loads.end()) throw std::invalid_argument("unknown load '" + label + "'");
    watts += it->watts;
  }
  return budget.energy_wh() / watts;
}

}  // namespace edgesim::mech

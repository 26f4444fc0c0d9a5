#pragma once

// Firmware-style virtual device: calibration, step-rate motion on both
// axes, condition presets and synthetic 6x6 FSR frames.
//
// Positions are held in integer motor steps. Commands in millimetres are
// quantized half away from zero; motion advances one step per step period
// and never overshoots. Time is simulated in microseconds and only moves
// when advance() is called.

#include <array>
#include <chrono>
#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "edgesim/condition.hpp"
#include "edgesim/config.hpp"

namespace edgesim {

using SimDuration = std::chrono::microseconds;

inline constexpr int kGridSize = 6;
inline constexpr int kCellCount = kGridSize * kGridSize;

/// One timestamped FSR sample; cells are row-major.
struct FsrFrame {
  std::int64_t t_ms = 0;
  std::array<double, kCellCount> cells{};

  double& at(int row, int col) { return cells[static_cast<std::size_t>(row * kGridSize + col)]; }
  double at(int row, int col) const { return cells[static_cast<std::size_t>(row * kGridSize + col)]; }
  double total() const;

  bool operator==(const FsrFrame&) const = default;
};

struct ConditionPreset {
  Condition label;
  double surface_target_mm;
  double edge_target_mm;
};

/// Targets for a condition in units of (a, b).
ConditionPreset preset_for(Condition c, const DeviceParams& params);

struct AxisState {
  bool calibrated = false;
  std::int64_t position_steps = 0;
  std::int64_t target_steps = 0;
  /// Time accumulated toward the next step, in microseconds.
  double phase_us = 0.0;

  bool moving() const { return position_steps != target_steps; }
};

struct DeviceState {
  AxisState surface;
  AxisState edge;
  double step_rate = 200.0;
  bool streaming = false;
  double stream_rate_hz = 10.0;
  std::int64_t stream_start_us = 0;
  std::int64_t frames_emitted = 0;
  std::int64_t clock_us = 0;

  bool moving() const { return surface.moving() || edge.moving(); }
  std::int64_t clock_ms() const { return clock_us / 1000; }
};

struct CalibrateCommand {
  Axis axis;
};
struct MoveCommand {
  std::optional<double> surface_mm;
  std::optional<double> edge_mm;
};
struct PresetCommand {
  Condition condition;
};
struct StreamCommand {
  bool enable = false;
  double rate_hz = 10.0;
};

using Command = std::variant<CalibrateCommand, MoveCommand, PresetCommand, StreamCommand>;

/// Contact forces implied by the current positions.
struct ContactForces {
  double surface_n = 0.0;
  double edge_n = 0.0;
};

class DeviceSim {
 public:
  explicit DeviceSim(SimConfig config = {});

  const SimConfig& config() const { return config_; }
  const DeviceState& state() const { return state_; }

  /// Drives the surface axis to its maximum-force end, retracts by 2a and
  /// declares that point zero. Throws DeviceError(Busy) while moving.
  void calibrate_surface();
  /// Edge counterpart of calibrate_surface, retracting by 2b.
  void calibrate_edge();

  /// Validates and applies a command atomically: either every target is
  /// accepted or the state is unchanged. Throws DeviceError.
  void apply(const Command& command);

  /// Advances simulated time by dt. Returns the frames due in (t, t + dt]
  /// when streaming; each reflects the device state at its own timestamp.
  std::vector<FsrFrame> advance(SimDuration dt);

  /// Time until both axes reach their targets with no further commands.
  SimDuration time_to_settle() const;

  double surface_mm() const;
  double edge_cable_mm() const;
  double surface_target_mm() const;
  double edge_target_mm() const;

  /// Window of accepted targets for an axis: [-retract_limit, +2] x unit.
  std::pair<double, double> window_mm(Axis axis) const;

  ContactForces contact_forces() const;

  /// Synthesizes a frame for the current state. Pure in (state, config).
  FsrFrame synth_frame() const;

 private:
  double step_period_us(Axis axis) const;
  void advance_motion(double dt_us);
  std::int64_t quantize(Axis axis, double mm) const;
  void check_target(Axis axis, double mm) const;

  SimConfig config_;
  DeviceState state_;
};

/// Frame synthesis from explicit positions; exposed for analysis tooling.
FsrFrame synthesize_frame(const SimConfig& config, double surface_mm, double edge_cable_mm,
                          std::int64_t t_ms);

/// Contact forces for explicit positions.
ContactForces contact_forces_at(const SimConfig& config, double surface_mm, double edge_cable_mm);

}  // namespace edgesim

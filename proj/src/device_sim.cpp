#include "edgesim/device_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "edgesim/errors.hpp"

namespace edgesim {

namespace {

constexpr double kWindowEps = 1e-9;

std::mt19937_64 frame_rng(std::uint64_t seed, std::int64_t t_ms) {
  const auto t = static_cast<std::uint64_t>(t_ms);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(t >> 32)};
  return std::mt19937_64(seq);
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

bool is_border(int row, int col) {
  return row == 0 || col == 0 || row == kGridSize - 1 || col == kGridSize - 1;
}

}  // namespace

double FsrFrame::total() const { return std::accumulate(cells.begin(), cells.end(), 0.0); }

ConditionPreset preset_for(Condition c, const DeviceParams& p) {
  const double a = p.a_mm;
  const double b = p.b_mm;
  switch (c) {
    case Condition::EL: return {c, a, b};
    case Condition::EH: return {c, 2 * a, 2 * b};
    case Condition::SL: return {c, a, -b};
    case Condition::SH: return {c, 2 * a, -b};
    case Condition::NC: return {c, -a, -b};
  }
  return {c, -a, -b};
}

ContactForces contact_forces_at(const SimConfig& cfg, double surface_mm, double edge_cable_mm) {
  const auto& cm = cfg.contact;
  ContactForces f;
  const double penetration = surface_mm - cm.contact_onset_mm;
  if (penetration <= 0) return f;
  f.surface_n = std::min(cm.surface_stiffness_n_per_mm * penetration, cfg.mechanism.surface.max_force_n);

  const auto& edge = cfg.mechanism.edge;
  const double protrusion = edge_cable_mm / edge.lever_gain;
  if (protrusion > 0) {
    const double tension = std::min(cm.edge_stiffness_n_per_mm * protrusion, edge.max_cable_tension_n);
    f.edge_n = mech::edge_net_force_n(tension, edge);
  }
  return f;
}

FsrFrame synthesize_frame(const SimConfig& cfg, double surface_mm, double edge_cable_mm,
                          std::int64_t t_ms) {
  const auto& cm = cfg.contact;
  const auto forces = contact_forces_at(cfg, surface_mm, edge_cable_mm);
  FsrFrame frame;
  frame.t_ms = t_ms;
  if (forces.surface_n <= 0 && forces.edge_n <= 0) return frame;

  if (forces.surface_n > 0) {
    // Isotropic bell centred on the fingerpad, normalized to unit mass.
    constexpr double centre = (kGridSize - 1) / 2.0;
    const double two_s2 = 2 * cm.surface_sigma_cells * cm.surface_sigma_cells;
    std::array<double, kCellCount> w{};
    double sum = 0;
    for (int r = 0; r < kGridSize; ++r) {
      for (int c = 0; c < kGridSize; ++c) {
        const double d2 = (r - centre) * (r - centre) + (c - centre) * (c - centre);
        w[r * kGridSize + c] = std::exp(-d2 / two_s2);
        sum += w[r * kGridSize + c];
      }
    }
    const double mass = forces.surface_n * cm.units_per_newton;
    for (int i = 0; i < kCellCount; ++i) frame.cells[i] += mass * w[i] / sum;
  }

  if (forces.edge_n > 0) {
    // Horizontal band at the aperture row, uniform along the row.
    const double two_s2 = 2 * cm.edge_sigma_rows * cm.edge_sigma_rows;
    std::array<double, kGridSize> w{};
    double sum = 0;
    for (int r = 0; r < kGridSize; ++r) {
      w[r] = std::exp(-(r - cm.aperture_row) * (r - cm.aperture_row) / two_s2);
      sum += w[r];
    }
    const double mass = forces.edge_n * cm.units_per_newton;
    for (int r = 0; r < kGridSize; ++r) {
      for (int c = 0; c < kGridSize; ++c) frame.at(r, c) += mass * w[r] / sum / kGridSize;
    }
  }

  auto rng = frame_rng(cm.rng_seed, t_ms);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (auto& v : frame.cells) v *= std::max(0.0, 1.0 + cm.noise_sigma * noise(rng));

  // Array-edge contact with the plate: one border cell reads high.
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (forces.surface_n > 0 && unit(rng) < cm.outlier_prob) {
    std::vector<double> interior;
    std::vector<int> border;
    for (int r = 0; r < kGridSize; ++r) {
      for (int c = 0; c < kGridSize; ++c) {
        if (is_border(r, c)) {
          border.push_back(r * kGridSize + c);
        } else {
          interior.push_back(frame.at(r, c));
        }
      }
    }
    std::uniform_int_distribution<std::size_t> pick(0, border.size() - 1);
    const int cell = border[pick(rng)];
    const double gain = cm.outlier_gain_min + (cm.outlier_gain_max - cm.outlier_gain_min) * unit(rng);
    frame.cells[cell] = std::max(frame.cells[cell], gain * median(std::move(interior)));
  }
  return frame;
}

DeviceSim::DeviceSim(SimConfig config) : config_(std::move(config)) {
  config_.validate();
  state_.step_rate = config_.device.step_rate;
  state_.stream_rate_hz = config_.device.stream_rate_hz;
}

double DeviceSim::step_period_us(Axis axis) const {
  double period = 1e6 / state_.step_rate;
  if (axis == Axis::Edge && config_.device.edge_gearbox_slows_step_rate) {
    period *= config_.mechanism.edge.gear_ratio;
  }
  return period;
}

double DeviceSim::surface_mm() const {
  return mech::surface_steps_to_mm(state_.surface.position_steps, config_.mechanism.surface);
}
double DeviceSim::edge_cable_mm() const {
  return mech::edge_steps_to_cable_mm(state_.edge.position_steps, config_.mechanism.edge);
}
double DeviceSim::surface_target_mm() const {
  return mech::surface_steps_to_mm(state_.surface.target_steps, config_.mechanism.surface);
}
double DeviceSim::edge_target_mm() const {
  return mech::edge_steps_to_cable_mm(state_.edge.target_steps, config_.mechanism.edge);
}

std::pair<double, double> DeviceSim::window_mm(Axis axis) const {
  const double unit = axis == Axis::Surface ? config_.device.a_mm : config_.device.b_mm;
  return {-config_.device.retract_limit * unit, DeviceParams::kExtendLimit * unit};
}

ContactForces DeviceSim::contact_forces() const {
  return contact_forces_at(config_, surface_mm(), edge_cable_mm());
}

FsrFrame DeviceSim::synth_frame() const {
  return synthesize_frame(config_, surface_mm(), edge_cable_mm(), state_.clock_ms());
}

void DeviceSim::calibrate_surface() { apply(CalibrateCommand{Axis::Surface}); }
void DeviceSim::calibrate_edge() { apply(CalibrateCommand{Axis::Edge}); }

std::int64_t DeviceSim::quantize(Axis axis, double mm) const {
  return axis == Axis::Surface ? mech::surface_mm_to_steps(mm, config_.mechanism.surface)
                               : mech::edge_cable_mm_to_steps(mm, config_.mechanism.edge);
}

void DeviceSim::check_target(Axis axis, double mm) const {
  const auto& ax = axis == Axis::Surface ? state_.surface : state_.edge;
  if (!ax.calibrated) {
    throw DeviceError(ErrorCode::NotCalibrated, std::string(to_string(axis)) + " axis is not calibrated");
  }
  if (!std::isfinite(mm)) {
    throw DeviceError(ErrorCode::BadCommand, std::string(to_string(axis)) + " target is not a finite number");
  }
  const auto [lo, hi] = window_mm(axis);
  if (mm < lo - kWindowEps || mm > hi + kWindowEps) {
    throw DeviceError(ErrorCode::OutOfRange, std::string(to_string(axis)) + " target " +
                                                 std::to_string(mm) + " mm outside [" +
                                                 std::to_string(lo) + ", " + std::to_string(hi) + "] mm");
  }
}

void DeviceSim::apply(const Command& command) {
  std::visit(
      [this](const auto& cmd) {
        using T = std::decay_t<decltype(cmd)>;
        if constexpr (std::is_same_v<T, CalibrateCommand>) {
          if (state_.moving()) throw DeviceError(ErrorCode::Busy, "cannot calibrate while moving");
          auto& ax = cmd.axis == Axis::Surface ? state_.surface : state_.edge;
          // Drive to the max-force end, retract by 2 units: that point is zero.
          ax = AxisState{true, 0, 0, 0.0};
        } else if constexpr (std::is_same_v<T, MoveCommand>) {
          if (!cmd.surface_mm && !cmd.edge_mm) throw DeviceError(ErrorCode::BadCommand, "move names no axis");
          if (cmd.surface_mm) check_target(Axis::Surface, *cmd.surface_mm);
          if (cmd.edge_mm) check_target(Axis::Edge, *cmd.edge_mm);
          if (cmd.surface_mm) state_.surface.target_steps = quantize(Axis::Surface, *cmd.surface_mm);
          if (cmd.edge_mm) state_.edge.target_steps = quantize(Axis::Edge, *cmd.edge_mm);
        } else if constexpr (std::is_same_v<T, PresetCommand>) {
          const auto p = preset_for(cmd.condition, config_.device);
          check_target(Axis::Surface, p.surface_target_mm);
          check_target(Axis::Edge, p.edge_target_mm);
          state_.surface.target_steps = quantize(Axis::Surface, p.surface_target_mm);
          state_.edge.target_steps = quantize(Axis::Edge, p.edge_target_mm);
        } else if constexpr (std::is_same_v<T, StreamCommand>) {
          if (!cmd.enable) {
            state_.streaming = false;
            return;
          }
          if (!(std::isfinite(cmd.rate_hz) && cmd.rate_hz > 0 && cmd.rate_hz <= 1000)) {
            throw DeviceError(ErrorCode::BadCommand, "stream rate must be in (0, 1000] Hz");
          }
          state_.streaming = true;
          state_.stream_rate_hz = cmd.rate_hz;
          state_.stream_start_us = state_.clock_us;
          state_.frames_emitted = 0;
        }
      },
      command);
}

void DeviceSim::advance_motion(double dt_us) {
  for (auto axis : {Axis::Surface, Axis::Edge}) {
    auto& ax = axis == Axis::Surface ? state_.surface : state_.edge;
    if (!ax.moving()) {
      ax.phase_us = 0.0;
      continue;
    }
    const double period = step_period_us(axis);
    ax.phase_us += dt_us;
    const auto due = static_cast<std::int64_t>(std::floor(ax.phase_us / period + 1e-9));
    const std::int64_t remaining = std::abs(ax.target_steps - ax.position_steps);
    if (due >= remaining) {
      ax.position_steps = ax.target_steps;
      ax.phase_us = 0.0;
    } else {
      ax.position_steps += ax.target_steps > ax.position_steps ? due : -due;
      ax.phase_us = std::max(0.0, ax.phase_us - static_cast<double>(due) * period);
    }
  }
}

std::vector<FsrFrame> DeviceSim::advance(SimDuration dt) {
  std::vector<FsrFrame> frames;
  if (dt.count() <= 0) return frames;
  const std::int64_t end = state_.clock_us + dt.count();
  while (state_.streaming) {
    const double period = 1e6 / state_.stream_rate_hz;
    const auto next = state_.stream_start_us +
                      static_cast<std::int64_t>(std::llround(static_cast<double>(state_.frames_emitted + 1) * period));
    if (next > end) break;
    advance_motion(static_cast<double>(next - state_.clock_us));
    state_.clock_us = next;
    frames.push_back(synth_frame());
    ++state_.frames_emitted;
  }
  advance_motion(static_cast<double>(end - state_.clock_us));
  state_.clock_us = end;
  return frames;
}

SimDuration DeviceSim::time_to_settle() const {
  double worst = 0.0;
  for (auto axis : {Axis::Surface, Axis::Edge}) {
    const auto& ax = axis == Axis::Surface ? state_.surface : state_.edge;
    if (!ax.moving()) continue;
    const auto remaining = static_cast<double>(std::abs(ax.target_steps - ax.position_steps));
    worst = std::max(worst, remaining * step_period_us(axis) - ax.phase_us);
  }
  return SimDuration(static_cast<std::int64_t>(std::ceil(worst)));
}

}  // namespace edgesim

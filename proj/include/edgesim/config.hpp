#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "edgesim/mechmodel.hpp"

namespace edgesim {

/// Operating parameters of the virtual device (calibration geometry, speeds).
struct DeviceParams {
  double a_mm = 0.35;  ///< surface displacement unit
  double b_mm = 1.5;   ///< edge cable displacement unit
  double step_rate = 200.0;
  /// Lower end of the command window, in multiples of a (surface) or b (edge).
  double retract_limit = 3.0;
  /// When set, the edge axis advances one effective step every
  /// gear_ratio / step_rate seconds instead of every 1 / step_rate.
  bool edge_gearbox_slows_step_rate = false;
  double stream_rate_hz = 10.0;

  /// Upper end of the window: the maximum-force position, +2a / +2b.
  static constexpr double kExtendLimit = 2.0;

  void validate() const;
};

/// Fingertip contact and FSR synthesis parameters.
struct ContactModel {
  double surface_stiffness_n_per_mm = 4.0;
  double edge_stiffness_n_per_mm = 1.5;
  double contact_onset_mm = 0.0;
  int aperture_row = 3;
  double surface_sigma_cells = 2.0;
  double edge_sigma_rows = 0.5;
  double noise_sigma = 0.05;
  double outlier_prob = 0.1;
  /// Spurious border values are drawn in [min, max] x the interior median.
  double outlier_gain_min = 8.0;
  double outlier_gain_max = 16.0;
  std::uint64_t rng_seed = 1;
  double units_per_newton = 1.0;

  void validate() const;
};

struct SimConfig {
  mech::MechanismConfig mechanism;
  DeviceParams device;
  ContactModel contact;

  void validate() const;
};

/// Parses `key = value` lines. `[section]` headers prefix later keys with
/// `section.`; `#` and `;` start comments. Unknown keys and bad values throw
/// ConfigError naming the line.
SimConfig parse_config(std::istream& in, SimConfig base = {});
SimConfig load_config(const std::filesystem::path& path, SimConfig base = {});

/// Writes every key with its current value, in a form parse_config accepts.
void write_config(std::ostream& out, const SimConfig& cfg);

}  // namespace edgesim

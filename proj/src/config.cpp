#include "edgesim/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "edgesim/errors.hpp"

namespace edgesim {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& v) {
  double out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) throw ConfigError("expected a number, got '" + v + "'");
  return out;
}

std::int64_t to_int(const std::string& v) {
  std::int64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) throw ConfigError("expected an integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("expected a boolean, got '" + v + "'");
}

using Setter = std::function<void(SimConfig&, const std::string&)>;
using Getter = std::function<std::string(const SimConfig&)>;

struct Key {
  Setter set;
  Getter get;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

template <typename Member>
Key real(Member member) {
  return {[member](SimConfig& c, const std::string& v) { std::invoke(member, c) = to_double(v); },
          [member](const SimConfig& c) { return fmt(std::invoke(member, c)); }};
}

const std::map<std::string, Key>& keys() {
  static const std::map<std::string, Key> table = {
      {"surface.step_angle_deg", real([](auto& c) -> auto& { return c.mechanism.surface.motor.step_angle_deg; })},
      {"surface.steps_per_rev",
       {[](SimConfig& c, const std::string& v) { c.mechanism.surface.motor.steps_per_rev = static_cast<int>(to_int(v)); },
        [](const SimConfig& c) { return std::to_string(c.mechanism.surface.motor.steps_per_rev); }}},
      {"surface.stroke_per_rev_mm",
       {[](SimConfig& c, const std::string& v) { c.mechanism.surface.motor.stroke_per_rev_mm = to_double(v); },
        [](const SimConfig& c) { return fmt(c.mechanism.surface.motor.stroke_per_rev_mm.value_or(0)); }}},
      {"surface.max_step_rate", real([](auto& c) -> auto& { return c.mechanism.surface.motor.max_step_rate; })},
      {"surface.power_w", real([](auto& c) -> auto& { return c.mechanism.surface.motor.power_w; })},
      {"surface.max_force_n", real([](auto& c) -> auto& { return c.mechanism.surface.max_force_n; })},
      {"surface.stroke_range_mm", real([](auto& c) -> auto& { return c.mechanism.surface.stroke_range_mm; })},
      {"edge.step_angle_deg", real([](auto& c) -> auto& { return c.mechanism.edge.motor.step_angle_deg; })},
      {"edge.steps_per_rev",
       {[](SimConfig& c, const std::string& v) { c.mechanism.edge.motor.steps_per_rev = static_cast<int>(to_int(v)); },
        [](const SimConfig& c) { return std::to_string(c.mechanism.edge.motor.steps_per_rev); }}},
      {"edge.max_step_rate", real([](auto& c) -> auto& { return c.mechanism.edge.motor.max_step_rate; })},
      {"edge.power_w", real([](auto& c) -> auto& { return c.mechanism.edge.motor.power_w; })},
      {"edge.gear_ratio", real([](auto& c) -> auto& { return c.mechanism.edge.gear_ratio; })},
      {"edge.lever_gain", real([](auto& c) -> auto& { return c.mechanism.edge.lever_gain; })},
      {"edge.spool_radius_mm", real([](auto& c) -> auto& { return c.mechanism.edge.spool_radius_mm; })},
      {"edge.max_cable_tension_n", real([](auto& c) -> auto& { return c.mechanism.edge.max_cable_tension_n; })},
      {"edge.spring_force_n", real([](auto& c) -> auto& { return c.mechanism.edge.spring_force_n; })},
      {"power.battery_voltage_v", real([](auto& c) -> auto& { return c.mechanism.power.battery_voltage_v; })},
      {"power.battery_capacity_mah", real([](auto& c) -> auto& { return c.mechanism.power.battery_capacity_mah; })},
      {"device.a_mm", real([](auto& c) -> auto& { return c.device.a_mm; })},
      {"device.b_mm", real([](auto& c) -> auto& { return c.device.b_mm; })},
      {"device.step_rate", real([](auto& c) -> auto& { return c.device.step_rate; })},
      {"device.retract_limit", real([](auto& c) -> auto& { return c.device.retract_limit; })},
      {"device.edge_gearbox_slows_step_rate",
       {[](SimConfig& c, const std::string& v) { c.device.edge_gearbox_slows_step_rate = to_bool(v); },
        [](const SimConfig& c) { return std::string(c.device.edge_gearbox_slows_step_rate ? "true" : "false"); }}},
      {"device.stream_rate_hz", real([](auto& c) -> auto& { return c.device.stream_rate_hz; })},
      {"contact.surface_stiffness_n_per_mm", real([](auto& c) -> auto& { return c.contact.surface_stiffness_n_per_mm; })},
      {"contact.edge_stiffness_n_per_mm", real([](auto& c) -> auto& { return c.contact.edge_stiffness_n_per_mm; })},
      {"contact.contact_onset_mm", real([](auto& c) -> auto& { return c.contact.contact_onset_mm; })},
      {"contact.aperture_row",
       {[](SimConfig& c, const std::string& v) { c.contact.aperture_row = static_cast<int>(to_int(v)); },
        [](const SimConfig& c) { return std::to_string(c.contact.aperture_row); }}},
      {"contact.surface_sigma_cells", real([](auto& c) -> auto& { return c.contact.surface_sigma_cells; })},
      {"contact.edge_sigma_rows", real([](auto& c) -> auto& { return c.contact.edge_sigma_rows; })},
      {"contact.noise_sigma", real([](auto& c) -> auto& { return c.contact.noise_sigma; })},
      {"contact.outlier_prob", real([](auto& c) -> auto& { return c.contact.outlier_prob; })},
      {"contact.outlier_gain_min", real([](auto& c) -> auto& { return c.contact.outlier_gain_min; })},
      {"contact.outlier_gain_max", real([](auto& c) -> auto& { return c.contact.outlier_gain_max; })},
      {"contact.rng_seed",
       {[](SimConfig& c, const std::string& v) { c.contact.rng_seed = static_cast<std::uint64_t>(to_int(v)); },
        [](const SimConfig& c) { return std::to_string(c.contact.rng_seed); }}},
      {"contact.units_per_newton", real([](auto& c) -> auto& { return c.contact.units_per_newton; })},
  };
  return table;
}

}  // namespace

void DeviceParams::validate() const {
  require(a_mm > 0 && b_mm > 0, "device a_mm and b_mm must be positive");
  require(step_rate > 0, "device step_rate must be positive");
  require(retract_limit > 0, "device retract_limit must be positive");
  require(stream_rate_hz > 0 && stream_rate_hz <= 1000, "device stream_rate_hz must be in (0, 1000]");
}

void ContactModel::validate() const {
  require(surface_stiffness_n_per_mm > 0 && edge_stiffness_n_per_mm > 0, "contact stiffnesses must be positive");
  require(aperture_row >= 0 && aperture_row <= 5, "contact aperture_row must be in [0, 5]");
  require(surface_sigma_cells > 0 && edge_sigma_rows > 0, "contact spreads must be positive");
  require(noise_sigma >= 0, "contact noise_sigma must be non-negative");
  require(outlier_prob >= 0 && outlier_prob <= 1, "contact outlier_prob must be in [0, 1]");
  require(outlier_gain_min > 0 && outlier_gain_max >= outlier_gain_min, "contact outlier gains must satisfy 0 < min <= max");
  require(units_per_newton > 0, "contact units_per_newton must be positive");
}

void SimConfig::validate() const {
  try {
    mechanism.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  device.validate();
  contact.validate();
  require(device.step_rate <= mechanism.surface.motor.max_step_rate &&
              device.step_rate <= mechanism.edge.motor.max_step_rate,
          "device step_rate exceeds a motor's max_step_rate");
  require(DeviceParams::kExtendLimit * device.a_mm <= mechanism.surface.stroke_range_mm &&
              device.retract_limit * device.a_mm <= mechanism.surface.stroke_range_mm,
          "surface calibration window exceeds the stroke range");
}

SimConfig parse_config(std::istream& in, SimConfig cfg) {
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto comment = line.find_first_of("#;");
    std::string body = trim(std::string_view(line).substr(0, comment));
    if (body.empty()) continue;
    const auto where = "line " + std::to_string(lineno) + ": ";
    if (body.front() == '[') {
      if (body.back() != ']') throw ConfigError(where + "unterminated section header");
      section = trim(std::string_view(body).substr(1, body.size() - 2));
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    std::string key = trim(std::string_view(body).substr(0, eq));
    std::string value = trim(std::string_view(body).substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (!section.empty()) key = section + "." + key;
    auto it = keys().find(key);
    if (it == keys().end()) throw ConfigError(where + "unknown key '" + key + "'");
    try {
      it->second.set(cfg, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + key + ": " + e.what());
    }
  }
  cfg.mechanism.power.loads = {{"surface", cfg.mechanism.surface.motor.power_w},
                               {"edge", cfg.mechanism.edge.motor.power_w}};
  cfg.validate();
  return cfg;
}

SimConfig load_config(const std::filesystem::path& path, SimConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  try {
    return parse_config(in, std::move(base));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_config(std::ostream& out, const SimConfig& cfg) {
  std::string section;
  for (const auto& [key, k] : keys()) {
    const auto dot = key.find('.');
    const auto sec = key.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) out << '\n';
      out << '[' << sec << "]\n";
      section = sec;
    }
    out << key.substr(dot + 1) << " = " << k.get(cfg) << '\n';
  }
}

}  // namespace edgesim

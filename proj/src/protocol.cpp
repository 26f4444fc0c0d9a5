#include "edgesim/protocol.hpp"

#include <cmath>
#include <limits>

#include <json.hpp>

namespace edgesim::protocol {

using json = nlohmann::json;

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// Bracket depth outside string literals; guards the recursive parser.
int max_nesting(std::string_view s) {
  int depth = 0;
  int worst = 0;
  bool in_string = false;
  bool escaped = false;
  for (char ch : s) {
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (ch == '\\') {
        escaped = true;
      } else if (ch == '"') {
        in_string = false;
      }
      continue;
    }
    if (ch == '"') {
      in_string = true;
    } else if (ch == '[' || ch == '{') {
      worst = std::max(worst, ++depth);
    } else if (ch == ']' || ch == '}') {
      --depth;
    }
  }
  return worst;
}

const json& field(const json& obj, const char* name) {
  auto it = obj.find(name);
  if (it == obj.end()) throw DecodeError(std::string("missing required field '") + name + "'");
  return *it;
}

double number(const json& obj, const char* name) {
  const auto& v = field(obj, name);
  if (!v.is_number()) throw DecodeError(std::string("field '") + name + "' must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw DecodeError(std::string("field '") + name + "' must be finite");
  return d;
}

std::optional<double> optional_number(const json& obj, const char* name) {
  auto it = obj.find(name);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  return number(obj, name);
}

bool boolean(const json& obj, const char* name) {
  const auto& v = field(obj, name);
  if (!v.is_boolean()) throw DecodeError(std::string("field '") + name + "' must be a boolean");
  return v.get<bool>();
}

std::string string(const json& obj, const char* name) {
  const auto& v = field(obj, name);
  if (!v.is_string()) throw DecodeError(std::string("field '") + name + "' must be a string");
  return v.get<std::string>();
}

std::int64_t integer(const json& obj, const char* name) {
  const auto& v = field(obj, name);
  if (v.is_number_unsigned()) {
    if (v.get<std::uint64_t>() > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
      throw DecodeError(std::string("field '") + name + "' out of range");
    }
    return static_cast<std::int64_t>(v.get<std::uint64_t>());
  }
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::isfinite(d) && d == std::floor(d) && std::abs(d) < 9.0e15) return static_cast<std::int64_t>(d);
  }
  throw DecodeError(std::string("field '") + name + "' must be an integer");
}

}  // namespace

std::string_view type_name(const Message& msg) {
  return std::visit(overloaded{
                        [](const Hello&) { return std::string_view("hello"); },
                        [](const Calibrate&) { return std::string_view("calibrate"); },
                        [](const Move&) { return std::string_view("move"); },
                        [](const Preset&) { return std::string_view("preset"); },
                        [](const Status&) { return std::string_view("status"); },
                        [](const State&) { return std::string_view("state"); },
                        [](const Stream&) { return std::string_view("stream"); },
                        [](const Frame&) { return std::string_view("frame"); },
                        [](const Error&) { return std::string_view("error"); },
                    },
                    msg);
}

std::string encode(const Message& msg) {
  // nlohmann::ordered_json keeps "type" first, matching the documented examples.
  nlohmann::ordered_json j;
  j["type"] = std::string(type_name(msg));
  std::visit(overloaded{
                 [&](const Hello& m) { j["version"] = m.version; },
                 [&](const Calibrate& m) { j["target"] = std::string(to_string(m.axis)); },
                 [&](const Move& m) {
                   if (m.surface_mm) j["surface_mm"] = *m.surface_mm;
                   if (m.edge_mm) j["edge_mm"] = *m.edge_mm;
                 },
                 [&](const Preset& m) { j["condition"] = std::string(to_string(m.condition)); },
                 [&](const Status&) {},
                 [&](const State& m) {
                   j["surface_mm"] = m.surface_mm;
                   j["edge_mm"] = m.edge_mm;
                   j["moving"] = m.moving;
                   j["calibrated_surface"] = m.calibrated_surface;
                   j["calibrated_edge"] = m.calibrated_edge;
                 },
                 [&](const Stream& m) {
                   j["enable"] = m.enable;
                   j["rate_hz"] = m.rate_hz;
                 },
                 [&](const Frame& m) {
                   j["t_ms"] = m.t_ms;
                   j["cells"] = m.cells;
                 },
                 [&](const Error& m) {
                   j["code"] = std::string(to_string(m.code));
                   j["detail"] = m.detail;
                 },
             },
             msg);
  return j.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace) + '\n';
}

Message decode(std::string_view line) {
  if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  if (line.size() > kMaxLineBytes) throw DecodeError("line exceeds " + std::to_string(kMaxLineBytes) + " bytes");
  if (line.find('\n') != std::string_view::npos) throw DecodeError("embedded newline");
  if (max_nesting(line) > kMaxNesting) throw DecodeError("nesting too deep");

  json j = json::parse(line.begin(), line.end(), nullptr, false);
  if (j.is_discarded()) throw DecodeError("malformed JSON");
  if (!j.is_object()) throw DecodeError("message must be a JSON object");

  const std::string type = string(j, "type");
  if (type == "hello") {
    const auto v = integer(j, "version");
    if (v < 0 || v > std::numeric_limits<int>::max()) throw DecodeError("field 'version' out of range");
    return Hello{static_cast<int>(v)};
  }
  if (type == "calibrate") {
    const auto target = string(j, "target");
    auto axis = parse_axis(target);
    if (!axis) throw DecodeError("field 'target' must be \"surface\" or \"edge\"");
    return Calibrate{*axis};
  }
  if (type == "move") return Move{optional_number(j, "surface_mm"), optional_number(j, "edge_mm")};
  if (type == "preset") {
    auto c = parse_condition(string(j, "condition"));
    if (!c) throw DecodeError("field 'condition' must be one of EL, EH, SL, SH, NC");
    return Preset{*c};
  }
  if (type == "status") return Status{};
  if (type == "state") {
    return State{number(j, "surface_mm"), number(j, "edge_mm"), boolean(j, "moving"),
                 boolean(j, "calibrated_surface"), boolean(j, "calibrated_edge")};
  }
  if (type == "stream") {
    Stream s;
    s.enable = boolean(j, "enable");
    if (auto r = optional_number(j, "rate_hz")) s.rate_hz = *r;
    return s;
  }
  if (type == "frame") {
    Frame f;
    f.t_ms = integer(j, "t_ms");
    const auto& cells = field(j, "cells");
    if (!cells.is_array() || cells.size() != kCellCount) throw DecodeError("field 'cells' must hold exactly 36 numbers");
    for (std::size_t i = 0; i < kCellCount; ++i) {
      if (!cells[i].is_number()) throw DecodeError("field 'cells' must hold exactly 36 numbers");
      const double v = cells[i].get<double>();
      if (!std::isfinite(v) || v < 0) throw DecodeError("field 'cells' values must be finite and non-negative");
      f.cells[i] = v;
    }
    return f;
  }
  if (type == "error") {
    auto code = parse_error_code(string(j, "code"));
    if (!code) throw DecodeError("field 'code' is not a known error code");
    Error e{*code, {}};
    if (auto it = j.find("detail"); it != j.end() && it->is_string()) e.detail = it->get<std::string>();
    return e;
  }
  throw DecodeError("unknown message type '" + type + "'");
}

Message decode_or_error(std::string_view line) {
  try {
    return decode(line);
  } catch (const DecodeError& e) {
    return Error{ErrorCode::Protocol, e.what()};
  } catch (const std::exception& e) {
    return Error{ErrorCode::Protocol, std::string("malformed message: ") + e.what()};
  }
}

Frame to_message(const FsrFrame& frame) { return Frame{frame.t_ms, frame.cells}; }

FsrFrame to_frame(const Frame& msg) {
  FsrFrame f;
  f.t_ms = msg.t_ms;
  f.cells = msg.cells;
  return f;
}

}  // namespace edgesim::protocol

#pragma once

// Newline-delimited JSON wire protocol between the device endpoint and its
// host. Each message is one UTF-8 JSON object on one line with a "type"
// tag; unknown extra fields are ignored on decode.

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

#include "edgesim/condition.hpp"
#include "edgesim/device_sim.hpp"
#include "edgesim/errors.hpp"

namespace edgesim::protocol {

inline constexpr int kProtocolVersion = 1;
/// Longest accepted line, excluding the terminator.
inline constexpr std::size_t kMaxLineBytes = 64 * 1024;
inline constexpr int kMaxNesting = 16;

struct Hello {
  int version = kProtocolVersion;
  bool operator==(const Hello&) const = default;
};
struct Calibrate {
  Axis axis = Axis::Surface;
  bool operator==(const Calibrate&) const = default;
};
struct Move {
  std::optional<double> surface_mm;
  std::optional<double> edge_mm;
  bool operator==(const Move&) const = default;
};
struct Preset {
  Condition condition = Condition::NC;
  bool operator==(const Preset&) const = default;
};
struct Status {
  bool operator==(const Status&) const = default;
};
struct State {
  double surface_mm = 0.0;
  double edge_mm = 0.0;
  bool moving = false;
  bool calibrated_surface = false;
  bool calibrated_edge = false;
  bool operator==(const State&) const = default;
};
struct Stream {
  bool enable = false;
  double rate_hz = 10.0;
  bool operator==(const Stream&) const = default;
};
struct Frame {
  std::int64_t t_ms = 0;
  std::array<double, kCellCount> cells{};
  bool operator==(const Frame&) const = default;
};
struct Error {
  ErrorCode code = ErrorCode::Protocol;
  std::string detail;
  bool operator==(const Error&) const = default;
};

using Message = std::variant<Hello, Calibrate, Move, Preset, Status, State, Stream, Frame, Error>;

/// Wire tag of a message ("hello", "calibrate", ...).
std::string_view type_name(const Message& msg);

/// One JSON line including the trailing '\n'.
std::string encode(const Message& msg);

/// Decode failure; always maps to an Error{PROTOCOL} reply.
class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses one line (a trailing "\n" or "\r\n" is tolerated). Throws
/// DecodeError for anything that is not a well-formed message; never
/// crashes on arbitrary bytes.
Message decode(std::string_view line);

/// Non-throwing form: malformed input becomes Error{PROTOCOL, reason}.
Message decode_or_error(std::string_view line);

Frame to_message(const FsrFrame& frame);
FsrFrame to_frame(const Frame& msg);

}  // namespace edgesim::protocol

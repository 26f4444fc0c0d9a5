#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <optional>

namespace edgesim {

/// Closed set of error codes reported by the device and the wire protocol.
enum class ErrorCode { NotCalibrated, Busy, OutOfRange, BadCommand, Protocol };

std::string_view to_string(ErrorCode code);
std::optional<ErrorCode> parse_error_code(std::string_view name);

/// Rejection of a device command; carries the protocol-visible code.
class DeviceError : public std::runtime_error {
 public:
  DeviceError(ErrorCode code, const std::string& detail)
      : std::runtime_error(detail), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Malformed configuration or uncalibrated analysis parameters.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace edgesim

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace edgesim {

inline constexpr std::string_view kDefaultAddress = "127.0.0.1:9901";
inline constexpr const char* kAddressEnvVar = "EDGESIM_ADDR";

struct Endpoint {
  std::string host;
  std::uint16_t port = 0;

  std::string str() const { return host + ":" + std::to_string(port); }
};

/// Parses `host:port`. Port 0 is accepted (ephemeral listen port).
std::optional<Endpoint> parse_endpoint(std::string_view text);

/// `flag` if given, else $EDGESIM_ADDR, else the default address.
std::string resolve_address(const std::optional<std::string>& flag);

}  // namespace edgesim

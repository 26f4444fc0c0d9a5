#include "edgesim/endpoint.hpp"

#include <charconv>
#include <cstdlib>

namespace edgesim {

std::optional<Endpoint> parse_endpoint(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos || colon == 0 || colon + 1 == text.size()) return std::nullopt;
  const auto host = text.substr(0, colon);
  const auto port_text = text.substr(colon + 1);
  unsigned port = 0;
  auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
  if (ec != std::errc{} || ptr != port_text.data() + port_text.size() || port > 65535) return std::nullopt;
  for (char ch : host) {
    if (ch == ' ' || ch == ':' || ch == '/') return std::nullopt;
  }
  return Endpoint{std::string(host), static_cast<std::uint16_t>(port)};
}

std::string resolve_address(const std::optional<std::string>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv(kAddressEnvVar); env && *env) return env;
  return std::string(kDefaultAddress);
}

}  // namespace edgesim

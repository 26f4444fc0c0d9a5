#pragma once

#include <unistd.h>

#include <chrono>
#include <string>
#include <string_view>
#include <utility>

#include "edgesim/endpoint.hpp"

namespace edgesim::net {

/// Owning file descriptor.
class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  Fd(Fd&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
  Fd& operator=(Fd&& other) noexcept {
    if (this != &other) {
      reset();
      fd_ = std::exchange(other.fd_, -1);
    }
    return *this;
  }
  ~Fd() { reset(); }

  int get() const { return fd_; }
  int release() { return std::exchange(fd_, -1); }
  explicit operator bool() const { return fd_ >= 0; }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

/// Bound, listening TCP socket. Throws std::runtime_error with errno text.
Fd listen_tcp(const Endpoint& ep);
/// Connected TCP socket; gives up after `timeout`.
Fd connect_tcp(const Endpoint& ep, std::chrono::milliseconds timeout);
std::uint16_t local_port(int fd);

/// Writes all bytes; false when the peer is gone.
bool send_all(int fd, std::string_view bytes);

}  // namespace edgesim::net

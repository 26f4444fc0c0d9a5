#include "edgesim/client.hpp"

#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <utility>

#include "socket.hpp"

namespace edgesim {

using SteadyClock = std::chrono::steady_clock;

Client Client::connect(const Endpoint& endpoint, std::chrono::milliseconds timeout) {
  Client c;
  c.timeout_ = timeout;
  try {
    c.fd_ = net::connect_tcp(endpoint, timeout).release();
  } catch (const std::runtime_error& e) {
    throw TransportError(e.what());
  }
  auto hello = c.read_message(SteadyClock::now() + timeout);
  if (!hello) throw TransportError("no hello from " + endpoint.str() + " within timeout");
  auto* h = std::get_if<protocol::Hello>(&*hello);
  if (!h) throw TransportError("server did not open with hello");
  c.server_version_ = h->version;
  return c;
}

Client::Client(Client&& other) noexcept
    : fd_(std::exchange(other.fd_, -1)),
      server_version_(other.server_version_),
      timeout_(other.timeout_),
      inbox_(std::move(other.inbox_)),
      frames_(std::move(other.frames_)) {}

Client& Client::operator=(Client&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = std::exchange(other.fd_, -1);
    server_version_ = other.server_version_;
    timeout_ = other.timeout_;
    inbox_ = std::move(other.inbox_);
    frames_ = std::move(other.frames_);
  }
  return *this;
}

Client::~Client() { close(); }

void Client::close() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

void Client::send_raw(std::string_view bytes) {
  if (fd_ < 0) throw TransportError("connection is closed");
  if (!net::send_all(fd_, bytes)) throw TransportError("send failed: connection lost");
}

std::optional<protocol::Message> Client::read_message(SteadyClock::time_point deadline) {
  for (;;) {
    if (auto nl = inbox_.find('\n'); nl != std::string::npos) {
      std::string line = inbox_.substr(0, nl);
      inbox_.erase(0, nl + 1);
      try {
        return protocol::decode(line);
      } catch (const protocol::DecodeError& e) {
        throw TransportError(std::string("garbled reply from server: ") + e.what());
      }
    }
    if (fd_ < 0) throw TransportError("connection is closed");
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - SteadyClock::now());
    if (left.count() <= 0) return std::nullopt;
    pollfd pfd{fd_, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, static_cast<int>(left.count()));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw TransportError("poll failed");
    }
    if (rc == 0) return std::nullopt;
    char buf[16384];
    const ssize_t n = ::recv(fd_, buf, sizeof buf, 0);
    if (n == 0) {
      close();
      throw TransportError("connection closed by server");
    }
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      close();
      throw TransportError("receive failed: connection lost");
    }
    inbox_.append(buf, static_cast<std::size_t>(n));
  }
}

protocol::Message Client::read_reply() {
  const auto deadline = SteadyClock::now() + timeout_;
  for (;;) {
    auto msg = read_message(deadline);
    if (!msg) throw TransportError("timed out waiting for reply");
    if (auto* f = std::get_if<protocol::Frame>(&*msg)) {
      frames_.push_back(protocol::to_frame(*f));
      continue;
    }
    return *msg;
  }
}

protocol::Message Client::request(const protocol::Message& msg) {
  send_raw(protocol::encode(msg));
  return read_reply();
}

std::vector<FsrFrame> Client::take_frames() {
  std::vector<FsrFrame> out(frames_.begin(), frames_.end());
  frames_.clear();
  return out;
}

std::optional<FsrFrame> Client::next_frame(std::chrono::milliseconds timeout) {
  const auto deadline = SteadyClock::now() + timeout;
  while (frames_.empty()) {
    auto msg = read_message(deadline);
    if (!msg) return std::nullopt;
    if (auto* f = std::get_if<protocol::Frame>(&*msg)) {
      frames_.push_back(protocol::to_frame(*f));
    } else {
      throw TransportError("unexpected '" + std::string(protocol::type_name(*msg)) + "' while waiting for frames");
    }
  }
  auto f = frames_.front();
  frames_.pop_front();
  return f;
}

}  // namespace edgesim

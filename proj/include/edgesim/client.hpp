#pragma once

// Host side of the line protocol. request() returns the first non-frame
// message after the request; frames that arrive meanwhile are buffered in
// arrival (timestamp) order and drained with take_frames()/next_frame().

#include <chrono>
#include <deque>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "edgesim/device_sim.hpp"
#include "edgesim/endpoint.hpp"
#include "edgesim/protocol.hpp"

namespace edgesim {

/// Connection-level failure (refused, closed, timed out, garbled reply);
/// distinct from a protocol Error reply.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Client {
 public:
  static constexpr std::chrono::milliseconds kDefaultTimeout{2000};

  /// Connects and consumes the server's Hello.
  static Client connect(const Endpoint& endpoint, std::chrono::milliseconds timeout = kDefaultTimeout);

  Client(Client&&) noexcept;
  Client& operator=(Client&&) noexcept;
  ~Client();

  int server_version() const { return server_version_; }
  void set_timeout(std::chrono::milliseconds timeout) { timeout_ = timeout; }

  protocol::Message request(const protocol::Message& msg);

  /// Sends raw bytes without waiting for anything.
  void send_raw(std::string_view bytes);
  /// Next non-frame message from the server.
  protocol::Message read_reply();

  std::vector<FsrFrame> take_frames();
  /// Waits up to `timeout` for one frame.
  std::optional<FsrFrame> next_frame(std::chrono::milliseconds timeout);

  void close();

 private:
  Client() = default;
  /// One decoded message, or nullopt at the deadline.
  std::optional<protocol::Message> read_message(std::chrono::steady_clock::time_point deadline);

  int fd_ = -1;
  int server_version_ = 0;
  std::chrono::milliseconds timeout_ = kDefaultTimeout;
  std::string inbox_;
  std::deque<FsrFrame> frames_;
};

}  // namespace edgesim

#pragma once

// Browser-facing bridge: an HTTP endpoint that streams JSON event lines as
// Server-Sent Events and accepts participant responses.
//
//   GET  /events    text/event-stream; every published line as `data: ...`.
//                   Session events are replayed to late subscribers; frames
//                   are live only (latest frame).
//   POST /response  {"index":<int>,"choice":"EL|EH|SL|SH","client_t_ms":<num>}
//                   -> 200 {"outcome":"accepted"} | 409 {"outcome":"out_of_phase"|"duplicate"}
//                   |  400 on malformed bodies | 404 without a response gate.
//   GET  /health    "ok"

#include <cstdint>
#include <memory>
#include <string>

#include "edgesim/endpoint.hpp"
#include "edgesim/experiment.hpp"

namespace edgesim {

class EventBridge {
 public:
  /// Binds and starts serving on a background thread. `gate` may be null
  /// (frame-relay only). Throws std::runtime_error when binding fails.
  explicit EventBridge(const Endpoint& listen, experiment::ResponseGate* gate = nullptr);
  ~EventBridge();
  EventBridge(const EventBridge&) = delete;
  EventBridge& operator=(const EventBridge&) = delete;

  std::uint16_t port() const;

  /// Publishes one JSON line (trailing newline optional). Lines whose type
  /// is "frame" replace the previous frame instead of joining the replay log.
  void publish(const std::string& json_line);

  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace edgesim

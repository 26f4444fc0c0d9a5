#pragma once

// Device endpoint: owns one DeviceSim and serves the line protocol to one
// connection at a time. Simulated time follows the wall clock, scaled by
// `time_scale`. Requests are answered in receive order; stream frames are
// written between responses as they fall due.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>

#include "edgesim/device_sim.hpp"
#include "edgesim/endpoint.hpp"
#include "edgesim/protocol.hpp"

namespace edgesim {

class BindError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ServerOptions {
  Endpoint listen{"127.0.0.1", 9901};
  /// Simulated seconds per wall-clock second.
  double time_scale = 1.0;
  /// Poll interval of the service loop.
  std::chrono::milliseconds tick{2};
  /// Called on the service thread for every message the server sends.
  std::function<void(const protocol::Message&)> observer;
};

/// Applies one decoded request to the device and returns the reply.
/// Shared by the network endpoint and in-process tests.
protocol::Message handle_request(DeviceSim& device, const protocol::Message& request);

protocol::State state_message(const DeviceSim& device);

class Server {
 public:
  /// Binds immediately; throws BindError when the address is unusable.
  Server(DeviceSim device, ServerOptions options);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  std::uint16_t port() const { return port_; }

  /// Serves until stop() is called.
  void run();
  /// Safe from any thread or a signal-driven watcher.
  void stop();

  /// Copy of the device, taken between service-loop iterations.
  DeviceSim snapshot() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::uint16_t port_ = 0;
};

}  // namespace edgesim

#include "edgesim/server.hpp"

#include <fcntl.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <optional>
#include <string_view>
#include <vector>

#include "socket.hpp"

namespace edgesim {

namespace {

using Clock = std::chrono::steady_clock;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

protocol::State state_message(const DeviceSim& device) {
  const auto& s = device.state();
  return protocol::State{device.surface_mm(), device.edge_cable_mm(), s.moving(), s.surface.calibrated,
                         s.edge.calibrated};
}

protocol::Message handle_request(DeviceSim& device, const protocol::Message& request) {
  using namespace protocol;
  auto apply = [&](const Command& cmd) -> Message {
    try {
      device.apply(cmd);
    } catch (const DeviceError& e) {
      return Error{e.code(), e.what()};
    }
    return state_message(device);
  };
  return std::visit(
      overloaded{
          [&](const Hello&) -> Message { return Hello{kProtocolVersion}; },
          [&](const Status&) -> Message { return state_message(device); },
          [&](const Calibrate& m) -> Message { return apply(CalibrateCommand{m.axis}); },
          [&](const Move& m) -> Message { return apply(MoveCommand{m.surface_mm, m.edge_mm}); },
          [&](const Preset& m) -> Message { return apply(PresetCommand{m.condition}); },
          [&](const Stream& m) -> Message { return apply(StreamCommand{m.enable, m.rate_hz}); },
          [&](const Error& m) -> Message {
            // decode_or_error already turned malformed input into this.
            if (m.code == ErrorCode::Protocol) return m;
            return Error{ErrorCode::BadCommand, "error messages are not accepted from the host"};
          },
          [&](const auto& m) -> Message {
            return Error{ErrorCode::BadCommand,
                         "'" + std::string(type_name(Message{m})) + "' is a device-to-host message"};
          },
      },
      request);
}

struct Server::Impl {
  DeviceSim device;
  ServerOptions options;
  net::Fd listener;
  net::Fd client;
  int wake_read = -1;
  int wake_write = -1;
  std::atomic<bool> stopping{false};
  mutable std::mutex device_mutex;

  std::string inbox;
  bool discarding = false;  // inside an overlong line
  Clock::time_point last_tick;
  double sim_carry_us = 0.0;

  ~Impl() {
    if (wake_read >= 0) ::close(wake_read);
    if (wake_write >= 0) ::close(wake_write);
  }

  void send(const protocol::Message& msg) {
    if (options.observer) options.observer(msg);
    if (!client) return;
    if (!net::send_all(client.get(), protocol::encode(msg))) drop_client();
  }

  void drop_client() {
    client.reset();
    inbox.clear();
    discarding = false;
    std::lock_guard lock(device_mutex);
    device.apply(StreamCommand{false, device.state().stream_rate_hz});
  }

  void advance_clock() {
    const auto now = Clock::now();
    const double wall_us = std::chrono::duration<double, std::micro>(now - last_tick).count();
    last_tick = now;
    sim_carry_us += wall_us * options.time_scale;
    const auto whole = static_cast<std::int64_t>(sim_carry_us);
    if (whole <= 0) return;
    sim_carry_us -= static_cast<double>(whole);
    std::vector<FsrFrame> frames;
    {
      std::lock_guard lock(device_mutex);
      frames = device.advance(SimDuration(whole));
    }
    for (const auto& f : frames) send(protocol::to_message(f));
  }

  void handle_line(std::string_view line) {
    advance_clock();
    const auto request = protocol::decode_or_error(line);
    protocol::Message reply;
    {
      std::lock_guard lock(device_mutex);
      reply = handle_request(device, request);
    }
    send(reply);
  }

  void read_client() {
    char buf[16384];
    const ssize_t n = ::recv(client.get(), buf, sizeof buf, 0);
    if (n == 0 || (n < 0 && errno != EINTR && errno != EAGAIN)) {
      drop_client();
      return;
    }
    if (n < 0) return;
    std::string_view chunk(buf, static_cast<std::size_t>(n));
    while (!chunk.empty() && client) {
      const auto nl = chunk.find('\n');
      if (nl == std::string_view::npos) {
        if (!discarding) inbox.append(chunk);
        if (inbox.size() > protocol::kMaxLineBytes) {
          inbox.clear();
          discarding = true;
          send(protocol::Error{ErrorCode::Protocol,
                               "line exceeds " + std::to_string(protocol::kMaxLineBytes) + " bytes"});
        }
        return;
      }
      if (discarding) {
        discarding = false;
      } else {
        inbox.append(chunk.substr(0, nl));
        std::string line;
        line.swap(inbox);
        handle_line(line);
      }
      chunk.remove_prefix(nl + 1);
    }
  }

  void accept_client() {
    net::Fd fd(::accept4(listener.get(), nullptr, nullptr, SOCK_CLOEXEC));
    if (!fd) return;
    client = std::move(fd);
    inbox.clear();
    discarding = false;
    send(protocol::Hello{protocol::kProtocolVersion});
  }
};

Server::Server(DeviceSim device, ServerOptions options) : impl_(std::make_unique<Impl>()) {
  impl_->device = std::move(device);
  impl_->options = std::move(options);
  if (!(impl_->options.time_scale > 0)) throw std::invalid_argument("time scale must be positive");
  try {
    impl_->listener = net::listen_tcp(impl_->options.listen);
  } catch (const std::runtime_error& e) {
    throw BindError(e.what());
  }
  port_ = net::local_port(impl_->listener.get());
  int fds[2];
  if (::pipe2(fds, O_CLOEXEC | O_NONBLOCK) != 0) throw std::runtime_error("cannot create wake pipe");
  impl_->wake_read = fds[0];
  impl_->wake_write = fds[1];
}

Server::~Server() = default;

void Server::stop() {
  impl_->stopping = true;
  const char byte = 1;
  [[maybe_unused]] auto n = ::write(impl_->wake_write, &byte, 1);
}

DeviceSim Server::snapshot() const {
  std::lock_guard lock(impl_->device_mutex);
  return impl_->device;
}

void Server::run() {
  auto& s = *impl_;
  s.last_tick = Clock::now();
  while (!s.stopping) {
    pollfd fds[2] = {{s.wake_read, POLLIN, 0}, {-1, POLLIN, 0}};
    fds[1].fd = s.client ? s.client.get() : s.listener.get();
    const int rc = ::poll(fds, 2, static_cast<int>(s.options.tick.count()));
    s.advance_clock();
    if (rc < 0) continue;
    if (fds[0].revents) break;
    if (!fds[1].revents) continue;
    if (s.client) {
      s.read_client();
    } else {
      s.accept_client();
    }
  }
  s.client.reset();
}

}  // namespace edgesim

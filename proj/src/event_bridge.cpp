#include "edgesim/event_bridge.hpp"

#include <atomic>
#include <condition_variable>
#include <mutex>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

namespace edgesim {

namespace {

std::string strip_newline(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

}  // namespace

struct EventBridge::Impl {
  httplib::Server server;
  std::thread thread;
  std::uint16_t port = 0;
  experiment::ResponseGate* gate = nullptr;

  std::mutex mutex;
  std::condition_variable cv;
  std::vector<std::string> retained;
  std::string latest_frame;
  std::uint64_t frame_seq = 0;
  bool stopping = false;

  struct Cursor {
    std::size_t next_retained = 0;
    std::uint64_t seen_frame = 0;
  };

  void setup_routes() {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    server.Options(".*", [](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.status = 204;
    });
    server.Get("/health", [](const httplib::Request&, httplib::Response& res) { res.set_content("ok", "text/plain"); });
    server.Get("/events", [this](const httplib::Request&, httplib::Response& res) {
      auto cursor = std::make_shared<Cursor>();
      res.set_header("Cache-Control", "no-cache");
      res.set_chunked_content_provider("text/event-stream", [this, cursor](std::size_t, httplib::DataSink& sink) {
        std::vector<std::string> out;
        {
          std::unique_lock lock(mutex);
          cv.wait_for(lock, std::chrono::milliseconds(500), [&] {
            return stopping || cursor->next_retained < retained.size() || cursor->seen_frame < frame_seq;
          });
          if (stopping) return false;
          while (cursor->next_retained < retained.size()) out.push_back(retained[cursor->next_retained++]);
          if (cursor->seen_frame < frame_seq) {
            out.push_back(latest_frame);
            cursor->seen_frame = frame_seq;
          }
        }
        if (out.empty()) {
          static constexpr char kKeepalive[] = ": keepalive\n\n";
          return sink.write(kKeepalive, sizeof kKeepalive - 1);
        }
        for (const auto& line : out) {
          const std::string chunk = "data: " + line + "\n\n";
          if (!sink.write(chunk.data(), chunk.size())) return false;
        }
        return true;
      });
    });
    server.Post("/response", [this](const httplib::Request& req, httplib::Response& res) {
      if (!gate) {
        res.status = 404;
        res.set_content(R"({"error":"no live session"})", "application/json");
        return;
      }
      auto body = nlohmann::json::parse(req.body, nullptr, false);
      auto bad = [&](const char* why) {
        res.status = 400;
        res.set_content(nlohmann::json{{"error", why}}.dump(), "application/json");
      };
      if (body.is_discarded() || !body.is_object()) return bad("body must be a JSON object");
      auto idx = body.find("index");
      auto choice = body.find("choice");
      if (idx == body.end() || !idx->is_number_integer()) return bad("missing integer 'index'");
      if (choice == body.end() || !choice->is_string()) return bad("missing string 'choice'");
      auto cond = parse_condition(choice->get<std::string>());
      if (!cond || *cond == Condition::NC) return bad("'choice' must be one of EL, EH, SL, SH");
      const auto outcome = gate->submit(idx->get<int>(), *cond);
      res.status = outcome == experiment::ResponseGate::Outcome::Accepted ? 200 : 409;
      res.set_content(nlohmann::json{{"outcome", std::string(experiment::to_string(outcome))}}.dump(),
                      "application/json");
    });
  }
};

EventBridge::EventBridge(const Endpoint& listen, experiment::ResponseGate* gate) : impl_(std::make_unique<Impl>()) {
  impl_->gate = gate;
  impl_->setup_routes();
  if (listen.port == 0) {
    const int port = impl_->server.bind_to_any_port(listen.host);
    if (port <= 0) throw std::runtime_error("ui bridge: cannot bind " + listen.host);
    impl_->port = static_cast<std::uint16_t>(port);
  } else {
    if (!impl_->server.bind_to_port(listen.host, listen.port)) {
      throw std::runtime_error("ui bridge: cannot bind " + listen.str());
    }
    impl_->port = listen.port;
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

EventBridge::~EventBridge() { stop(); }

std::uint16_t EventBridge::port() const { return impl_->port; }

void EventBridge::publish(const std::string& json_line) {
  auto line = strip_newline(json_line);
  const bool is_frame = line.rfind(R"({"type":"frame")", 0) == 0;
  {
    std::lock_guard lock(impl_->mutex);
    if (is_frame) {
      impl_->latest_frame = std::move(line);
      ++impl_->frame_seq;
    } else {
      impl_->retained.push_back(std::move(line));
    }
  }
  impl_->cv.notify_all();
}

void EventBridge::stop() {
  if (!impl_ || !impl_->thread.joinable()) return;
  {
    std::lock_guard lock(impl_->mutex);
    impl_->stopping = true;
  }
  impl_->cv.notify_all();
  impl_->server.stop();
  impl_->thread.join();
}

}  // namespace edgesim

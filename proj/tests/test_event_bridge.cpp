#include <doctest.h>

#include <httplib.h>
#include <json.hpp>

#include "edgesim/event_bridge.hpp"
#include "edgesim/experiment.hpp"
#include "edgesim/protocol.hpp"

using namespace edgesim;
using namespace edgesim::experiment;

namespace {

// Reads SSE data lines until `want` have arrived.
std::vector<std::string> read_events(std::uint16_t port, std::size_t want) {
  httplib::Client cli("127.0.0.1", port);
  cli.set_read_timeout(5, 0);
  std::string buffer;
  std::vector<std::string> events;
  cli.Get("/events", [&](const char* data, std::size_t len) {
    buffer.append(data, len);
    for (auto pos = buffer.find("\n\n"); pos != std::string::npos; pos = buffer.find("\n\n")) {
      const auto block = buffer.substr(0, pos);
      buffer.erase(0, pos + 2);
      if (block.rfind("data: ", 0) == 0) events.push_back(block.substr(6));
    }
    return events.size() < want;
  });
  return events;
}

}  // namespace

TEST_SUITE("event-bridge") {
  TEST_CASE("health and CORS") {
    EventBridge bridge(Endpoint{"127.0.0.1", 0});
    httplib::Client cli("127.0.0.1", bridge.port());
    auto res = cli.Get("/health");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(res->get_header_value("Access-Control-Allow-Origin") == "*");
  }

  TEST_CASE("session events replay; only the latest frame is relayed") {
    EventBridge bridge(Endpoint{"127.0.0.1", 0});
    bridge.publish(encode_event(TrialStart{0, 20}));
    bridge.publish(encode_event(AwaitResponse{0, 12.5}));
    protocol::Frame f1, f2;
    f1.t_ms = 100;
    f2.t_ms = 200;
    bridge.publish(protocol::encode(f1));
    bridge.publish(protocol::encode(f2));
    const auto events = read_events(bridge.port(), 3);
    REQUIRE(events.size() == 3);
    CHECK(nlohmann::json::parse(events[0])["type"] == "trial_start");
    CHECK(nlohmann::json::parse(events[1])["t0_ms"] == 12.5);
    CHECK(nlohmann::json::parse(events[2])["t_ms"] == 200);
  }

  TEST_CASE("POST /response goes through the gate") {
    ResponseGate gate;
    EventBridge bridge(Endpoint{"127.0.0.1", 0}, &gate);
    httplib::Client cli("127.0.0.1", bridge.port());
    auto post = [&](const std::string& body) { return cli.Post("/response", body, "application/json"); };

    auto early = post(R"({"index":0,"choice":"EL"})");
    REQUIRE(early);
    CHECK(early->status == 409);
    CHECK(nlohmann::json::parse(early->body)["outcome"] == "out_of_phase");

    gate.open(0);
    auto ok = post(R"({"index":0,"choice":"SH"})");
    REQUIRE(ok);
    CHECK(ok->status == 200);
    auto dup = post(R"({"index":0,"choice":"EL"})");
    REQUIRE(dup);
    CHECK(dup->status == 409);
    CHECK(nlohmann::json::parse(dup->body)["outcome"] == "duplicate");
    CHECK(gate.wait(0, std::chrono::steady_clock::now()) == Condition::SH);

    for (const char* body : {"nonsense", R"({"index":"0","choice":"EL"})", R"({"index":0,"choice":"NC"})", "[]"}) {
      auto res = post(body);
      REQUIRE(res);
      CHECK(res->status == 400);
    }
  }

  TEST_CASE("POST without a live session is 404") {
    EventBridge bridge(Endpoint{"127.0.0.1", 0});
    httplib::Client cli("127.0.0.1", bridge.port());
    auto res = cli.Post("/response", R"({"index":0,"choice":"EL"})", "application/json");
    REQUIRE(res);
    CHECK(res->status == 404);
  }
}

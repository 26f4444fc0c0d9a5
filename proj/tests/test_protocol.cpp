#include <doctest.h>

#include <cmath>
#include <random>
#include <string>
#include <thread>

#include "edgesim/client.hpp"
#include "edgesim/endpoint.hpp"
#include "edgesim/protocol.hpp"
#include "edgesim/server.hpp"
#include "test_support.hpp"

using namespace edgesim;
using namespace edgesim::protocol;
using namespace std::chrono_literals;

namespace {

template <class T>
const T& as(const Message& m) {
  REQUIRE(std::holds_alternative<T>(m));
  return std::get<T>(m);
}

ErrorCode error_code(const Message& m) { return as<Error>(m).code; }

}  // namespace

TEST_SUITE("protocol") {
  TEST_CASE("canonical encodings") {
    CHECK(encode(Status{}) == "{\"type\":\"status\"}\n");
    CHECK(encode(Preset{Condition::EL}) == "{\"type\":\"preset\",\"condition\":\"EL\"}\n");
    CHECK(encode(Hello{}) == "{\"type\":\"hello\",\"version\":1}\n");
    CHECK(encode(Calibrate{Axis::Edge}) == "{\"type\":\"calibrate\",\"target\":\"edge\"}\n");
    CHECK(encode(Move{0.35, std::nullopt}) == "{\"type\":\"move\",\"surface_mm\":0.35}\n");
    CHECK(encode(Error{ErrorCode::Busy, "x"}) == "{\"type\":\"error\",\"code\":\"BUSY\",\"detail\":\"x\"}\n");
    const auto frame = encode(Frame{});
    CHECK(frame.find('\n') == frame.size() - 1);
  }

  TEST_CASE("decode examples") {
    CHECK(decode(R"({"type":"calibrate","target":"edge"})") == Message{Calibrate{Axis::Edge}});
    CHECK(decode(R"({"type":"move","surface_mm":0.35})") == Message{Move{0.35, std::nullopt}});
    CHECK(decode("{\"type\":\"status\"}\r\n") == Message{Status{}});
    CHECK(decode(R"({"condition":"SH","type":"preset","extra":[1,2]})") == Message{Preset{Condition::SH}});
    CHECK(decode(R"({"type":"stream","enable":true})") == Message{Stream{true, 10.0}});
    CHECK(decode(R"({"type":"stream","enable":true,"rate_hz":20})") == Message{Stream{true, 20.0}});
  }

  TEST_CASE("decode errors") {
    CHECK_THROWS_WITH_AS(decode(R"({"type":"warp"})"), doctest::Contains("unknown message type"), DecodeError);
    CHECK_THROWS_WITH_AS(decode(R"({"type":"preset"})"), doctest::Contains("condition"), DecodeError);
    CHECK_THROWS_WITH_AS(decode(R"({"type":"calibrate"})"), doctest::Contains("target"), DecodeError);
    CHECK_THROWS_AS(decode(R"({"type":"preset","condition":"XX"})"), DecodeError);
    CHECK_THROWS_AS(decode("[1,2,3]"), DecodeError);
    CHECK_THROWS_AS(decode("not json"), DecodeError);
    CHECK_THROWS_AS(decode(""), DecodeError);
    CHECK_THROWS_AS(decode(R"({"type":"move","surface_mm":"0.3"})"), DecodeError);
    CHECK_THROWS_AS(decode(R"({"type":"frame","t_ms":0,"cells":[1,2]})"), DecodeError);
    CHECK_THROWS_AS(decode(R"({"type":"hello","version":18446744073709551615})"), DecodeError);
    CHECK_THROWS_AS(decode(std::string(200, '[') + std::string(200, ']')), DecodeError);
    CHECK_THROWS_AS(decode(std::string(kMaxLineBytes + 1, ' ')), DecodeError);
    CHECK(error_code(decode_or_error("{")) == ErrorCode::Protocol);
  }

  TEST_CASE("property: decode(encode(m)) == m") {
    std::mt19937_64 rng(2024);
    for (int i = 0; i < 10000; ++i) {
      const auto m = test::random_message(rng);
      const auto line = encode(m);
      REQUIRE(line.back() == '\n');
      REQUIRE(line.find('\n') == line.size() - 1);
      REQUIRE(decode(line) == m);
    }
  }

  TEST_CASE("fuzz: random lines decode to PROTOCOL errors") {
    std::mt19937_64 rng(99);
    for (int i = 0; i < 20000; ++i) {
      const auto line = test::random_line(rng);
      const auto m = decode_or_error(line);
      REQUIRE(std::holds_alternative<Error>(m));
      REQUIRE(std::get<Error>(m).code == ErrorCode::Protocol);
    }
  }

  TEST_CASE("handle_request semantics") {
    DeviceSim d;
    CHECK(handle_request(d, Status{}) == Message{State{0, 0, false, false, false}});
    CHECK(handle_request(d, Hello{7}) == Message{Hello{kProtocolVersion}});
    CHECK(error_code(handle_request(d, Preset{Condition::EL})) == ErrorCode::NotCalibrated);
    CHECK(error_code(handle_request(d, State{})) == ErrorCode::BadCommand);
    CHECK(error_code(handle_request(d, Frame{})) == ErrorCode::BadCommand);
    CHECK(error_code(handle_request(d, Error{ErrorCode::Busy, ""})) == ErrorCode::BadCommand);
    CHECK(as<State>(handle_request(d, Calibrate{Axis::Surface})).calibrated_surface);
    CHECK(as<State>(handle_request(d, Calibrate{Axis::Edge})).calibrated_edge);
    CHECK(as<State>(handle_request(d, Preset{Condition::SH})).moving);
    CHECK(error_code(handle_request(d, Calibrate{Axis::Edge})) == ErrorCode::Busy);
    d.advance(1s);
    const auto s = as<State>(handle_request(d, Status{}));
    CHECK(s.surface_mm == doctest::Approx(0.705));
    CHECK(s.edge_mm == doctest::Approx(-1.5).epsilon(0.03));
    CHECK_FALSE(s.moving);
    CHECK(error_code(handle_request(d, Move{5.0, std::nullopt})) == ErrorCode::OutOfRange);
  }

  TEST_CASE("endpoint parsing") {
    auto ep = parse_endpoint("127.0.0.1:9901");
    REQUIRE(ep);
    CHECK(ep->host == "127.0.0.1");
    CHECK(ep->port == 9901);
    CHECK(parse_endpoint("localhost:0"));
    CHECK_FALSE(parse_endpoint("bogus"));
    CHECK_FALSE(parse_endpoint("host:99999"));
    CHECK_FALSE(parse_endpoint(":80"));
    CHECK_FALSE(parse_endpoint("host:12ab"));
    CHECK(resolve_address(std::string("10.0.0.1:1")) == "10.0.0.1:1");
  }
}

TEST_SUITE("server") {
  TEST_CASE("hello on connect, status, preset, settle") {
    test::RunningServer srv(DeviceSim{}, 50.0);
    auto c = Client::connect(srv.endpoint());
    CHECK(c.server_version() == kProtocolVersion);
    CHECK(c.request(Status{}) == Message{State{0, 0, false, false, false}});
    c.request(Calibrate{Axis::Surface});
    c.request(Calibrate{Axis::Edge});
    CHECK(as<State>(c.request(Preset{Condition::SH})).moving);
    State s;
    for (int i = 0; i < 200; ++i) {
      s = as<State>(c.request(Status{}));
      if (!s.moving) break;
      std::this_thread::sleep_for(5ms);
    }
    CHECK_FALSE(s.moving);
    CHECK(s.surface_mm == doctest::Approx(0.705));
    CHECK(s.edge_mm == doctest::Approx(-1.5).epsilon(0.03));
  }

  TEST_CASE("second move while moving retargets; calibrate while moving is BUSY") {
    test::RunningServer srv(DeviceSim{}, 0.01);
    auto c = Client::connect(srv.endpoint());
    c.request(Calibrate{Axis::Surface});
    c.request(Calibrate{Axis::Edge});
    c.request(Move{0.7, std::nullopt});
    const auto second = as<State>(c.request(Move{-0.7, std::nullopt}));
    CHECK(second.moving);
    CHECK(error_code(c.request(Calibrate{Axis::Surface})) == ErrorCode::Busy);
    CHECK(srv.server().snapshot().surface_target_mm() == doctest::Approx(-0.705));
  }

  TEST_CASE("streaming delivers 10 Hz frames in order") {
    test::RunningServer srv(DeviceSim{}, 10.0);
    auto c = Client::connect(srv.endpoint());
    c.request(Stream{true, 10.0});
    std::vector<FsrFrame> frames;
    const auto until = std::chrono::steady_clock::now() + 2s;
    while (std::chrono::steady_clock::now() < until) {
      auto f = c.next_frame(200ms);
      if (!f) continue;
      frames.push_back(*f);
      // 1.0 s of simulated time after the stream started.
      if (f->t_ms >= 1000) break;
    }
    CHECK(frames.size() >= 9);
    for (std::size_t i = 1; i < frames.size(); ++i) CHECK(frames[i].t_ms > frames[i - 1].t_ms);
    c.request(Stream{false, 10.0});
  }

  TEST_CASE("malformed and overlong lines yield PROTOCOL errors; connection survives") {
    test::RunningServer srv(DeviceSim{}, 1.0);
    auto c = Client::connect(srv.endpoint());
    c.send_raw("garbage\n");
    CHECK(error_code(c.read_reply()) == ErrorCode::Protocol);
    c.send_raw(std::string(kMaxLineBytes + 10, 'x') + "\n");
    CHECK(error_code(c.read_reply()) == ErrorCode::Protocol);
    CHECK(std::holds_alternative<State>(c.request(Status{})));
  }

  TEST_CASE("request after server shutdown is a transport error") {
    auto srv = std::make_unique<test::RunningServer>(DeviceSim{}, 1.0);
    auto c = Client::connect(srv->endpoint(), 500ms);
    c.set_timeout(500ms);
    srv.reset();
    const auto t0 = std::chrono::steady_clock::now();
    CHECK_THROWS_AS(c.request(Status{}), TransportError);
    CHECK(std::chrono::steady_clock::now() - t0 < 1500ms);
  }

  TEST_CASE("connect to a closed port is a transport error") {
    std::uint16_t port;
    {
      test::RunningServer srv(DeviceSim{}, 1.0);
      port = srv.server().port();
    }
    CHECK_THROWS_AS(Client::connect(Endpoint{"127.0.0.1", port}, 300ms), TransportError);
  }

  TEST_CASE("bind conflict is a BindError") {
    test::RunningServer srv(DeviceSim{}, 1.0);
    ServerOptions opts;
    opts.listen = srv.endpoint();
    CHECK_THROWS_AS(Server(DeviceSim{}, opts), BindError);
  }
}

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "edgesim/analytics.hpp"
#include "edgesim/device_sim.hpp"
#include "edgesim/errors.hpp"

using namespace edgesim;
using namespace std::chrono_literals;

namespace {

DeviceSim calibrated(SimConfig cfg = {}) {
  DeviceSim d(std::move(cfg));
  d.calibrate_surface();
  d.calibrate_edge();
  return d;
}

void settle(DeviceSim& d) { d.advance(d.time_to_settle() + SimDuration(1)); }

DeviceSim settled_at(Condition c, SimConfig cfg = {}) {
  auto d = calibrated(std::move(cfg));
  d.apply(PresetCommand{c});
  settle(d);
  return d;
}

ErrorCode code_of(DeviceSim& d, const Command& cmd) {
  try {
    d.apply(cmd);
  } catch (const DeviceError& e) {
    return e.code();
  }
  FAIL("command unexpectedly succeeded");
  return ErrorCode::Protocol;
}

}  // namespace

TEST_SUITE("device-sim") {
  TEST_CASE("calibration establishes zero and is idempotent") {
    DeviceSim d;
    CHECK_FALSE(d.state().surface.calibrated);
    d.calibrate_surface();
    CHECK(d.state().surface.calibrated);
    CHECK(d.surface_mm() == 0.0);
    const auto first = d.state();
    d.calibrate_surface();
    CHECK(d.state().surface.position_steps == first.surface.position_steps);
    d.calibrate_edge();
    CHECK(d.state().edge.calibrated);
    CHECK(d.edge_cable_mm() == 0.0);
  }

  TEST_CASE("calibration while moving is BUSY") {
    auto d = calibrated();
    d.apply(PresetCommand{Condition::EH});
    CHECK(code_of(d, CalibrateCommand{Axis::Surface}) == ErrorCode::Busy);
  }

  TEST_CASE("NC preset parks at (-a, -b)") {
    auto d = settled_at(Condition::NC);
    CHECK(d.surface_mm() == doctest::Approx(-0.35).epsilon(0.03));
    CHECK(std::abs(d.edge_cable_mm() - -1.5) <= mech::edge_mm_per_step(d.config().mechanism.edge) / 2);
  }

  TEST_CASE("preset targets") {
    DeviceParams p;
    auto check = [&](Condition c, double s, double e) {
      const auto preset = preset_for(c, p);
      CHECK(preset.surface_target_mm == doctest::Approx(s));
      CHECK(preset.edge_target_mm == doctest::Approx(e));
    };
    check(Condition::EL, 0.35, 1.5);
    check(Condition::EH, 0.70, 3.0);
    check(Condition::SL, 0.35, -1.5);
    check(Condition::SH, 0.70, -1.5);
    check(Condition::NC, -0.35, -1.5);

    auto d = calibrated();
    d.apply(PresetCommand{Condition::EL});
    CHECK(d.surface_target_mm() == doctest::Approx(0.345));
    d.apply(PresetCommand{Condition::EH});
    CHECK(d.surface_target_mm() == doctest::Approx(0.705));
    CHECK(std::abs(d.edge_target_mm() - 3.0) <= mech::edge_mm_per_step(d.config().mechanism.edge) / 2);
  }

  TEST_CASE("guards: uncalibrated, out of range, bad command") {
    DeviceSim d;
    CHECK(code_of(d, MoveCommand{0.1, std::nullopt}) == ErrorCode::NotCalibrated);
    CHECK(code_of(d, PresetCommand{Condition::EL}) == ErrorCode::NotCalibrated);
    d.calibrate_surface();
    CHECK(code_of(d, PresetCommand{Condition::EL}) == ErrorCode::NotCalibrated);
    CHECK_NOTHROW(d.apply(MoveCommand{0.7, std::nullopt}));
    CHECK(code_of(d, MoveCommand{0.71, std::nullopt}) == ErrorCode::OutOfRange);
    CHECK(code_of(d, MoveCommand{-1.06, std::nullopt}) == ErrorCode::OutOfRange);
    CHECK(code_of(d, MoveCommand{std::nullopt, std::nullopt}) == ErrorCode::BadCommand);
    CHECK(code_of(d, StreamCommand{true, 0.0}) == ErrorCode::BadCommand);
    // Rejected commands leave targets untouched.
    CHECK(d.surface_target_mm() == doctest::Approx(0.705));
  }

  TEST_CASE("window bounds") {
    DeviceSim d;
    auto [slo, shi] = d.window_mm(Axis::Surface);
    CHECK(slo == doctest::Approx(-1.05));
    CHECK(shi == doctest::Approx(0.70));
    auto [elo, ehi] = d.window_mm(Axis::Edge);
    CHECK(elo == doctest::Approx(-4.5));
    CHECK(ehi == doctest::Approx(3.0));
  }

  TEST_CASE("surface -a to +a takes 46 steps at 200/s") {
    auto d = settled_at(Condition::NC);
    d.apply(MoveCommand{0.35, std::nullopt});
    // -23 -> +23 steps; 46 x 5 ms.
    CHECK(d.time_to_settle() == 230000us);
    d.advance(229999us);
    CHECK(d.state().surface.moving());
    d.advance(1us);
    CHECK_FALSE(d.state().surface.moving());
    CHECK(d.surface_mm() == doctest::Approx(0.345));
  }

  TEST_CASE("edge -b to +b timing, both speed readings") {
    auto d = settled_at(Condition::NC);
    d.apply(MoveCommand{std::nullopt, 1.5});
    CHECK(d.time_to_settle() == 250000us);

    SimConfig slow;
    slow.device.edge_gearbox_slows_step_rate = true;
    auto s = settled_at(Condition::NC, slow);
    s.apply(MoveCommand{std::nullopt, 1.5});
    const double secs = std::chrono::duration<double>(s.time_to_settle()).count();
    CHECK(secs == doctest::Approx(50 * 0.005 * 26.45).epsilon(1e-6));
    CHECK(secs == doctest::Approx(6.7).epsilon(0.02));
  }

  TEST_CASE("spool radius changes edge timing") {
    SimConfig cfg;
    cfg.mechanism.edge.spool_radius_mm = 2.5;
    auto d = settled_at(Condition::NC, cfg);
    d.apply(MoveCommand{std::nullopt, 1.5});
    // Half the radius: -51 -> +51 steps.
    CHECK(d.time_to_settle() == 510000us);
  }

  TEST_CASE("advance with target = position is a fixed point") {
    auto d = settled_at(Condition::SL);
    const auto before = d.state();
    d.advance(5s);
    CHECK(d.state().surface.position_steps == before.surface.position_steps);
    CHECK(d.state().edge.position_steps == before.edge.position_steps);
  }

  TEST_CASE("property: no overshoot under random tick sequences") {
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<int> tick(1, 20000);
    std::uniform_int_distribution<int> cond(0, 4);
    for (int trial = 0; trial < 200; ++trial) {
      auto d = calibrated();
      d.apply(PresetCommand{static_cast<Condition>(cond(rng))});
      auto gap = [&] {
        return std::pair{std::llabs(d.state().surface.target_steps - d.state().surface.position_steps),
                         std::llabs(d.state().edge.target_steps - d.state().edge.position_steps)};
      };
      auto prev = gap();
      auto side = [&] {
        const auto diff = d.state().surface.target_steps - d.state().surface.position_steps;
        return (diff > 0) - (diff < 0);
      };
      const int dir_s = side();
      while (d.state().moving()) {
        d.advance(SimDuration(tick(rng)));
        auto now = gap();
        REQUIRE(now.first <= prev.first);
        REQUIRE(now.second <= prev.second);
        REQUIRE((side() == dir_s || side() == 0));
        prev = now;
      }
    }
  }

  TEST_CASE("retarget while moving") {
    auto d = calibrated();
    d.apply(PresetCommand{Condition::EH});
    d.advance(50ms);
    CHECK(d.state().moving());
    CHECK_NOTHROW(d.apply(PresetCommand{Condition::NC}));
    settle(d);
    CHECK(d.surface_mm() == doctest::Approx(-0.345));
  }

  TEST_CASE("streaming cadence") {
    auto d = calibrated();
    d.apply(StreamCommand{true, 10.0});
    const auto frames = d.advance(10s);
    CHECK(frames.size() == 100);
    for (std::size_t i = 1; i < frames.size(); ++i) CHECK(frames[i].t_ms > frames[i - 1].t_ms);
    CHECK(frames.front().t_ms == 100);
    // Split advances give the same frames.
    auto e = calibrated();
    e.apply(StreamCommand{true, 10.0});
    std::vector<FsrFrame> split;
    for (int i = 0; i < 1000; ++i) {
      auto b = e.advance(10ms);
      split.insert(split.end(), b.begin(), b.end());
    }
    CHECK(split == frames);
    d.apply(StreamCommand{false, 10.0});
    CHECK(d.advance(1s).empty());
  }

  TEST_CASE("frame determinism") {
    auto a = settled_at(Condition::EH);
    auto b = settled_at(Condition::EH);
    CHECK(a.synth_frame() == b.synth_frame());
    SimConfig other;
    other.contact.rng_seed = 2;
    auto c = settled_at(Condition::EH, other);
    CHECK_FALSE(a.synth_frame() == c.synth_frame());
  }

  TEST_CASE("zero-contact law") {
    SimConfig cfg;
    for (double s : {-1.05, -0.35, -0.015, 0.0}) {
      for (double e : {-4.5, 0.0, 3.0}) {
        const auto f = synthesize_frame(cfg, s, e, 123);
        CHECK(f.total() == 0.0);
      }
    }
    auto d = settled_at(Condition::NC);
    CHECK(d.synth_frame().total() == 0.0);
  }

  TEST_CASE("contact forces follow the linear model") {
    SimConfig cfg;
    const auto sl = contact_forces_at(cfg, 0.345, -1.5);
    CHECK(sl.surface_n == doctest::Approx(4.0 * 0.345));
    CHECK(sl.edge_n == 0.0);
    const auto sh = contact_forces_at(cfg, 0.705, -1.5);
    CHECK(sh.surface_n == doctest::Approx(4.0 * 0.705));
    const auto el = contact_forces_at(cfg, 0.345, 1.5442);
    const double tension = 1.5 * 1.5442 / 2.63;
    CHECK(el.edge_n == doctest::Approx(2.63 * tension - 0.3));
    // Saturation at the surface force limit.
    CHECK(contact_forces_at(cfg, 5.0, 0).surface_n == doctest::Approx(3.18));
  }

  TEST_CASE("settled frames: surface vs edge shape") {
    SimConfig quiet;
    quiet.contact.noise_sigma = 0;
    quiet.contact.outlier_prob = 0;
    const auto sl = settled_at(Condition::SL, quiet).synth_frame();
    const auto sh = settled_at(Condition::SH, quiet).synth_frame();
    const auto eh = settled_at(Condition::EH, quiet).synth_frame();
    CHECK(sh.total() / sl.total() == doctest::Approx(0.705 / 0.345));
    CHECK(sh.total() / sl.total() == doctest::Approx(2.0).epsilon(0.03));
    CHECK(analytics::band_ratio(sh) < 0.6);
    CHECK(analytics::band_ratio(eh) >= 0.6);
    for (double v : eh.cells) CHECK(v >= 0.0);
  }

  TEST_CASE("outliers only on border cells and only in contact") {
    SimConfig cfg;
    cfg.contact.outlier_prob = 1.0;
    cfg.contact.noise_sigma = 0.0;
    SimConfig clean = cfg;
    clean.contact.outlier_prob = 0.0;
    for (std::int64_t t = 0; t < 50; ++t) {
      const auto f = synthesize_frame(cfg, 0.345, -1.5, t);
      const auto g = synthesize_frame(clean, 0.345, -1.5, t);
      int changed = 0;
      for (int r = 0; r < kGridSize; ++r) {
        for (int c = 0; c < kGridSize; ++c) {
          if (f.at(r, c) != g.at(r, c)) {
            ++changed;
            CHECK((r == 0 || c == 0 || r == 5 || c == 5));
          }
        }
      }
      CHECK(changed == 1);
    }
  }
}

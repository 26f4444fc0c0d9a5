#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "edgesim/analytics.hpp"
#include "edgesim/errors.hpp"
#include "edgesim/frame_io.hpp"

using namespace edgesim;
using namespace edgesim::analytics;

namespace {

FsrFrame uniform(double v) {
  FsrFrame f;
  f.cells.fill(v);
  return f;
}

std::vector<FsrFrame> settled_frames(Condition c, int n, SimConfig cfg = {}) {
  DeviceSim d(cfg);
  d.calibrate_surface();
  d.calibrate_edge();
  d.apply(PresetCommand{c});
  d.advance(d.time_to_settle() + SimDuration(1));
  d.apply(StreamCommand{true, 10.0});
  auto frames = d.advance(SimDuration(static_cast<std::int64_t>(n) * 100000));
  frames.resize(static_cast<std::size_t>(n));
  return frames;
}

ClassifierThresholds thresholds_from_sim() {
  return calibrate_thresholds(settled_frames(Condition::SL, 20), settled_frames(Condition::SH, 20),
                              settled_frames(Condition::EL, 20), settled_frames(Condition::EH, 20));
}

}  // namespace

TEST_SUITE("pressure-analytics") {
  TEST_CASE("mask_outliers leaves an all-equal frame unchanged") {
    const auto f = uniform(2.0);
    CHECK(mask_outliers(f) == f);
  }

  TEST_CASE("border spike replaced by neighbour median") {
    auto f = uniform(1.0);
    f.at(0, 3) = 100.0;
    f.at(1, 2) = 1.5;  // a neighbour, shifts the neighbour median
    const auto m = mask_outliers(f);
    // Neighbours of (0,3): (0,2)=1 (0,4)=1 (1,2)=1.5 (1,3)=1 (1,4)=1 -> median 1.
    CHECK(m.at(0, 3) == 1.0);
    CHECK(m.at(1, 2) == 1.5);
    auto corner = uniform(1.0);
    corner.at(5, 5) = 50.0;
    corner.at(4, 5) = 3.0;
    corner.at(5, 4) = 3.0;
    // (4,4)=1, (4,5)=3, (5,4)=3 -> median 3.
    CHECK(mask_outliers(corner).at(5, 5) == 3.0);
  }

  TEST_CASE("interior spike is preserved") {
    auto f = uniform(1.0);
    f.at(2, 3) = 100.0;
    CHECK(mask_outliers(f) == f);
  }

  TEST_CASE("property: mask_outliers idempotent") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 5000; ++i) {
      FsrFrame f;
      for (auto& c : f.cells) c = u(rng) * (rng() % 3 == 0 ? 50.0 : 1.0);
      const auto once = mask_outliers(f);
      REQUIRE(mask_outliers(once) == once);
      for (int r = 1; r < 5; ++r) {
        for (int c = 1; c < 5; ++c) REQUIRE(once.at(r, c) == f.at(r, c));
      }
    }
  }

  TEST_CASE("band ratio examples") {
    FsrFrame band;
    for (int c = 0; c < 6; ++c) {
      band.at(2, c) = 1.0;
      band.at(3, c) = 2.0;
    }
    CHECK(band_ratio(band) == 1.0);
    CHECK(band_ratio(uniform(1.0)) == 1.0 / 3.0);
    CHECK(band_ratio(uniform(1.0)) == doctest::Approx(0.333).epsilon(1e-3));
    CHECK_THROWS_AS((void)band_ratio(FsrFrame{}), FeatureError);
  }

  TEST_CASE("property: band ratio scale invariant; classify geometry scale invariant") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.01, 1.0);
    std::uniform_real_distribution<double> scale(0.1, 10.0);
    ClassifierThresholds t{1e-9, 0.6, 1.0, 1.0};
    for (int i = 0; i < 2000; ++i) {
      FsrFrame f;
      for (auto& c : f.cells) c = u(rng);
      const double s = scale(rng);
      FsrFrame g = f;
      for (auto& c : g.cells) c *= s;
      REQUIRE(band_ratio(g) == doctest::Approx(band_ratio(f)).epsilon(1e-12));
      REQUIRE(classify(g, t).geometry == classify(f, t).geometry);
    }
  }

  TEST_CASE("classify examples") {
    const auto t = thresholds_from_sim();
    CHECK(classify(FsrFrame{}, t).geometry == Geometry::NoContact);
    CHECK_FALSE(classify(FsrFrame{}, t).intensity.has_value());
    const auto sl = classify(settled_frames(Condition::SL, 1).front(), t);
    CHECK(sl.geometry == Geometry::Surface);
    CHECK(sl.intensity == Intensity::Light);
    const auto eh = classify(settled_frames(Condition::EH, 1).front(), t);
    CHECK(eh.geometry == Geometry::Edge);
    CHECK(eh.intensity == Intensity::Heavy);
    CHECK(eh.as_condition() == Condition::EH);
    CHECK(band_ratio(settled_frames(Condition::EH, 1).front()) >= 0.6);
    CHECK_THROWS_AS((void)classify(uniform(1.0), ClassifierThresholds{}), ConfigError);
  }

  TEST_CASE("calibrate thresholds") {
    std::vector<FsrFrame> light(3, uniform(10.0 / 36));
    std::vector<FsrFrame> heavy(3, uniform(20.0 / 36));
    const auto t = calibrate_thresholds(light, heavy);
    CHECK(t.surface_split == doctest::Approx(15.0));
    CHECK(t.edge_split == doctest::Approx(15.0));
    CHECK(t.contact_total_min == doctest::Approx(2.5));
    CHECK_THROWS_AS((void)calibrate_thresholds(light, light), std::invalid_argument);
    CHECK_THROWS_AS((void)calibrate_thresholds(std::vector<FsrFrame>(2, uniform(1)), heavy), std::invalid_argument);
  }

  TEST_CASE("held-out SL/SH split") {
    const auto sl = settled_frames(Condition::SL, 100);
    const auto sh = settled_frames(Condition::SH, 100);
    const std::vector<FsrFrame> sl_train(sl.begin(), sl.begin() + 50), sh_train(sh.begin(), sh.begin() + 50);
    const auto t = calibrate_thresholds(sl_train, sh_train);
    int ok = 0;
    for (int i = 50; i < 100; ++i) {
      ok += classify(sl[static_cast<std::size_t>(i)], t).intensity == Intensity::Light;
      ok += classify(sh[static_cast<std::size_t>(i)], t).intensity == Intensity::Heavy;
    }
    CHECK(ok >= 95);
  }

  TEST_CASE("evaluate fills the confusion matrix") {
    const auto t = thresholds_from_sim();
    std::vector<LabelledFrame> frames;
    for (auto c : {Condition::EL, Condition::EH, Condition::SL, Condition::SH, Condition::NC}) {
      SimConfig cfg;
      cfg.contact.rng_seed = 77;
      for (const auto& f : settled_frames(c, 30, cfg)) frames.push_back({c, f});
    }
    const auto rep = evaluate(frames, t);
    CHECK(rep.frames == 150);
    std::size_t sum = 0;
    for (const auto& row : rep.confusion) {
      for (auto v : row) sum += v;
    }
    CHECK(sum == 150);
    CHECK(rep.geometry_accuracy() >= 0.99);
    CHECK(rep.label_accuracy() >= 0.95);
  }
}

TEST_SUITE("frame-io") {
  TEST_CASE("CSV round trip is exact") {
    auto frames = settled_frames(Condition::EH, 5);
    std::stringstream ss;
    for (const auto& f : frames) write_frame_csv(ss, f);
    CHECK(read_frames_csv(ss) == frames);
  }

  TEST_CASE("truncated CSV names the offending line") {
    std::stringstream ss;
    write_frame_csv(ss, uniform(1.0));
    std::string text = ss.str();
    text.resize(text.size() - 14);
    std::istringstream in(text);
    CHECK_THROWS_WITH_AS(read_frames_csv(in, "corpus.csv"), doctest::Contains("corpus.csv:6"), FormatError);
    std::istringstream bad("t_ms=0\n1,2,3\n");
    CHECK_THROWS_WITH_AS(read_frames_csv(bad, "x.csv"), doctest::Contains("x.csv:2"), FormatError);
  }

  TEST_CASE("heatmap outputs") {
    const auto dir = std::filesystem::temp_directory_path() / "edgesim_heatmap_test";
    std::filesystem::create_directories(dir);
    const auto mean = mean_frame(settled_frames(Condition::SH, 10));
    write_heatmap_csv(dir / "h.csv", mean);
    write_heatmap_pgm(dir / "h.pgm", mean);
    std::ifstream pgm(dir / "h.pgm", std::ios::binary);
    std::string magic;
    pgm >> magic;
    CHECK(magic == "P5");
    CHECK(std::filesystem::file_size(dir / "h.pgm") > 36);
    std::ifstream csv(dir / "h.csv");
    int lines = 0;
    for (std::string l; std::getline(csv, l);) ++lines;
    CHECK(lines == 6);
    std::filesystem::remove_all(dir);
  }
}

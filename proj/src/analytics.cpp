#include "edgesim/analytics.hpp"

#include <algorithm>
#include <numeric>

#include "edgesim/errors.hpp"

namespace edgesim::analytics {

namespace {

bool is_border(int r, int c) { return r == 0 || c == 0 || r == kGridSize - 1 || c == kGridSize - 1; }

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean_total(std::span<const FsrFrame> frames) {
  double sum = 0;
  for (const auto& f : frames) sum += f.total();
  return sum / static_cast<double>(frames.size());
}

void require_samples(std::span<const FsrFrame> frames, const char* what) {
  if (frames.size() < kMinCalibrationFrames) {
    throw std::invalid_argument(std::string("need at least 3 settled ") + what + " frames, got " +
                                std::to_string(frames.size()));
  }
}

double split_between(std::span<const FsrFrame> light, std::span<const FsrFrame> heavy) {
  const double lo = mean_total(light);
  const double hi = mean_total(heavy);
  if (!(hi > lo)) throw std::invalid_argument("degenerate split: heavy mean total does not exceed light mean total");
  return 0.5 * (lo + hi);
}

int label_index(Condition c) { return static_cast<int>(c); }

}  // namespace

std::string_view to_string(Geometry g) {
  switch (g) {
    case Geometry::NoContact: return "NoContact";
    case Geometry::Surface: return "Surface";
    case Geometry::Edge: return "Edge";
  }
  return "?";
}

std::string_view to_string(Intensity i) { return i == Intensity::Light ? "Light" : "Heavy"; }

Condition ContactClass::as_condition() const {
  if (geometry == Geometry::NoContact || !intensity) return Condition::NC;
  const bool heavy = *intensity == Intensity::Heavy;
  if (geometry == Geometry::Edge) return heavy ? Condition::EH : Condition::EL;
  return heavy ? Condition::SH : Condition::SL;
}

Geometry geometry_of(Condition c) {
  switch (c) {
    case Condition::EL:
    case Condition::EH: return Geometry::Edge;
    case Condition::SL:
    case Condition::SH: return Geometry::Surface;
    case Condition::NC: return Geometry::NoContact;
  }
  return Geometry::NoContact;
}

bool ClassifierThresholds::calibrated() const {
  return contact_total_min > 0 && band_ratio_edge_min > 0 && band_ratio_edge_min < 1 && surface_split > 0 &&
         edge_split > 0;
}

double interior_median(const FsrFrame& frame) {
  std::vector<double> interior;
  interior.reserve(16);
  for (int r = 1; r < kGridSize - 1; ++r) {
    for (int c = 1; c < kGridSize - 1; ++c) interior.push_back(frame.at(r, c));
  }
  return median_of(std::move(interior));
}

FsrFrame mask_outliers(const FsrFrame& frame, double k) {
  const double threshold = k * interior_median(frame);
  std::array<bool, kCellCount> flagged{};
  for (int r = 0; r < kGridSize; ++r) {
    for (int c = 0; c < kGridSize; ++c) {
      if (is_border(r, c) && frame.at(r, c) > threshold) flagged[r * kGridSize + c] = true;
    }
  }
  FsrFrame out = frame;
  for (int r = 0; r < kGridSize; ++r) {
    for (int c = 0; c < kGridSize; ++c) {
      if (!flagged[r * kGridSize + c]) continue;
      std::vector<double> neighbours;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const int nr = r + dr;
          const int nc = c + dc;
          if ((dr == 0 && dc == 0) || nr < 0 || nc < 0 || nr >= kGridSize || nc >= kGridSize) continue;
          if (!flagged[nr * kGridSize + nc]) neighbours.push_back(frame.at(nr, nc));
        }
      }
      const double replacement = neighbours.empty() ? threshold : median_of(std::move(neighbours));
      out.at(r, c) = std::min(replacement, threshold);
    }
  }
  return out;
}

double band_ratio(const FsrFrame& frame) {
  std::array<double, kGridSize> rows{};
  for (int r = 0; r < kGridSize; ++r) {
    for (int c = 0; c < kGridSize; ++c) rows[r] += frame.at(r, c);
  }
  const double total = std::accumulate(rows.begin(), rows.end(), 0.0);
  if (!(total > 0)) throw FeatureError("band ratio is undefined for a frame with zero total pressure");
  double best = 0;
  for (int r = 0; r + kBandRows <= kGridSize; ++r) {
    double window = 0;
    for (int i = 0; i < kBandRows; ++i) window += rows[r + i];
    best = std::max(best, window);
  }
  return std::clamp(best / total, 0.0, 1.0);
}

ContactClass classify(const FsrFrame& frame, const ClassifierThresholds& t) {
  if (!t.calibrated()) throw ConfigError("classifier thresholds are not calibrated");
  const FsrFrame clean = mask_outliers(frame);
  ContactClass out;
  out.total_pressure = clean.total();
  if (out.total_pressure < t.contact_total_min) return out;
  out.band_ratio = band_ratio(clean);
  out.geometry = out.band_ratio >= t.band_ratio_edge_min ? Geometry::Edge : Geometry::Surface;
  const double split = out.geometry == Geometry::Edge ? t.edge_split : t.surface_split;
  out.intensity = out.total_pressure >= split ? Intensity::Heavy : Intensity::Light;
  return out;
}

ClassifierThresholds calibrate_thresholds(std::span<const FsrFrame> light, std::span<const FsrFrame> heavy) {
  require_samples(light, "light");
  require_samples(heavy, "heavy");
  ClassifierThresholds t;
  t.surface_split = t.edge_split = split_between(light, heavy);
  t.contact_total_min = kContactFraction * mean_total(light);
  if (!(t.contact_total_min > 0)) throw std::invalid_argument("light frames carry no pressure");
  return t;
}

ClassifierThresholds calibrate_thresholds(std::span<const FsrFrame> surface_light,
                                          std::span<const FsrFrame> surface_heavy,
                                          std::span<const FsrFrame> edge_light,
                                          std::span<const FsrFrame> edge_heavy) {
  require_samples(surface_light, "surface-light");
  require_samples(surface_heavy, "surface-heavy");
  require_samples(edge_light, "edge-light");
  require_samples(edge_heavy, "edge-heavy");
  ClassifierThresholds t;
  t.surface_split = split_between(surface_light, surface_heavy);
  t.edge_split = split_between(edge_light, edge_heavy);
  t.contact_total_min = kContactFraction * std::min(mean_total(surface_light), mean_total(edge_light));
  if (!(t.contact_total_min > 0)) throw std::invalid_argument("light frames carry no pressure");
  return t;
}

ClassificationReport evaluate(std::span<const LabelledFrame> frames, const ClassifierThresholds& thresholds) {
  ClassificationReport report;
  for (const auto& lf : frames) {
    const auto cls = classify(lf.frame, thresholds);
    const auto predicted = cls.as_condition();
    ++report.frames;
    if (cls.geometry == geometry_of(lf.label)) ++report.geometry_correct;
    if (predicted == lf.label) ++report.label_correct;
    ++report.confusion[label_index(lf.label)][label_index(predicted)];
  }
  return report;
}

}  // namespace edgesim::analytics

#pragma once

// Contact classification from FSR frames: border outlier masking, the
// 2-row band-ratio feature, and a threshold classifier into
// {NoContact, Surface, Edge} x {Light, Heavy}.

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "edgesim/condition.hpp"
#include "edgesim/device_sim.hpp"

namespace edgesim::analytics {

enum class Geometry { NoContact, Surface, Edge };
enum class Intensity { Light, Heavy };

std::string_view to_string(Geometry g);
std::string_view to_string(Intensity i);

struct ContactClass {
  Geometry geometry = Geometry::NoContact;
  std::optional<Intensity> intensity;  ///< empty iff NoContact
  double band_ratio = 0.0;
  double total_pressure = 0.0;

  /// EL/EH/SL/SH/NC label equivalent of this class.
  Condition as_condition() const;
};

struct ClassifierThresholds {
  double contact_total_min = 0.0;
  double band_ratio_edge_min = 0.60;
  /// Light/heavy split on total pressure, per geometry.
  double surface_split = 0.0;
  double edge_split = 0.0;

  bool calibrated() const;
};

/// Feature undefined for the input (e.g. band ratio of an empty frame).
class FeatureError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline constexpr double kOutlierFactor = 6.0;
inline constexpr int kBandRows = 2;

/// Median of the 16 interior cells.
double interior_median(const FsrFrame& frame);

/// Border cells above k x interior median are replaced by the median of
/// their non-flagged in-grid neighbours, capped at the threshold. Interior
/// cells are never touched. Idempotent.
FsrFrame mask_outliers(const FsrFrame& frame, double k = kOutlierFactor);

/// Largest share of total pressure inside any two adjacent rows.
/// Throws FeatureError when the frame total is not positive.
double band_ratio(const FsrFrame& frame);

/// Masks outliers, then classifies. Throws ConfigError when thresholds are
/// not calibrated.
ContactClass classify(const FsrFrame& frame, const ClassifierThresholds& thresholds);

inline constexpr std::size_t kMinCalibrationFrames = 3;
inline constexpr double kContactFraction = 0.25;

/// One split shared by both geometries: midpoint of mean light and heavy
/// totals; contact floor at a fraction of the mean light total.
/// Throws std::invalid_argument for fewer than 3 frames per class or when
/// the heavy mean does not exceed the light mean.
ClassifierThresholds calibrate_thresholds(std::span<const FsrFrame> light,
                                          std::span<const FsrFrame> heavy);

/// Per-geometry splits from settled frames of all four stimulus conditions.
ClassifierThresholds calibrate_thresholds(std::span<const FsrFrame> surface_light,
                                          std::span<const FsrFrame> surface_heavy,
                                          std::span<const FsrFrame> edge_light,
                                          std::span<const FsrFrame> edge_heavy);

/// Accuracy summary for labelled frames.
struct ClassificationReport {
  std::size_t frames = 0;
  std::size_t geometry_correct = 0;
  std::size_t label_correct = 0;
  /// rows: true label (EL, EH, SL, SH, NC); columns: predicted label.
  std::array<std::array<std::size_t, 5>, 5> confusion{};

  double geometry_accuracy() const { return frames ? double(geometry_correct) / double(frames) : 0.0; }
  double label_accuracy() const { return frames ? double(label_correct) / double(frames) : 0.0; }
};

struct LabelledFrame {
  Condition label;
  FsrFrame frame;
};

ClassificationReport evaluate(std::span<const LabelledFrame> frames, const ClassifierThresholds& thresholds);

Geometry geometry_of(Condition c);

}  // namespace edgesim::analytics

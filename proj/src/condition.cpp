#include "edgesim/condition.hpp"
#include "edgesim/errors.hpp"

namespace edgesim {

std::string_view to_string(Condition c) {
  switch (c) {
    case Condition::EL: return "EL";
    case Condition::EH: return "EH";
    case Condition::SL: return "SL";
    case Condition::SH: return "SH";
    case Condition::NC: return "NC";
  }
  return "?";
}

std::optional<Condition> parse_condition(std::string_view label) {
  for (auto c : {Condition::EL, Condition::EH, Condition::SL, Condition::SH, Condition::NC}) {
    if (label == to_string(c)) return c;
  }
  return std::nullopt;
}

std::string_view to_string(Axis a) {
  return a == Axis::Surface ? "surface" : "edge";
}

std::optional<Axis> parse_axis(std::string_view name) {
  if (name == "surface") return Axis::Surface;
  if (name == "edge") return Axis::Edge;
  return std::nullopt;
}

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotCalibrated: return "NOT_CALIBRATED";
    case ErrorCode::Busy: return "BUSY";
    case ErrorCode::OutOfRange: return "OUT_OF_RANGE";
    case ErrorCode::BadCommand: return "BAD_COMMAND";
    case ErrorCode::Protocol: return "PROTOCOL";
  }
  return "?";
}

std::optional<ErrorCode> parse_error_code(std::string_view name) {
  for (auto c : {ErrorCode::NotCalibrated, ErrorCode::Busy, ErrorCode::OutOfRange,
                 ErrorCode::BadCommand, ErrorCode::Protocol}) {
    if (name == to_string(c)) return c;
  }
  return std::nullopt;
}

}  // namespace edgesim

#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace edgesim {

/// Stimulus classes: edge/surface x light/heavy, plus the no-contact rest pose.
enum class Condition { EL, EH, SL, SH, NC };

inline constexpr std::array<Condition, 4> kStimulusConditions = {
    Condition::EL, Condition::EH, Condition::SL, Condition::SH};

std::string_view to_string(Condition c);
std::optional<Condition> parse_condition(std::string_view label);

/// Drive axes of the device.
enum class Axis { Surface, Edge };

std::string_view to_string(Axis a);
std::optional<Axis> parse_axis(std::string_view name);

}  // namespace edgesim

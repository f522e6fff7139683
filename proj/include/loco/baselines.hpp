#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "loco/pose.hpp"

namespace loco {

enum class Baseline { kZeroVelocity, kConstantVelocity, kLastObservedVelocity };

Baseline parse_baseline(std::string_view name);
std::string_view baseline_name(Baseline b);

/// Repeats the last observed pose t_f times.
std::vector<Pose> zero_velocity(std::span<const Pose> history, std::size_t t_f);
/// Rolls out each joint's mean velocity over the observed window.
std::vector<Pose> constant_velocity(std::span<const Pose> history, std::size_t t_f);
/// Rolls out each joint's last one-frame displacement.
std::vector<Pose> last_observed_velocity(std::span<const Pose> history, std::size_t t_f);
std::vector<Pose> run_baseline(Baseline b, std::span<const Pose> history, std::size_t t_f);

/// Same rules applied to a single-point track (the anchor).
std::vector<Vec2> run_baseline(Baseline b, std::span<const Vec2> history, std::size_t t_f);

}  // namespace loco

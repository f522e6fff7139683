#include "loco/baselines.hpp"

#include <stdexcept>
#include <string>

namespace loco {
namespace {

void require_history(std::size_t n, std::size_t minimum, const char* who) {
  if (n < minimum) {
    throw std::invalid_argument(std::string(who) + ": needs at least " + std::to_string(minimum) +
                                " observed frame(s), got " + std::to_string(n));
  }
}

// Velocity per joint: (to - from) / steps.
Pose velocity(const Pose& from, const Pose& to, double steps) {
  Pose v;
  for (std::size_t j = 0; j < kJointCount; ++j) {
    v[j].u = (to[j].u - from[j].u) / steps;
    v[j].v = (to[j].v - from[j].v) / steps;
  }
  return v;
}

std::vector<Pose> roll_out(const Pose& last, const Pose& vel, std::size_t t_f) {
  std::vector<Pose> out(t_f, last);
  for (std::size_t k = 0; k < t_f; ++k) {
    const double steps = static_cast<double>(k + 1);
    for (std::size_t j = 0; j < kJointCount; ++j) {
      out[k][j].u = last[j].u + vel[j].u * steps;
      out[k][j].v = last[j].v + vel[j].v * steps;
    }
  }
  return out;
}

}  // namespace

Baseline parse_baseline(std::string_view name) {
  if (name == "zero_velocity" || name == "zero-velocity") return Baseline::kZeroVelocity;
  if (name == "constant_velocity" || name == "constant-velocity") return Baseline::kConstantVelocity;
  if (name == "last_observed_velocity" || name == "last-observed-velocity") {
    return Baseline::kLastObservedVelocity;
  }
  throw std::invalid_argument("unknown baseline '" + std::string(name) + "'");
}

std::string_view baseline_name(Baseline b) {
  switch (b) {
    case Baseline::kZeroVelocity: return "zero_velocity";
    case Baseline::kConstantVelocity: return "constant_velocity";
    case Baseline::kLastObservedVelocity: return "last_observed_velocity";
  }
  return "?";
}

std::vector<Pose> zero_velocity(std::span<const Pose> history, std::size_t t_f) {
  require_history(history.size(), 1, "zero_velocity");
  return std::vector<Pose>(t_f, history.back());
}

std::vector<Pose> constant_velocity(std::span<const Pose> history, std::size_t t_f) {
  require_history(history.size(), 2, "constant_velocity");
  const double steps = static_cast<double>(history.size() - 1);
  return roll_out(history.back(), velocity(history.front(), history.back(), steps), t_f);
}

std::vector<Pose> last_observed_velocity(std::span<const Pose> history, std::size_t t_f) {
  require_history(history.size(), 2, "last_observed_velocity");
  return roll_out(history.back(), velocity(history[history.size() - 2], history.back(), 1.0), t_f);
}

std::vector<Pose> run_baseline(Baseline b, std::span<const Pose> history, std::size_t t_f) {
  switch (b) {
    case Baseline::kZeroVelocity: return zero_velocity(history, t_f);
    case Baseline::kConstantVelocity: return constant_velocity(history, t_f);
    case Baseline::kLastObservedVelocity: return last_observed_velocity(history, t_f);
  }
  throw std::invalid_argument("unknown baseline");
}

std::vector<Vec2> run_baseline(Baseline b, std::span<const Vec2> history, std::size_t t_f) {
  std::vector<Pose> poses(history.size());
  for (std::size_t t = 0; t < history.size(); ++t) {
    for (auto& k : poses[t].joints) k = {history[t].u, history[t].v, 1.0};
  }
  const auto out = run_baseline(b, std::span<const Pose>(poses), t_f);
  std::vector<Vec2> track;
  track.reserve(out.size());
  for (const Pose& p : out) track.push_back({p[0].u, p[0].v});
  return track;
}

}  // namespace loco

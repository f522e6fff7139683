#pragma once

#include <array>
#include <vector>

#include "loco/pose.hpp"

namespace loco {

inline constexpr std::size_t kLocalJointCount = kJointCount - 1;

/// Anchor-joint track with the per-frame signals the global forecaster reads.
struct GlobalStream {
  std::vector<Vec2> anchor;
  std::vector<double> confidence;
  std::vector<double> depth;
  std::vector<TransformSE3> transforms;

  std::size_t size() const { return anchor.size(); }
  friend bool operator==(const GlobalStream&, const GlobalStream&) = default;
};

/// Offsets of the 24 non-anchor joints from the anchor, in pixels. Index k
/// maps to BODY-25 joint local_to_joint(k).
struct LocalFrame {
  std::array<Vec2, kLocalJointCount> offset{};
  std::array<double, kLocalJointCount> confidence{};
  friend bool operator==(const LocalFrame&, const LocalFrame&) = default;
};

struct LocalStream {
  std::vector<LocalFrame> frames;
  std::size_t size() const { return frames.size(); }
  friend bool operator==(const LocalStream&, const LocalStream&) = default;
};

struct StreamPair {
  GlobalStream global;
  LocalStream local;
};

constexpr std::size_t local_to_joint(std::size_t k) { return k < kAnchorJoint ? k : k + 1; }

enum class MissingJoints { kReject, kAllow };

/// Splits poses into the anchor track and anchor-relative offsets. With
/// MissingJoints::kReject (the default) any joint with c == 0 is an error;
/// kAllow decomposes raw detections, giving an offset of (0, 0) with
/// confidence 0 wherever the joint or the anchor is missing.
StreamPair decompose(const LocomotionSequence& seq, MissingJoints missing = MissingJoints::kReject);
/// Pose-only variant; depth and transforms of the global stream are left empty.
StreamPair decompose(std::span<const Pose> poses, MissingJoints missing = MissingJoints::kReject);

/// Inverse of decompose on completed sequences: anchor = global,
/// joint i = global + local offset i. Confidences are carried through.
std::vector<Pose> recombine(const GlobalStream& global, const LocalStream& local);
std::vector<Pose> recombine(std::span<const Vec2> anchor, const LocalStream& local);

}  // namespace loco

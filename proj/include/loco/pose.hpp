#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "loco/transform.hpp"

namespace loco {

/// BODY-25 keypoint layout.
inline constexpr std::size_t kJointCount = 25;
/// Neck; the anchor of the global stream.
inline constexpr std::size_t kAnchorJoint = 1;
inline constexpr double kDefaultConfidenceThreshold = 0.25;

/// Keypoint coordinates produced by this library lie on a 2^-16 pixel
/// lattice. Differences and sums of lattice values below 2^36 px are exact in
/// double precision, which makes decompose/recombine an exact round trip.
inline constexpr double kCoordinateQuantum = 1.0 / 65536.0;
double snap_to_lattice(double x);

enum Body25 : std::size_t {
  kNose = 0, kNeck, kRShoulder, kRElbow, kRWrist, kLShoulder, kLElbow, kLWrist, kMidHip,
  kRHip, kRKnee, kRAnkle, kLHip, kLKnee, kLAnkle, kREye, kLEye, kREar, kLEar,
  kLBigToe, kLSmallToe, kLHeel, kRBigToe, kRSmallToe, kRHeel,
};

inline constexpr std::array<std::pair<std::size_t, std::size_t>, 24> kBody25Edges{{
    {1, 8}, {1, 2}, {1, 5}, {2, 3}, {3, 4}, {5, 6}, {6, 7}, {8, 9},
    {9, 10}, {10, 11}, {8, 12}, {12, 13}, {13, 14}, {1, 0}, {0, 15}, {15, 17},
    {0, 16}, {16, 18}, {14, 19}, {19, 20}, {14, 21}, {11, 22}, {22, 23}, {11, 24},
}};

struct Vec2 {
  double u = 0.0;
  double v = 0.0;
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

/// Image-space detection. A missing joint is exactly c = 0 at (0, 0).
struct Keypoint {
  double u = 0.0;
  double v = 0.0;
  double c = 0.0;

  bool missing() const { return c == 0.0; }
  Vec2 position() const { return {u, v}; }
  friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

struct Pose {
  std::array<Keypoint, kJointCount> joints{};

  Keypoint& operator[](std::size_t i) { return joints[i]; }
  const Keypoint& operator[](std::size_t i) const { return joints[i]; }
  const Keypoint& anchor() const { return joints[kAnchorJoint]; }
  friend bool operator==(const Pose&, const Pose&) = default;
};

/// Time-ordered poses of one pedestrian with the anchor's scene depth and the
/// chained camera transform from the first frame to each frame.
struct LocomotionSequence {
  std::vector<Pose> frames;
  std::vector<double> anchor_depth;
  std::vector<TransformSE3> transforms;
  std::size_t t_p = 0;
  std::size_t t_f = 0;
  double frame_width = 1280.0;
  double frame_height = 720.0;

  std::size_t size() const { return frames.size(); }
  /// Throws std::invalid_argument if the per-frame arrays disagree, a depth
  /// is not positive, or transforms[0] is not the identity.
  void validate() const;
  /// Frames [begin, end) with their depth and transforms; transforms are
  /// re-based so the first retained frame carries the identity.
  LocomotionSequence window(std::size_t begin, std::size_t end) const;
  friend bool operator==(const LocomotionSequence&, const LocomotionSequence&) = default;
};

/// Poses whose every joint has c > alpha_c.
std::vector<Pose> confidence_filter(std::span<const Pose> poses,
                                    double alpha_c = kDefaultConfidenceThreshold);
bool all_confident(const Pose& pose, double alpha_c);

enum class KdeNorm { kL2, kL1 };

/// Keypoint displacement error: per-frame sum over joints of the keypoint
/// distance, averaged over frames. Throws std::invalid_argument on length
/// mismatch or empty input.
double kde(std::span<const Pose> pred, std::span<const Pose> truth, KdeNorm norm = KdeNorm::kL2);
/// kde / 25.
double mean_kde(std::span<const Pose> pred, std::span<const Pose> truth,
                KdeNorm norm = KdeNorm::kL2);
/// Single-point tracks (the global stream, d = 1); kde and mean_kde coincide.
double kde(std::span<const Vec2> pred, std::span<const Vec2> truth, KdeNorm norm = KdeNorm::kL2);

}  // namespace loco

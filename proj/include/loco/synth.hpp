#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "loco/pose.hpp"
#include "loco/transform.hpp"

namespace loco {

/// Left-to-right product steps[0] * steps[1] * ... as 4x4 homogeneous
/// matrices, with the rotation block projected back onto SO(3) after every
/// multiplication. Throws std::invalid_argument on an empty list or a step
/// whose rotation is off SO(3) by more than `tolerance`.
TransformSE3 chain_transforms(std::span<const TransformSE3> steps, double tolerance = 1e-6);

struct Intrinsics {
  double fx = 1000.0;
  double fy = 1000.0;
  double cx = 640.0;
  double cy = 360.0;
  double width = 1280.0;
  double height = 720.0;
};

/// Segment lengths of the kinematic walker, meters.
struct Skeleton {
  double torso = 0.52;          // mid-hip to neck
  double neck_to_nose = 0.22;
  double shoulder_half = 0.19;
  double hip_half = 0.10;
  double upper_arm = 0.30;
  double forearm = 0.27;
  double thigh = 0.45;
  double shin = 0.43;
  double foot = 0.20;

  void validate() const;
};

/// Root translation along a heading on the ground plane plus sinusoidal limb
/// swings about the parent joints. World frame is the first camera frame:
/// x right, y down, z forward; the ground plane is y = ground_y.
struct WalkerConfig {
  double speed = 1.3;            // m/s
  double heading = 0.0;          // rad, 0 walks along +z, pi/2 along +x
  double start_x = 0.0;
  double start_z = 10.0;
  double ground_y = 1.4;
  Skeleton skeleton;
  double gait_frequency = 0.9;   // Hz
  double phase = 0.0;
  double hip_swing = 0.45;       // rad
  double knee_flex = 0.6;        // rad
  double arm_swing = 0.35;       // rad
  double elbow_flex = 0.4;       // rad
  double bob = 0.02;             // m

  void validate() const;
  /// World-space joints at time t seconds, BODY-25 order.
  std::array<Vec3, kJointCount> joints_at(double t) const;
};

/// Ego-vehicle camera: moves along its own forward axis while yawing.
struct CameraPath {
  double forward_speed = 0.0;  // m/s
  double lateral_speed = 0.0;  // m/s, along the camera's x axis
  double yaw_rate = 0.0;       // rad/s
  double yaw_accel = 0.0;      // rad/s^2
  double fps = 30.0;

  /// World-to-camera transform at time t; identity at t = 0.
  TransformSE3 world_to_camera(double t) const;
};

class SceneRejected : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Noise-free sequence: every joint projected with confidence 1, the true
/// anchor depth and the true chained transforms. Throws SceneRejected if a
/// joint falls within 0.1 m of the camera plane or behind it.
LocomotionSequence generate_scene(const WalkerConfig& walker, const CameraPath& camera,
                                  const Intrinsics& intrinsics, std::size_t frame_count);

/// Detector/egomotion noise model of the annotator.
struct NoiseConfig {
  double dropout = 0.1;              // per-joint probability of a missed detection
  double jitter_sigma = 3.0;         // px, per coordinate
  double confidence_cap = 12.0;      // px; c = clamp(1 - |jitter| / cap, 0, 1)
  double rotation_jitter = 0.002;    // rad per chained step, per axis
  double translation_jitter = 0.01;  // m per chained step, per axis
  double depth_sigma = 0.05;         // relative

  void validate() const;
  bool transform_noise() const { return rotation_jitter > 0.0 || translation_jitter > 0.0; }
};

/// Drops, jitters and re-scores keypoints, perturbs depth multiplicatively and
/// re-chains per-step transforms after perturbing each step, so egomotion
/// drift accumulates with chain length.
LocomotionSequence annotate_noisy(const LocomotionSequence& truth, const NoiseConfig& noise,
                                  std::uint64_t seed);

enum class ScenePreset { kDefault, kCameraHeavy };
ScenePreset parse_scene_preset(const std::string& name);
const char* scene_preset_name(ScenePreset p);

struct SampledScene {
  WalkerConfig walker;
  CameraPath camera;
  std::uint64_t seed = 0;
  std::size_t attempts = 0;
};

/// Draws a walker and camera path from the preset's ranges until the whole
/// pedestrian stays inside the frame for all frames.
SampledScene sample_scene(ScenePreset preset, const Intrinsics& intrinsics,
                          std::size_t frame_count, std::uint64_t seed);

struct SyntheticRecord {
  std::string id;
  LocomotionSequence truth;
  LocomotionSequence noisy;
  SampledScene scene;
};

/// `count` independent scenes; scene i uses its own stream derived from
/// (seed, i), so records can be generated in any order.
std::vector<SyntheticRecord> generate_dataset(std::size_t count, std::size_t t_p, std::size_t t_f,
                                              ScenePreset preset, const NoiseConfig& noise,
                                              const Intrinsics& intrinsics, std::uint64_t seed,
                                              const std::string& id_prefix = "ped");

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace loco

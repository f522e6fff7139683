#include "loco/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace loco {
namespace {

Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
Vec3 operator*(const Vec3& a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

TransformSE3 reproject(const TransformSE3& t) {
  if (t.rigidity_error() <= 1e-14) return t;
  return TransformSE3::from_rt(nearest_rotation(t.rotation()), t.translation());
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 finalizer over the pair.
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

TransformSE3 chain_transforms(std::span<const TransformSE3> steps, double tolerance) {
  if (steps.empty()) throw std::invalid_argument("chain_transforms: empty chain");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (steps[i].rigidity_error() > tolerance) {
      throw std::invalid_argument("chain_transforms: step " + std::to_string(i) +
                                  " is not a rigid transform");
    }
  }
  TransformSE3 acc = steps.front();
  for (std::size_t i = 1; i < steps.size(); ++i) acc = reproject(acc * steps[i]);
  return acc;
}

// ---------------------------------------------------------------------------
// Walker and camera

void Skeleton::validate() const {
  for (double v : {torso, neck_to_nose, shoulder_half, hip_half, upper_arm, forearm, thigh, shin,
                   foot}) {
    require(v > 0.0, "skeleton segment lengths must be positive");
  }
}

void WalkerConfig::validate() const {
  skeleton.validate();
  require(speed >= 0.0, "walker speed must be non-negative");
  require(gait_frequency > 0.0, "gait frequency must be positive");
  for (double a : {hip_swing, knee_flex, arm_swing, elbow_flex, bob}) {
    require(a >= 0.0, "swing amplitudes must be non-negative");
  }
}

std::array<Vec3, kJointCount> WalkerConfig::joints_at(double t) const {
  const Skeleton& s = skeleton;
  const Vec3 fwd{std::sin(heading), 0.0, std::cos(heading)};
  const Vec3 up{0.0, -1.0, 0.0};
  const Vec3 down{0.0, 1.0, 0.0};
  const Vec3 right{std::cos(heading), 0.0, -std::sin(heading)};
  const double w = 2.0 * std::numbers::pi * gait_frequency;
  const double psi_r = w * t + phase;

  const Vec3 ground = Vec3{start_x, ground_y, start_z} + fwd * (speed * t);
  const Vec3 root = ground + up * (s.thigh + s.shin + 0.08 + bob * std::cos(2.0 * psi_r));
  const Vec3 neck = root + up * s.torso;
  const Vec3 nose = neck + up * (0.8 * s.neck_to_nose) + fwd * 0.09;

  std::array<Vec3, kJointCount> j{};
  j[kMidHip] = root;
  j[kNeck] = neck;
  j[kNose] = nose;

  auto limb = [&](double angle) { return down * std::cos(angle) + fwd * std::sin(angle); };

  struct Side {
    double sign;
    double psi;
    std::size_t shoulder, elbow, wrist, hip, knee, ankle, eye, ear, big_toe, small_toe, heel;
  };
  const Side sides[2] = {
      {1.0, psi_r, kRShoulder, kRElbow, kRWrist, kRHip, kRKnee, kRAnkle, kREye, kREar, kRBigToe,
       kRSmallToe, kRHeel},
      {-1.0, psi_r + std::numbers::pi, kLShoulder, kLElbow, kLWrist, kLHip, kLKnee, kLAnkle, kLEye,
       kLEar, kLBigToe, kLSmallToe, kLHeel},
  };
  for (const Side& side : sides) {
    const Vec3 lateral = right * side.sign;
    const double theta = hip_swing * std::sin(side.psi);
    const double kappa = knee_flex * 0.5 * (1.0 - std::cos(side.psi));
    const Vec3 hip = root + lateral * s.hip_half;
    const Vec3 knee = hip + limb(theta) * s.thigh;
    const Vec3 ankle = knee + limb(theta - kappa) * s.shin;
    j[side.hip] = hip;
    j[side.knee] = knee;
    j[side.ankle] = ankle;
    j[side.heel] = ankle - fwd * 0.05 + down * 0.06;
    j[side.big_toe] = ankle + fwd * s.foot + down * 0.06 + lateral * 0.02;
    j[side.small_toe] = ankle + fwd * (s.foot - 0.03) + down * 0.06 + lateral * 0.06;

    const double beta = -arm_swing * std::sin(side.psi);
    const double eps = elbow_flex * 0.5 * (1.0 + std::sin(side.psi));
    const Vec3 shoulder = neck + lateral * s.shoulder_half;
    const Vec3 elbow = shoulder + limb(beta) * s.upper_arm;
    j[side.shoulder] = shoulder;
    j[side.elbow] = elbow;
    j[side.wrist] = elbow + limb(beta + eps) * s.forearm;
    j[side.eye] = nose + up * 0.035 - fwd * 0.01 + lateral * 0.035;
    j[side.ear] = nose + up * 0.02 - fwd * 0.07 + lateral * 0.075;
  }
  return j;
}

TransformSE3 CameraPath::world_to_camera(double t) const {
  if (t == 0.0) return TransformSE3::identity();
  auto yaw = [&](double s) { return yaw_rate * s + 0.5 * yaw_accel * s * s; };
  auto velocity = [&](double s) {
    const double y = yaw(s);
    return Vec3{forward_speed * std::sin(y) + lateral_speed * std::cos(y), 0.0,
                forward_speed * std::cos(y) - lateral_speed * std::sin(y)};
  };
  // Composite Simpson over [0, t].
  constexpr int kIntervals = 64;
  const double h = t / kIntervals;
  Vec3 center{0.0, 0.0, 0.0};
  for (int i = 0; i <= kIntervals; ++i) {
    const double weight = (i == 0 || i == kIntervals) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    center = center + velocity(i * h) * (weight * h / 3.0);
  }
  const double y = yaw(t);
  const double c = std::cos(y), s = std::sin(y);
  const Mat3 r_wc{c, 0.0, -s, 0.0, 1.0, 0.0, s, 0.0, c};  // R_y(yaw) transposed
  Vec3 trans{};
  for (int i = 0; i < 3; ++i) {
    trans[i] = -(r_wc[i * 3] * center[0] + r_wc[i * 3 + 1] * center[1] + r_wc[i * 3 + 2] * center[2]) + 0.0;
  }
  return TransformSE3::from_rt(r_wc, trans);
}

LocomotionSequence generate_scene(const WalkerConfig& walker, const CameraPath& camera,
                                  const Intrinsics& intrinsics, std::size_t frame_count) {
  walker.validate();
  require(camera.fps > 0.0, "camera fps must be positive");
  LocomotionSequence seq;
  seq.frame_width = intrinsics.width;
  seq.frame_height = intrinsics.height;
  seq.t_p = frame_count;
  for (std::size_t f = 0; f < frame_count; ++f) {
    const double t = static_cast<double>(f) / camera.fps;
    const TransformSE3 m = camera.world_to_camera(t);
    const auto world = walker.joints_at(t);
    Pose pose;
    double anchor_depth = 0.0;
    for (std::size_t j = 0; j < kJointCount; ++j) {
      const Vec3 p = m.apply(world[j]);
      if (p[2] < 0.1) {
        throw SceneRejected("joint " + std::to_string(j) + " is behind the camera at frame " +
                            std::to_string(f));
      }
      pose[j] = {snap_to_lattice(intrinsics.fx * p[0] / p[2] + intrinsics.cx),
                 snap_to_lattice(intrinsics.fy * p[1] / p[2] + intrinsics.cy), 1.0};
      if (j == kAnchorJoint) anchor_depth = p[2];
    }
    seq.frames.push_back(pose);
    seq.anchor_depth.push_back(anchor_depth);
    seq.transforms.push_back(m);
  }
  return seq;
}

// ---------------------------------------------------------------------------
// Annotator

void NoiseConfig::validate() const {
  require(dropout >= 0.0 && dropout <= 1.0, "noise dropout must lie in [0, 1]");
  require(jitter_sigma >= 0.0 && confidence_cap >= 0.0, "jitter parameters must be non-negative");
  require(rotation_jitter >= 0.0 && translation_jitter >= 0.0,
          "transform jitter must be non-negative");
  require(depth_sigma >= 0.0, "depth noise must be non-negative");
}

LocomotionSequence annotate_noisy(const LocomotionSequence& truth, const NoiseConfig& noise,
                                  std::uint64_t seed) {
  noise.validate();
  truth.validate();
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution drop(noise.dropout);
  std::normal_distribution<double> unit(0.0, 1.0);

  LocomotionSequence out = truth;
  for (Pose& pose : out.frames) {
    for (Keypoint& k : pose.joints) {
      if (drop(rng)) {
        k = {0.0, 0.0, 0.0};
        continue;
      }
      if (noise.jitter_sigma == 0.0) continue;
      const double du = noise.jitter_sigma * unit(rng);
      const double dv = noise.jitter_sigma * unit(rng);
      k.u = snap_to_lattice(k.u + du);
      k.v = snap_to_lattice(k.v + dv);
      const double mag = std::sqrt(du * du + dv * dv);
      const double score = noise.confidence_cap > 0.0 ? 1.0 - mag / noise.confidence_cap : 0.0;
      k.c *= std::clamp(score, 0.0, 1.0);
    }
  }
  if (noise.depth_sigma > 0.0) {
    for (double& d : out.anchor_depth) {
      d *= std::max(0.05, 1.0 + noise.depth_sigma * unit(rng));
    }
  }
  if (noise.transform_noise()) {
    for (std::size_t a = 1; a < out.transforms.size(); ++a) {
      const TransformSE3 step = truth.transforms[a] * truth.transforms[a - 1].inverse();
      const Vec3 omega{noise.rotation_jitter * unit(rng), noise.rotation_jitter * unit(rng),
                       noise.rotation_jitter * unit(rng)};
      const Vec3 delta{noise.translation_jitter * unit(rng), noise.translation_jitter * unit(rng),
                       noise.translation_jitter * unit(rng)};
      const TransformSE3 noisy_step = TransformSE3::from_axis_angle(omega, delta) * step;
      const TransformSE3 pair[2] = {noisy_step, out.transforms[a - 1]};
      out.transforms[a] = chain_transforms(pair);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scene sampling

ScenePreset parse_scene_preset(const std::string& name) {
  if (name == "default") return ScenePreset::kDefault;
  if (name == "camera_heavy" || name == "camera-heavy") return ScenePreset::kCameraHeavy;
  throw std::invalid_argument("unknown scene preset '" + name + "'");
}

const char* scene_preset_name(ScenePreset p) {
  return p == ScenePreset::kDefault ? "default" : "camera_heavy";
}

namespace {

bool inside_frame(const LocomotionSequence& seq, const Intrinsics& in) {
  for (const Pose& p : seq.frames) {
    for (const Keypoint& k : p.joints) {
      if (k.u < 0.0 || k.u > in.width || k.v < 0.0 || k.v > in.height) return false;
    }
  }
  const Pose& first = seq.frames.front();
  double top = first[0].v, bottom = first[0].v;
  for (const Keypoint& k : first.joints) {
    top = std::min(top, k.v);
    bottom = std::max(bottom, k.v);
  }
  return bottom - top >= 50.0;
}

}  // namespace

SampledScene sample_scene(ScenePreset preset, const Intrinsics& intrinsics,
                          std::size_t frame_count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto uni = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
  auto gauss = [&](double sd) { return std::normal_distribution<double>(0.0, sd)(rng); };
  const bool heavy = preset == ScenePreset::kCameraHeavy;

  for (std::size_t attempt = 1; attempt <= 20000; ++attempt) {
    SampledScene s;
    s.seed = seed;
    s.attempts = attempt;
    WalkerConfig& w = s.walker;
    const bool standing = uni(0.0, 1.0) < (heavy ? 0.3 : 0.25);
    const double amp = standing ? 0.15 : uni(0.7, 1.2);
    w.speed = standing ? 0.0 : uni(0.9, 1.7);
    w.heading = uni(0.0, 2.0 * std::numbers::pi);
    w.start_x = heavy ? uni(-12.0, 12.0) : uni(-8.0, 8.0);
    w.start_z = heavy ? uni(14.0, 35.0) : uni(5.0, 22.0);
    w.ground_y = uni(1.2, 1.6);
    const double scale = uni(0.88, 1.08);
    for (double* len : {&w.skeleton.torso, &w.skeleton.neck_to_nose, &w.skeleton.shoulder_half,
                        &w.skeleton.hip_half, &w.skeleton.upper_arm, &w.skeleton.forearm,
                        &w.skeleton.thigh, &w.skeleton.shin, &w.skeleton.foot}) {
      *len *= scale;
    }
    w.gait_frequency = uni(0.8, 1.0);
    w.phase = uni(0.0, 2.0 * std::numbers::pi);
    w.hip_swing *= amp;
    w.knee_flex *= amp;
    w.arm_swing *= amp;
    w.elbow_flex *= amp;
    w.bob *= amp;

    CameraPath& c = s.camera;
    if (heavy) {
      c.forward_speed = uni(3.0, 9.0);
      c.lateral_speed = gauss(0.3);
      c.yaw_rate = uni(-0.3, 0.3);
      c.yaw_accel = uni(-0.5, 0.5);
    } else {
      c.forward_speed = uni(0.0, 5.0);
      c.yaw_rate = gauss(0.06);
      c.yaw_accel = gauss(0.06);
    }
    try {
      const auto seq = generate_scene(w, c, intrinsics, frame_count);
      if (inside_frame(seq, intrinsics)) return s;
    } catch (const SceneRejected&) {
    }
  }
  throw SceneRejected("sample_scene: no admissible scene after 20000 attempts");
}

std::vector<SyntheticRecord> generate_dataset(std::size_t count, std::size_t t_p, std::size_t t_f,
                                              ScenePreset preset, const NoiseConfig& noise,
                                              const Intrinsics& intrinsics, std::uint64_t seed,
                                              const std::string& id_prefix) {
  noise.validate();
  std::vector<SyntheticRecord> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    SyntheticRecord r;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%05zu", i);
    r.id = id_prefix + "-" + buf;
    const std::uint64_t scene_seed = derive_seed(seed, i);
    r.scene = sample_scene(preset, intrinsics, t_p + t_f, scene_seed);
    r.truth = generate_scene(r.scene.walker, r.scene.camera, intrinsics, t_p + t_f);
    r.truth.t_p = t_p;
    r.truth.t_f = t_f;
    r.noisy = annotate_noisy(r.truth, noise, derive_seed(scene_seed, 1));
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace loco

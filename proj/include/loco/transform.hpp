#pragma once

#include <array>
#include <span>

namespace loco {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<double, 9>;  // row-major

/// Rigid scene transformation stored as the top 3x4 block [R | t] of a
/// homogeneous matrix, row-major. Units are meters.
struct TransformSE3 {
  std::array<double, 12> m{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0};

  static TransformSE3 identity() { return {}; }
  static TransformSE3 from_rt(const Mat3& r, const Vec3& t);
  static TransformSE3 translation_only(const Vec3& t) { return from_rt({1, 0, 0, 0, 1, 0, 0, 0, 1}, t); }
  /// Rotation exp(ω^) via Rodrigues' formula.
  static TransformSE3 from_axis_angle(const Vec3& omega, const Vec3& t = {0, 0, 0});

  Mat3 rotation() const;
  Vec3 translation() const { return {m[3], m[7], m[11]}; }
  Vec3 apply(const Vec3& p) const;
  TransformSE3 inverse() const;
  /// Max deviation of RᵀR from I and of det(R) from 1.
  double rigidity_error() const;

  friend TransformSE3 operator*(const TransformSE3& a, const TransformSE3& b);
  friend bool operator==(const TransformSE3&, const TransformSE3&) = default;
};

double determinant(const Mat3& r);

/// Nearest rotation (polar factor) of a near-orthonormal matrix.
Mat3 nearest_rotation(const Mat3& r);

}  // namespace loco

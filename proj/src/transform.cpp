#include "loco/transform.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace loco {

TransformSE3 TransformSE3::from_rt(const Mat3& r, const Vec3& t) {
  TransformSE3 out;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) out.m[i * 4 + j] = r[i * 3 + j];
    out.m[i * 4 + 3] = t[i];
  }
  return out;
}

TransformSE3 TransformSE3::from_axis_angle(const Vec3& omega, const Vec3& t) {
  const double theta = std::sqrt(omega[0] * omega[0] + omega[1] * omega[1] + omega[2] * omega[2]);
  Mat3 r{1, 0, 0, 0, 1, 0, 0, 0, 1};
  if (theta > 0) {
    const double x = omega[0] / theta, y = omega[1] / theta, z = omega[2] / theta;
    const double c = std::cos(theta), s = std::sin(theta), C = 1 - c;
    r = {c + x * x * C,     x * y * C - z * s, x * z * C + y * s,
         y * x * C + z * s, c + y * y * C,     y * z * C - x * s,
         z * x * C - y * s, z * y * C + x * s, c + z * z * C};
  }
  return from_rt(r, t);
}

Mat3 TransformSE3::rotation() const {
  return {m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]};
}

Vec3 TransformSE3::apply(const Vec3& p) const {
  Vec3 out{};
  for (int i = 0; i < 3; ++i) {
    out[i] = m[i * 4] * p[0] + m[i * 4 + 1] * p[1] + m[i * 4 + 2] * p[2] + m[i * 4 + 3];
  }
  return out;
}

TransformSE3 TransformSE3::inverse() const {
  const Mat3 r = rotation();
  const Vec3 t = translation();
  Mat3 rt{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) rt[i * 3 + j] = r[j * 3 + i];
  }
  Vec3 ti{};
  for (int i = 0; i < 3; ++i) {
    ti[i] = -(rt[i * 3] * t[0] + rt[i * 3 + 1] * t[1] + rt[i * 3 + 2] * t[2]);
  }
  return from_rt(rt, ti);
}

TransformSE3 operator*(const TransformSE3& a, const TransformSE3& b) {
  TransformSE3 out;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 4; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += a.m[i * 4 + k] * b.m[k * 4 + j];
      out.m[i * 4 + j] = s + (j == 3 ? a.m[i * 4 + 3] : 0.0);
    }
  }
  return out;
}

double determinant(const Mat3& r) {
  return r[0] * (r[4] * r[8] - r[5] * r[7]) - r[1] * (r[3] * r[8] - r[5] * r[6]) +
         r[2] * (r[3] * r[7] - r[4] * r[6]);
}

double TransformSE3::rigidity_error() const {
  const Mat3 r = rotation();
  double err = std::fabs(determinant(r) - 1.0);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += r[k * 3 + i] * r[k * 3 + j];
      err = std::max(err, std::fabs(s - (i == j ? 1.0 : 0.0)));
    }
  }
  return err;
}

Mat3 nearest_rotation(const Mat3& r) {
  Eigen::Matrix3d m;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) m(i, j) = r[i * 3 + j];
  }
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  const Eigen::Matrix3d v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0) u.col(2) *= -1.0;
  const Eigen::Matrix3d q = u * v.transpose();
  Mat3 out{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) out[i * 3 + j] = q(i, j);
  }
  return out;
}

}  // namespace loco

#include "loco/pose.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace loco {
namespace {

double distance(double du, double dv, KdeNorm norm) {
  return norm == KdeNorm::kL2 ? std::sqrt(du * du + dv * dv) : std::fabs(du) + std::fabs(dv);
}

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) {
    throw std::invalid_argument("kde: prediction has " + std::to_string(a) +
                                " frames but truth has " + std::to_string(b));
  }
  if (a == 0) throw std::invalid_argument("kde: empty sequences");
}

}  // namespace

double snap_to_lattice(double x) { return std::nearbyint(x / kCoordinateQuantum) * kCoordinateQuantum; }

void LocomotionSequence::validate() const {
  if (anchor_depth.size() != frames.size() || transforms.size() != frames.size()) {
    throw std::invalid_argument("sequence: frames, depths and transforms differ in length");
  }
  if (!frames.empty() && !(transforms.front() == TransformSE3::identity())) {
    throw std::invalid_argument("sequence: transforms[0] must be the identity");
  }
  for (double d : anchor_depth) {
    if (!(d > 0.0)) throw std::invalid_argument("sequence: anchor depth must be positive");
  }
}

LocomotionSequence LocomotionSequence::window(std::size_t begin, std::size_t end) const {
  if (begin >= end || end > frames.size()) throw std::out_of_range("sequence window out of range");
  LocomotionSequence out;
  out.frame_width = frame_width;
  out.frame_height = frame_height;
  out.frames.assign(frames.begin() + static_cast<std::ptrdiff_t>(begin),
                    frames.begin() + static_cast<std::ptrdiff_t>(end));
  out.anchor_depth.assign(anchor_depth.begin() + static_cast<std::ptrdiff_t>(begin),
                          anchor_depth.begin() + static_cast<std::ptrdiff_t>(end));
  const TransformSE3 base_inv = transforms[begin].inverse();
  for (std::size_t i = begin; i < end; ++i) {
    out.transforms.push_back(i == begin ? TransformSE3::identity() : transforms[i] * base_inv);
  }
  out.t_p = std::min(t_p, end - begin);
  out.t_f = end - begin - out.t_p;
  return out;
}

bool all_confident(const Pose& pose, double alpha_c) {
  return std::all_of(pose.joints.begin(), pose.joints.end(),
                     [&](const Keypoint& k) { return k.c > alpha_c; });
}

std::vector<Pose> confidence_filter(std::span<const Pose> poses, double alpha_c) {
  std::vector<Pose> kept;
  for (const Pose& p : poses) {
    if (all_confident(p, alpha_c)) kept.push_back(p);
  }
  return kept;
}

double kde(std::span<const Pose> pred, std::span<const Pose> truth, KdeNorm norm) {
  check_lengths(pred.size(), truth.size());
  double total = 0.0;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    for (std::size_t j = 0; j < kJointCount; ++j) {
      total += distance(pred[t][j].u - truth[t][j].u, pred[t][j].v - truth[t][j].v, norm);
    }
  }
  return total / static_cast<double>(pred.size());
}

double mean_kde(std::span<const Pose> pred, std::span<const Pose> truth, KdeNorm norm) {
  return kde(pred, truth, norm) / static_cast<double>(kJointCount);
}

double kde(std::span<const Vec2> pred, std::span<const Vec2> truth, KdeNorm norm) {
  check_lengths(pred.size(), truth.size());
  double total = 0.0;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    total += distance(pred[t].u - truth[t].u, pred[t].v - truth[t].v, norm);
  }
  return total / static_cast<double>(pred.size());
}

}  // namespace loco

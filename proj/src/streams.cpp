#include "loco/streams.hpp"

#include <stdexcept>
#include <string>

namespace loco {

StreamPair decompose(std::span<const Pose> poses, MissingJoints missing) {
  StreamPair out;
  out.global.anchor.reserve(poses.size());
  out.local.frames.reserve(poses.size());
  for (std::size_t t = 0; t < poses.size(); ++t) {
    const Pose& p = poses[t];
    if (missing == MissingJoints::kReject) {
      for (std::size_t j = 0; j < kJointCount; ++j) {
        if (p[j].missing()) {
          throw std::invalid_argument("decompose: joint " + std::to_string(j) + " of frame " +
                                      std::to_string(t) + " is missing; complete the pose first");
        }
      }
    }
    const Keypoint& a = p.anchor();
    out.global.anchor.push_back({a.u, a.v});
    out.global.confidence.push_back(a.c);
    LocalFrame lf;
    for (std::size_t k = 0; k < kLocalJointCount; ++k) {
      const Keypoint& q = p[local_to_joint(k)];
      if (q.missing() || a.missing()) continue;  // undefined offset stays (0, 0) with c = 0
      lf.offset[k] = {q.u - a.u, q.v - a.v};
      lf.confidence[k] = q.c;
    }
    out.local.frames.push_back(lf);
  }
  return out;
}

StreamPair decompose(const LocomotionSequence& seq, MissingJoints missing) {
  StreamPair out = decompose(std::span<const Pose>(seq.frames), missing);
  out.global.depth = seq.anchor_depth;
  out.global.transforms = seq.transforms;
  return out;
}

std::vector<Pose> recombine(std::span<const Vec2> anchor, const LocalStream& local) {
  if (anchor.size() != local.size()) {
    throw std::invalid_argument("recombine: global stream has " + std::to_string(anchor.size()) +
                                " frames, local stream " + std::to_string(local.size()));
  }
  std::vector<Pose> out(anchor.size());
  for (std::size_t t = 0; t < anchor.size(); ++t) {
    Pose& p = out[t];
    p[kAnchorJoint] = {anchor[t].u, anchor[t].v, 1.0};
    for (std::size_t k = 0; k < kLocalJointCount; ++k) {
      const LocalFrame& lf = local.frames[t];
      p[local_to_joint(k)] = {anchor[t].u + lf.offset[k].u, anchor[t].v + lf.offset[k].v,
                              lf.confidence[k]};
    }
  }
  return out;
}

std::vector<Pose> recombine(const GlobalStream& global, const LocalStream& local) {
  std::vector<Pose> out = recombine(std::span<const Vec2>(global.anchor), local);
  for (std::size_t t = 0; t < out.size() && t < global.confidence.size(); ++t) {
    out[t][kAnchorJoint].c = global.confidence[t];
  }
  return out;
}

}  // namespace loco

#include "doctest.h"

#include <stdexcept>
#include <random>

#include "loco/streams.hpp"

using namespace loco;

namespace {

// Completed sequence with lattice-valued coordinates.
std::vector<Pose> random_completed(std::mt19937_64& rng, std::size_t frames) {
  std::uniform_real_distribution<double> coord(-200.0, 1500.0), conf(0.01, 1.0);
  std::vector<Pose> out(frames);
  for (auto& p : out) {
    for (auto& k : p.joints) k = {snap_to_lattice(coord(rng)), snap_to_lattice(coord(rng)), conf(rng)};
  }
  return out;
}

}  // namespace

TEST_CASE("recombine inverts decompose exactly") {
  std::mt19937_64 rng(7);
  for (int s = 0; s < 200; ++s) {
    const auto poses = random_completed(rng, 30);
    const auto sp = decompose(poses);
    CHECK(sp.global.size() == 30);
    CHECK(sp.local.size() == 30);
    CHECK(recombine(sp.global, sp.local) == poses);
  }
}

TEST_CASE("decompose carries depth and transforms of a sequence") {
  std::mt19937_64 rng(3);
  LocomotionSequence seq;
  seq.frames = random_completed(rng, 4);
  seq.anchor_depth = {5, 6, 7, 8};
  seq.transforms.assign(4, TransformSE3::identity());
  const auto sp = decompose(seq);
  CHECK(sp.global.depth == seq.anchor_depth);
  CHECK(sp.global.transforms.size() == 4);
  CHECK(sp.global.anchor[2] == seq.frames[2].anchor().position());
  CHECK(sp.local.frames[1].offset[0].u == seq.frames[1][0].u - seq.frames[1][1].u);
  CHECK(sp.local.frames[1].offset[1].u == seq.frames[1][2].u - seq.frames[1][1].u);
}

TEST_CASE("missing joints") {
  std::mt19937_64 rng(5);
  auto poses = random_completed(rng, 3);
  poses[1][4] = {0.0, 0.0, 0.0};
  CHECK_THROWS_AS(decompose(poses), std::invalid_argument);

  auto sp = decompose(poses, MissingJoints::kAllow);
  const std::size_t k = 3;  // joint 4 in local indexing
  CHECK(local_to_joint(k) == 4);
  CHECK(sp.local.frames[1].offset[k] == Vec2{0.0, 0.0});
  CHECK(sp.local.frames[1].confidence[k] == 0.0);

  poses[2][kAnchorJoint] = {0.0, 0.0, 0.0};
  sp = decompose(poses, MissingJoints::kAllow);
  CHECK(sp.global.confidence[2] == 0.0);
  for (std::size_t j = 0; j < kLocalJointCount; ++j) {
    CHECK(sp.local.frames[2].offset[j] == Vec2{0.0, 0.0});
    CHECK(sp.local.frames[2].confidence[j] == 0.0);
  }
}

TEST_CASE("local stream ignores rigid translation") {
  std::mt19937_64 rng(9);
  const auto poses = random_completed(rng, 10);
  auto moved = poses;
  for (auto& p : moved) {
    for (auto& k : p.joints) {
      k.u += 37.25;
      k.v -= 12.5;
    }
  }
  CHECK(decompose(poses).local == decompose(moved).local);
}

TEST_CASE("recombine rejects streams of different length") {
  std::mt19937_64 rng(2);
  auto sp = decompose(random_completed(rng, 4));
  sp.local.frames.pop_back();
  CHECK_THROWS_AS(recombine(sp.global, sp.local), std::invalid_argument);
}

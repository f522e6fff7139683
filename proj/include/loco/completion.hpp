#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "loco/layers.hpp"
#include "loco/pose.hpp"

namespace loco {

/// Symmetric autoencoder: input -> widths[0] -> ... -> widths.back() (latent)
/// and the mirror image back to input. Hidden layers use `activation`; the
/// output layer is linear. Parameters <prefix>.enc{i} and <prefix>.dec{i}.
struct AutoencoderSpec {
  std::size_t input_dim = 2 * kJointCount;
  std::vector<std::size_t> widths{37, 23, 10};
  Activation activation = Activation::kTanh;

  void validate() const;
  std::size_t latent_dim() const { return widths.back(); }
};

/// Widths stepping from `input` to `latent` in `layers` equal decrements,
/// rounded: 50 -> 10 in three steps gives 37, 23, 10.
std::vector<std::size_t> layer_widths(std::size_t input, std::size_t latent, std::size_t layers);

class Autoencoder {
 public:
  Autoencoder() = default;
  Autoencoder(AutoencoderSpec spec, std::string prefix)
      : spec_(std::move(spec)), prefix_(std::move(prefix)) {}

  void init(ParameterSet& params, std::mt19937_64& rng) const;
  const AutoencoderSpec& spec() const { return spec_; }
  const std::string& prefix() const { return prefix_; }

  Var encode(ParamScope& scope, Var x) const;
  Var decode(ParamScope& scope, Var z) const;
  Var reconstruct(ParamScope& scope, Var x) const { return decode(scope, encode(scope, x)); }

  std::string enc_name(std::size_t i) const { return prefix_ + ".enc" + std::to_string(i); }
  std::string dec_name(std::size_t i) const { return prefix_ + ".dec" + std::to_string(i); }

 private:
  AutoencoderSpec spec_;
  std::string prefix_ = "ae";
};

struct CompletionConfig {
  std::vector<std::size_t> widths{37, 23, 10};
  Activation activation = Activation::kTanh;
  double input_dropout = 0.5;  // per joint, both coordinates at once
  double learning_rate = 1e-3;
  /// Geometric decay: the last step uses learning_rate * final_lr_fraction.
  double final_lr_fraction = 1.0;
  std::size_t steps = 8000;
  std::size_t batch = 32;
  double alpha_c = kDefaultConfidenceThreshold;
  double frame_width = 1280.0;
  double frame_height = 720.0;

  void validate() const;
};

struct CompletionModel {
  CompletionConfig config;
  ParameterSet params;
  std::vector<double> loss_history;

  Autoencoder net() const;
};

/// Pose coordinates as a [1, 50] row scaled to [0, 1] by the frame size.
/// Joints with keep[i] == false are written as zeros.
void pose_to_row(const Pose& pose, double width, double height, double* out,
                 const bool* keep = nullptr);

/// Mean absolute reconstruction error over a batch: clean [B, 50], mask [B, 50]
/// of 0/1 applied to the input.
Var completion_loss(ParamScope& scope, const Autoencoder& net, const Tensor& clean,
                    const Tensor& mask);

/// Adam on the mean L1 reconstruction loss under joint-level input dropout.
/// Throws std::invalid_argument on an empty training set.
CompletionModel train_completion(std::span<const Pose> high_conf_poses,
                                 const CompletionConfig& config, std::uint64_t seed);

/// Autoencoder output for `pose` with joints at or below alpha_c fed as zeros.
Pose reconstruct(const Pose& pose, const CompletionModel& model, double alpha_c);

/// Replaces joints with c <= alpha_c by the reconstruction (confidence set to
/// alpha_c); confident joints pass through untouched.
Pose complete(const Pose& pose, const CompletionModel& model, double alpha_c);
std::vector<Pose> complete(std::span<const Pose> poses, const CompletionModel& model,
                           double alpha_c);

}  // namespace loco

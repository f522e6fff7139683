#include "loco/completion.hpp"

#include <cmath>
#include <stdexcept>

#include "loco/optim.hpp"

namespace loco {

void AutoencoderSpec::validate() const {
  if (input_dim == 0) throw std::invalid_argument("autoencoder: input_dim must be positive");
  if (widths.empty()) throw std::invalid_argument("autoencoder: at least one layer required");
  for (std::size_t w : widths) {
    if (w == 0) throw std::invalid_argument("autoencoder: layer widths must be positive");
  }
}

std::vector<std::size_t> layer_widths(std::size_t input, std::size_t latent, std::size_t layers) {
  if (input == 0 || latent == 0 || layers == 0) {
    throw std::invalid_argument("layer_widths: arguments must be positive");
  }
  std::vector<std::size_t> widths;
  const double step = (static_cast<double>(input) - static_cast<double>(latent)) /
                      static_cast<double>(layers);
  for (std::size_t i = 1; i <= layers; ++i) {
    widths.push_back(static_cast<std::size_t>(
        std::lround(static_cast<double>(input) - step * static_cast<double>(i))));
  }
  widths.back() = latent;
  return widths;
}

void Autoencoder::init(ParameterSet& params, std::mt19937_64& rng) const {
  spec_.validate();
  const auto& w = spec_.widths;
  std::size_t in = spec_.input_dim;
  for (std::size_t i = 0; i < w.size(); ++i) {
    init_dense(params, enc_name(i), in, w[i], rng);
    in = w[i];
  }
  for (std::size_t i = 0; i < w.size(); ++i) {
    const std::size_t out = i + 1 < w.size() ? w[w.size() - 2 - i] : spec_.input_dim;
    init_dense(params, dec_name(i), in, out, rng);
    in = out;
  }
}

Var Autoencoder::encode(ParamScope& scope, Var x) const {
  for (std::size_t i = 0; i < spec_.widths.size(); ++i) {
    x = dense(scope, enc_name(i), x, spec_.activation);
  }
  return x;
}

Var Autoencoder::decode(ParamScope& scope, Var z) const {
  const std::size_t n = spec_.widths.size();
  for (std::size_t i = 0; i < n; ++i) {
    z = dense(scope, dec_name(i), z, i + 1 < n ? spec_.activation : Activation::kLinear);
  }
  return z;
}

void CompletionConfig::validate() const {
  AutoencoderSpec{2 * kJointCount, widths, activation}.validate();
  if (!(input_dropout >= 0.0 && input_dropout < 1.0)) {
    throw std::invalid_argument("completion: input_dropout must lie in [0, 1)");
  }
  if (!(learning_rate > 0.0)) throw std::invalid_argument("completion: learning_rate must be > 0");
  if (!(final_lr_fraction > 0.0 && final_lr_fraction <= 1.0)) {
    throw std::invalid_argument("completion: final_lr_fraction must lie in (0, 1]");
  }
  if (batch == 0) throw std::invalid_argument("completion: batch must be positive");
  if (!(frame_width > 0.0 && frame_height > 0.0)) {
    throw std::invalid_argument("completion: frame size must be positive");
  }
}

Autoencoder CompletionModel::net() const {
  return Autoencoder({2 * kJointCount, config.widths, config.activation}, "completion");
}

void pose_to_row(const Pose& pose, double width, double height, double* out, const bool* keep) {
  for (std::size_t i = 0; i < kJointCount; ++i) {
    const bool k = keep == nullptr || keep[i];
    out[2 * i] = k ? pose[i].u / width : 0.0;
    out[2 * i + 1] = k ? pose[i].v / height : 0.0;
  }
}

Var completion_loss(ParamScope& scope, const Autoencoder& net, const Tensor& clean,
                    const Tensor& mask) {
  Graph& g = scope.graph();
  Var target = g.constant_view(clean, "clean");
  Var x = g.hadamard(target, g.constant_view(mask, "mask"));
  return g.mean(g.abs(g.sub(net.reconstruct(scope, x), target)));
}

CompletionModel train_completion(std::span<const Pose> high_conf_poses,
                                 const CompletionConfig& config, std::uint64_t seed) {
  if (high_conf_poses.empty()) {
    throw std::invalid_argument(
        "train_completion: empty training set (no pose has every joint above alpha_c)");
  }
  config.validate();
  CompletionModel model;
  model.config = config;
  std::mt19937_64 rng(seed);
  const Autoencoder net = model.net();
  net.init(model.params, rng);

  AdamState adam;
  adam.config.learning_rate = config.learning_rate;
  const std::size_t dim = 2 * kJointCount;
  std::uniform_int_distribution<std::size_t> pick(0, high_conf_poses.size() - 1);
  std::bernoulli_distribution drop(config.input_dropout);
  Tensor clean = Tensor::matrix(config.batch, dim);
  Tensor mask = Tensor::matrix(config.batch, dim);
  model.loss_history.reserve(config.steps);

  for (std::size_t step = 0; step < config.steps; ++step) {
    for (std::size_t b = 0; b < config.batch; ++b) {
      const Pose& p = high_conf_poses[pick(rng)];
      pose_to_row(p, config.frame_width, config.frame_height, clean.raw() + b * dim);
      for (std::size_t j = 0; j < kJointCount; ++j) {
        const double keep = drop(rng) ? 0.0 : 1.0;
        mask(b, 2 * j) = keep;
        mask(b, 2 * j + 1) = keep;
      }
    }
    if (config.final_lr_fraction != 1.0) {
      const double progress = static_cast<double>(step) / static_cast<double>(config.steps);
      adam.config.learning_rate = config.learning_rate * std::pow(config.final_lr_fraction, progress);
    }
    model.params.zero_grad();
    Graph g;
    ParamScope scope(g, model.params);
    Var loss = completion_loss(scope, net, clean, mask);
    g.backward(loss);
    model.loss_history.push_back(g.value(loss)[0]);
    adam_step(model.params, adam);
  }
  return model;
}

namespace {

// Reconstructs every pose in one batched forward pass.
std::vector<Pose> reconstruct_batch(std::span<const Pose> poses, const CompletionModel& model,
                                    double alpha_c) {
  const std::size_t dim = 2 * kJointCount;
  const double w = model.config.frame_width;
  const double h = model.config.frame_height;
  Tensor x = Tensor::matrix(poses.size(), dim);
  for (std::size_t r = 0; r < poses.size(); ++r) {
    bool keep[kJointCount];
    for (std::size_t j = 0; j < kJointCount; ++j) keep[j] = poses[r][j].c > alpha_c;
    pose_to_row(poses[r], w, h, x.raw() + r * dim, keep);
  }
  Graph g;
  ParamScope scope(g, static_cast<const ParameterSet&>(model.params));
  const Tensor& y = g.value(model.net().reconstruct(scope, g.constant_view(x)));
  std::vector<Pose> out(poses.size());
  for (std::size_t r = 0; r < poses.size(); ++r) {
    for (std::size_t j = 0; j < kJointCount; ++j) {
      out[r][j] = {snap_to_lattice(y(r, 2 * j) * w), snap_to_lattice(y(r, 2 * j + 1) * h), alpha_c};
    }
  }
  return out;
}

}  // namespace

Pose reconstruct(const Pose& pose, const CompletionModel& model, double alpha_c) {
  return reconstruct_batch(std::span<const Pose>(&pose, 1), model, alpha_c).front();
}

Pose complete(const Pose& pose, const CompletionModel& model, double alpha_c) {
  return complete(std::span<const Pose>(&pose, 1), model, alpha_c).front();
}

std::vector<Pose> complete(std::span<const Pose> poses, const CompletionModel& model,
                           double alpha_c) {
  std::vector<Pose> out(poses.begin(), poses.end());
  std::vector<std::size_t> pending;
  std::vector<Pose> todo;
  for (std::size_t r = 0; r < poses.size(); ++r) {
    if (!all_confident(poses[r], alpha_c)) {
      pending.push_back(r);
      todo.push_back(poses[r]);
    }
  }
  if (todo.empty()) return out;
  const auto filled = reconstruct_batch(todo, model, alpha_c);
  for (std::size_t k = 0; k < pending.size(); ++k) {
    Pose& p = out[pending[k]];
    for (std::size_t j = 0; j < kJointCount; ++j) {
      if (p[j].c <= alpha_c) p[j] = filled[k][j];
    }
  }
  return out;
}

}  // namespace loco

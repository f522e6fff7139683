#pragma once

#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "loco/layers.hpp"

namespace loco {

/// fo-pooling: c = f⊙c' + (1−f)⊙z, h = o⊙c. f-pooling drops the output gate: h = c.
enum class Pooling { kFo, kF };
/// How the decoder sees the encoder context.
enum class DecoderConditioning { kInitialState, kConcatInput };

struct QrnnLayerSpec {
  std::size_t input_dim = 0;
  std::size_t hidden = 0;
  std::size_t kernel = 2;
  Pooling pooling = Pooling::kFo;

  std::size_t gate_count() const { return pooling == Pooling::kFo ? 3 : 2; }
};

/// Parameters <prefix>.W ([kernel*input_dim, gates*hidden]; rows ordered
/// oldest timestep first) and <prefix>.b ([1, gates*hidden]; gates z, f, o).
void init_qrnn_layer(ParameterSet& params, const std::string& prefix, const QrnnLayerSpec& spec,
                     std::mt19937_64& rng);

struct QrnnLayerOutput {
  std::vector<Var> hidden;
  Var cell;
};

enum class ConvMode {
  kParallel,    // one matmul over all timesteps, then pooling
  kSequential,  // convolution and pooling interleaved step by step
};

/// Causal convolution (zero left padding) followed by recurrent pooling over
/// the whole sequence. Each xs[t] is [batch, input_dim]; c0 is [batch, hidden].
QrnnLayerOutput qrnn_layer(ParamScope& scope, const std::string& prefix, const QrnnLayerSpec& spec,
                           const std::vector<Var>& xs, Var c0, ConvMode mode = ConvMode::kParallel);

/// One pooling step given the kernel window (oldest first) and previous cell.
/// Returns h_t and overwrites `cell` with c_t.
Var qrnn_step(ParamScope& scope, const std::string& prefix, const QrnnLayerSpec& spec,
              const std::vector<Var>& window, Var& cell);

/// Standalone form of a single layer on one sequence: x_seq is [T, input_dim],
/// c0 is [1, hidden]. Returns ([T, hidden], [1, hidden]).
std::pair<Tensor, Tensor> qrnn_layer_forward(const Tensor& x_seq, const ParameterSet& params,
                                             const std::string& prefix, const QrnnLayerSpec& spec,
                                             const Tensor& c0);

struct QrnnConfig {
  std::size_t input_dim = 0;
  std::size_t target_dim = 0;
  std::size_t hidden = 64;
  std::size_t layers = 2;
  std::size_t kernel = 2;
  Pooling pooling = Pooling::kFo;
  DecoderConditioning conditioning = DecoderConditioning::kInitialState;
  /// Output is decoder input + projection rather than the projection alone.
  bool residual_output = false;
};

/// N-layer QRNN encoder and N-layer QRNN decoder under one parameter prefix.
class QrnnEncoderDecoder {
 public:
  QrnnEncoderDecoder() = default;
  QrnnEncoderDecoder(QrnnConfig config, std::string prefix)
      : config_(config), prefix_(std::move(prefix)) {}

  void init(ParameterSet& params, std::mt19937_64& rng) const;
  const QrnnConfig& config() const { return config_; }
  std::size_t context_dim() const { return config_.layers * config_.hidden; }

  /// Final pooled cell of every encoder layer, concatenated: [batch, N*hidden].
  Var encode(ParamScope& scope, const std::vector<Var>& xs,
             ConvMode mode = ConvMode::kParallel) const;

  /// t_f output vectors. With `teacher` (length t_f) the input at step j > 0 is
  /// teacher[j-1]; without it the decoder feeds back its own previous output.
  /// Step 0 always consumes `seed`, the last observed target vector.
  std::vector<Var> decode(ParamScope& scope, Var context, Var seed, std::size_t t_f,
                          const std::vector<Var>* teacher = nullptr) const;

  QrnnLayerSpec encoder_layer(std::size_t l) const;
  QrnnLayerSpec decoder_layer(std::size_t l) const;

 private:
  std::string enc_name(std::size_t l) const { return prefix_ + ".enc" + std::to_string(l); }
  std::string dec_name(std::size_t l) const { return prefix_ + ".dec" + std::to_string(l); }

  QrnnConfig config_;
  std::string prefix_ = "qrnn";
};

}  // namespace loco

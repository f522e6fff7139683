#include "loco/qrnn.hpp"

#include <stdexcept>

namespace loco {

void init_qrnn_layer(ParameterSet& params, const std::string& prefix, const QrnnLayerSpec& spec,
                     std::mt19937_64& rng) {
  params.add_glorot(prefix + ".W", spec.kernel * spec.input_dim, spec.gate_count() * spec.hidden,
                    rng);
  params.add(prefix + ".b", Tensor::matrix(1, spec.gate_count() * spec.hidden));
}

namespace {

void check_layer_input(Graph& g, const QrnnLayerSpec& spec, Var x, const std::string& prefix) {
  const auto& shape = g.shape(x);
  if (shape[1] != spec.input_dim) {
    throw ShapeError("qrnn layer '" + prefix + "': expected " + std::to_string(spec.input_dim) +
                     " input channels, got " + std::to_string(shape[1]));
  }
}

// Pooling given the gate pre-activations of one timestep.
Var pool(Graph& g, const QrnnLayerSpec& spec, Var pre, Var& cell) {
  const std::size_t h = spec.hidden;
  Var z = g.tanh(g.slice(pre, 1, 0, h));
  Var f = g.sigmoid(g.slice(pre, 1, h, 2 * h));
  cell = g.add(g.hadamard(f, cell), g.hadamard(g.one_minus(f), z));
  if (spec.pooling == Pooling::kF) return cell;
  Var o = g.sigmoid(g.slice(pre, 1, 2 * h, 3 * h));
  return g.hadamard(o, cell);
}

std::vector<Var> window_at(const std::vector<Var>& xs, std::size_t t, std::size_t kernel, Var zero) {
  std::vector<Var> window;
  window.reserve(kernel);
  for (std::size_t j = 0; j < kernel; ++j) {
    const std::size_t back = kernel - 1 - j;
    window.push_back(t >= back ? xs[t - back] : zero);
  }
  return window;
}

}  // namespace

Var qrnn_step(ParamScope& scope, const std::string& prefix, const QrnnLayerSpec& spec,
              const std::vector<Var>& window, Var& cell) {
  Graph& g = scope.graph();
  if (window.size() != spec.kernel) throw ShapeError("qrnn_step: window size != kernel width");
  for (Var x : window) check_layer_input(g, spec, x, prefix);
  Var stacked = spec.kernel == 1 ? window.front() : g.concat(window, 1);
  Var pre = g.add(g.matmul(stacked, scope(prefix + ".W")), scope(prefix + ".b"));
  return pool(g, spec, pre, cell);
}

QrnnLayerOutput qrnn_layer(ParamScope& scope, const std::string& prefix, const QrnnLayerSpec& spec,
                           const std::vector<Var>& xs, Var c0, ConvMode mode) {
  Graph& g = scope.graph();
  if (xs.empty()) throw std::invalid_argument("qrnn_layer: sequence length must be >= 1");
  for (Var x : xs) check_layer_input(g, spec, x, prefix);
  const std::size_t batch = g.shape(xs.front())[0];
  if (g.shape(c0) != std::vector<std::size_t>{batch, spec.hidden}) {
    throw ShapeError("qrnn layer '" + prefix + "': initial cell must be [" + std::to_string(batch) +
                     "," + std::to_string(spec.hidden) + "]");
  }
  Var zero = g.input(Tensor::matrix(batch, spec.input_dim));
  QrnnLayerOutput out;
  out.cell = c0;
  out.hidden.reserve(xs.size());

  if (mode == ConvMode::kSequential) {
    for (std::size_t t = 0; t < xs.size(); ++t) {
      out.hidden.push_back(qrnn_step(scope, prefix, spec, window_at(xs, t, spec.kernel, zero), out.cell));
    }
    return out;
  }

  std::vector<Var> windows;
  windows.reserve(xs.size());
  for (std::size_t t = 0; t < xs.size(); ++t) {
    auto w = window_at(xs, t, spec.kernel, zero);
    windows.push_back(spec.kernel == 1 ? w.front() : g.concat(w, 1));
  }
  Var all = windows.size() == 1 ? windows.front() : g.concat(windows, 0);
  Var pre_all = g.add(g.matmul(all, scope(prefix + ".W")), scope(prefix + ".b"));
  for (std::size_t t = 0; t < xs.size(); ++t) {
    Var pre = xs.size() == 1 ? pre_all : g.slice(pre_all, 0, t * batch, (t + 1) * batch);
    out.hidden.push_back(pool(g, spec, pre, out.cell));
  }
  return out;
}

std::pair<Tensor, Tensor> qrnn_layer_forward(const Tensor& x_seq, const ParameterSet& params,
                                             const std::string& prefix, const QrnnLayerSpec& spec,
                                             const Tensor& c0) {
  if (x_seq.cols() != spec.input_dim) {
    throw ShapeError("qrnn_layer_forward: expected " + std::to_string(spec.input_dim) +
                     " channels, got " + std::to_string(x_seq.cols()));
  }
  Graph g;
  ParamScope scope(g, params);
  Var seq = g.input(x_seq);
  std::vector<Var> xs;
  for (std::size_t t = 0; t < x_seq.rows(); ++t) xs.push_back(g.slice(seq, 0, t, t + 1));
  auto out = qrnn_layer(scope, prefix, spec, xs, g.input(c0));
  Tensor h = Tensor::matrix(x_seq.rows(), spec.hidden);
  for (std::size_t t = 0; t < out.hidden.size(); ++t) {
    const Tensor& ht = g.value(out.hidden[t]);
    for (std::size_t c = 0; c < spec.hidden; ++c) h(t, c) = ht[c];
  }
  return {h, g.value(out.cell)};
}

// ---------------------------------------------------------------------------

QrnnLayerSpec QrnnEncoderDecoder::encoder_layer(std::size_t l) const {
  return {l == 0 ? config_.input_dim : config_.hidden, config_.hidden, config_.kernel,
          config_.pooling};
}

QrnnLayerSpec QrnnEncoderDecoder::decoder_layer(std::size_t l) const {
  std::size_t in = config_.hidden;
  if (l == 0) {
    in = config_.target_dim;
    if (config_.conditioning == DecoderConditioning::kConcatInput) in += context_dim();
  }
  return {in, config_.hidden, config_.kernel, config_.pooling};
}

void QrnnEncoderDecoder::init(ParameterSet& params, std::mt19937_64& rng) const {
  if (config_.layers == 0 || config_.hidden == 0 || config_.kernel == 0 ||
      config_.input_dim == 0 || config_.target_dim == 0) {
    throw std::invalid_argument("qrnn encoder-decoder: all dimensions must be positive");
  }
  for (std::size_t l = 0; l < config_.layers; ++l) {
    init_qrnn_layer(params, enc_name(l), encoder_layer(l), rng);
  }
  for (std::size_t l = 0; l < config_.layers; ++l) {
    init_qrnn_layer(params, dec_name(l), decoder_layer(l), rng);
  }
  init_dense(params, prefix_ + ".out", config_.hidden, config_.target_dim, rng);
}

Var QrnnEncoderDecoder::encode(ParamScope& scope, const std::vector<Var>& xs, ConvMode mode) const {
  Graph& g = scope.graph();
  if (xs.empty()) throw std::invalid_argument("qrnn encode: empty input sequence");
  const std::size_t batch = g.shape(xs.front())[0];
  std::vector<Var> layer_input = xs;
  std::vector<Var> finals;
  for (std::size_t l = 0; l < config_.layers; ++l) {
    Var c0 = g.input(Tensor::matrix(batch, config_.hidden));
    auto out = qrnn_layer(scope, enc_name(l), encoder_layer(l), layer_input, c0, mode);
    finals.push_back(out.cell);
    layer_input = std::move(out.hidden);
  }
  return finals.size() == 1 ? finals.front() : g.concat(finals, 1);
}

std::vector<Var> QrnnEncoderDecoder::decode(ParamScope& scope, Var context, Var seed,
                                            std::size_t t_f,
                                            const std::vector<Var>* teacher) const {
  Graph& g = scope.graph();
  if (teacher && teacher->size() != t_f) {
    throw std::invalid_argument("qrnn decode: teacher sequence has " +
                                std::to_string(teacher->size()) + " steps, expected " +
                                std::to_string(t_f));
  }
  std::vector<Var> outputs;
  if (t_f == 0) return outputs;
  const std::size_t batch = g.shape(seed)[0];
  if (g.shape(context) != std::vector<std::size_t>{batch, context_dim()}) {
    throw ShapeError("qrnn decode: context must be [" + std::to_string(batch) + "," +
                     std::to_string(context_dim()) + "]");
  }

  const std::size_t layers = config_.layers;
  const std::size_t h = config_.hidden;
  std::vector<Var> cells(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    cells[l] = config_.conditioning == DecoderConditioning::kInitialState
                   ? (layers == 1 ? context : g.slice(context, 1, l * h, (l + 1) * h))
                   : g.input(Tensor::matrix(batch, h));
  }
  // Past inputs of every layer, most recent last, zero-padded on the left.
  std::vector<std::vector<Var>> history(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    Var zero = g.input(Tensor::matrix(batch, decoder_layer(l).input_dim));
    history[l].assign(config_.kernel - 1, zero);
  }

  Var input = seed;
  for (std::size_t j = 0; j < t_f; ++j) {
    Var x = input;
    if (config_.conditioning == DecoderConditioning::kConcatInput) {
      std::vector<Var> parts{input, context};
      x = g.concat(parts, 1);
    }
    for (std::size_t l = 0; l < layers; ++l) {
      std::vector<Var> window = history[l];
      window.push_back(x);
      if (!history[l].empty()) {
        history[l].erase(history[l].begin());
        history[l].push_back(x);
      }
      x = qrnn_step(scope, dec_name(l), decoder_layer(l), window, cells[l]);
    }
    Var y = dense(scope, prefix_ + ".out", x, Activation::kLinear);
    if (config_.residual_output) y = g.add(y, input);
    outputs.push_back(y);
    input = teacher ? (*teacher)[j] : y;
  }
  return outputs;
}

}  // namespace loco

#include "loco/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "loco/checkpoint.hpp"
#include "loco/config_json.hpp"
#include "loco/optim.hpp"

namespace loco {

ResidualMode parse_residual_mode(const std::string& name) {
  if (name == "consecutive") return ResidualMode::kConsecutive;
  if (name == "from_first") return ResidualMode::kFromFirst;
  throw std::invalid_argument("unknown residual mode '" + name + "'");
}

const char* residual_mode_name(ResidualMode m) {
  return m == ResidualMode::kConsecutive ? "consecutive" : "from_first";
}

PoolingMode parse_pooling_mode(const std::string& name) {
  if (name == "sequence") return PoolingMode::kSequence;
  if (name == "mean") return PoolingMode::kMean;
  throw std::invalid_argument("unknown pooling mode '" + name + "'");
}

const char* pooling_mode_name(PoolingMode m) {
  return m == PoolingMode::kSequence ? "sequence" : "mean";
}

void ForecastConfig::validate() const {
  if (t_p < 2) throw std::invalid_argument("forecast: t_p must be >= 2");
  if (t_f == 0) throw std::invalid_argument("forecast: t_f must be >= 1");
  if (!(alpha_c >= 0.0 && alpha_c < 1.0)) throw std::invalid_argument("forecast: alpha_c in [0,1)");
  if (local_layers == 0 || global_layers == 0 || entangled_layers == 0 || hidden == 0 ||
      kernel == 0 || frame_hidden == 0) {
    throw std::invalid_argument("forecast: layer counts and widths must be positive");
  }
  if (!(local_lr > 0 && global_lr > 0 && entangled_lr > 0 && codec_lr > 0)) {
    throw std::invalid_argument("forecast: learning rates must be positive");
  }
  if (!(final_lr_fraction > 0.0 && final_lr_fraction <= 1.0)) {
    throw std::invalid_argument("forecast: final_lr_fraction must lie in (0, 1]");
  }
  if (batch == 0) throw std::invalid_argument("forecast: batch must be positive");
  for (double s : {offset_scale, position_scale, residual_scale, depth_scale, translation_scale}) {
    if (!(s > 0.0)) throw std::invalid_argument("forecast: scales must be positive");
  }
}

ForecastExample make_example(const LocomotionSequence& seq, std::size_t t_p, std::size_t t_f,
                             const CompletionModel* completion, double alpha_c) {
  if (seq.size() < t_p + t_f) {
    throw std::invalid_argument("make_example: sequence has " + std::to_string(seq.size()) +
                                " frames, need " + std::to_string(t_p + t_f));
  }
  ForecastExample ex;
  const auto first = seq.frames.begin();
  ex.history.assign(first, first + static_cast<std::ptrdiff_t>(t_p));
  ex.target.assign(first + static_cast<std::ptrdiff_t>(t_p),
                   first + static_cast<std::ptrdiff_t>(t_p + t_f));
  ex.depth.assign(seq.anchor_depth.begin(), seq.anchor_depth.begin() + static_cast<std::ptrdiff_t>(t_p));
  ex.transforms.assign(seq.transforms.begin(),
                       seq.transforms.begin() + static_cast<std::ptrdiff_t>(t_p));
  if (completion) {
    ex.history = complete(ex.history, *completion, alpha_c);
    ex.teacher = complete(ex.target, *completion, alpha_c);
  } else {
    ex.teacher = ex.target;
  }
  return ex;
}

// ---------------------------------------------------------------------------

double weighted_l1_loss(std::span<const Pose> pred, std::span<const Pose> target) {
  return weighted_l1_loss(pred, target, target);
}

double weighted_l1_loss(std::span<const Pose> pred, std::span<const Pose> target,
                        std::span<const Pose> confidences) {
  if (pred.size() != target.size() || pred.size() != confidences.size()) {
    throw std::invalid_argument("weighted_l1_loss: sequence lengths differ");
  }
  if (pred.empty()) throw std::invalid_argument("weighted_l1_loss: empty sequence");
  double total = 0.0;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    for (std::size_t i = 0; i < kJointCount; ++i) {
      const double c = confidences[t][i].c;
      if (c < 0.0 || std::isnan(c)) {
        throw std::invalid_argument("weighted_l1_loss: negative confidence at frame " +
                                    std::to_string(t) + ", joint " + std::to_string(i));
      }
      total += c * (std::abs(pred[t][i].u - target[t][i].u) + std::abs(pred[t][i].v - target[t][i].v));
    }
  }
  return total / static_cast<double>(pred.size() * kJointCount * 2);
}

Var weighted_l1(Graph& g, Var pred, Tensor target, Tensor weights) {
  Var diff = g.abs(g.sub(pred, g.input(std::move(target), "target")));
  return g.mean(g.hadamard(diff, g.input(std::move(weights), "weights")));
}

namespace {

// Time-major stacking: row t * B + b holds example b at timestep t.
std::vector<Var> split_time(Graph& g, Var stacked, std::size_t steps, std::size_t batch) {
  std::vector<Var> out;
  out.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    out.push_back(steps == 1 ? stacked : g.slice(stacked, 0, t * batch, (t + 1) * batch));
  }
  return out;
}

Var stack_time(Graph& g, const std::vector<Var>& steps) {
  return steps.size() == 1 ? steps.front() : g.concat(steps, 0);
}

template <class LossFn>
void run_training(ParameterSet& params, double learning_rate, const ForecastConfig& config,
                  std::span<const ForecastExample> examples, std::uint64_t seed, LossFn loss_fn,
                  std::vector<double>* epoch_loss) {
  if (examples.empty()) throw std::invalid_argument("training: no examples");
  AdamState adam;
  adam.config.learning_rate = learning_rate;
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<ForecastExample> batch;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.final_lr_fraction != 1.0) {
      const double progress = static_cast<double>(epoch) / static_cast<double>(config.epochs);
      adam.config.learning_rate = learning_rate * std::pow(config.final_lr_fraction, progress);
    }
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch) {
      const std::size_t end = std::min(order.size(), start + config.batch);
      batch.clear();
      for (std::size_t k = start; k < end; ++k) batch.push_back(examples[order[k]]);
      params.zero_grad();
      Graph g;
      ParamScope scope(g, params);
      Var loss = loss_fn(g, scope, std::span<const ForecastExample>(batch));
      g.backward(loss);
      adam_step(params, adam);
      total += g.value(loss)[0];
      ++batches;
    }
    if (epoch_loss) epoch_loss->push_back(total / static_cast<double>(batches));
  }
}

void check_lengths(std::span<const ForecastExample> batch, const ForecastConfig& config) {
  if (batch.empty()) throw std::invalid_argument("forecast: empty batch");
  for (const auto& ex : batch) {
    if (ex.history.size() != config.t_p || ex.target.size() != config.t_f ||
        ex.teacher.size() != config.t_f) {
      throw std::invalid_argument("forecast: example does not hold t_p history and t_f future frames");
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Local stream

QrnnEncoderDecoder LocalForecaster::qrnn() const {
  QrnnConfig q;
  q.input_dim = codec_spec.latent_dim();
  q.target_dim = codec_spec.latent_dim();
  q.hidden = config.hidden;
  q.layers = config.local_layers;
  q.kernel = config.kernel;
  q.residual_output = config.local_residual;
  return {q, "local"};
}

AutoencoderSpec codec_spec(const CompletionModel& completion) {
  return {2 * kLocalJointCount, completion.config.widths, completion.config.activation};
}

ParameterSet seed_codec(const CompletionModel& completion) {
  const Autoencoder src = completion.net();
  const Autoencoder dst(codec_spec(completion), "codec");
  const std::size_t n = src.spec().widths.size();
  ParameterSet out;
  const std::size_t a0 = 2 * kAnchorJoint;
  for (std::size_t i = 0; i < n; ++i) {
    for (const char* part : {".W", ".b"}) {
      out.add(dst.enc_name(i) + part, completion.params.value(src.enc_name(i) + part));
      out.add(dst.dec_name(i) + part, completion.params.value(src.dec_name(i) + part));
    }
  }
  // Drop the anchor's two input rows and two output columns.
  const Tensor& w_in = completion.params.value(src.enc_name(0) + ".W");
  Tensor w_in2 = Tensor::matrix(w_in.rows() - 2, w_in.cols());
  for (std::size_t r = 0, k = 0; r < w_in.rows(); ++r) {
    if (r == a0 || r == a0 + 1) continue;
    for (std::size_t c = 0; c < w_in.cols(); ++c) w_in2(k, c) = w_in(r, c);
    ++k;
  }
  out.value(dst.enc_name(0) + ".W") = w_in2;
  const Tensor& w_out = completion.params.value(src.dec_name(n - 1) + ".W");
  const Tensor& b_out = completion.params.value(src.dec_name(n - 1) + ".b");
  Tensor w_out2 = Tensor::matrix(w_out.rows(), w_out.cols() - 2);
  Tensor b_out2 = Tensor::matrix(1, b_out.cols() - 2);
  for (std::size_t c = 0, k = 0; c < w_out.cols(); ++c) {
    if (c == a0 || c == a0 + 1) continue;
    for (std::size_t r = 0; r < w_out.rows(); ++r) w_out2(r, k) = w_out(r, c);
    b_out2(0, k) = b_out(0, c);
    ++k;
  }
  out.value(dst.dec_name(n - 1) + ".W") = w_out2;
  out.value(dst.dec_name(n - 1) + ".b") = b_out2;
  return out;
}

namespace {

void offsets_row(const LocalFrame& f, double scale, double* out) {
  for (std::size_t k = 0; k < kLocalJointCount; ++k) {
    out[2 * k] = f.offset[k].u / scale;
    out[2 * k + 1] = f.offset[k].v / scale;
  }
}

}  // namespace

void train_codec(ParameterSet& codec, const AutoencoderSpec& spec, std::span<const Pose> poses,
                 const ForecastConfig& config, std::uint64_t seed) {
  if (config.codec_steps == 0) return;
  if (poses.empty()) throw std::invalid_argument("train_codec: no confident poses");
  const Autoencoder net(spec, "codec");
  const auto streams = decompose(poses);
  const std::size_t dim = 2 * kLocalJointCount;
  Tensor all = Tensor::matrix(poses.size(), dim);
  for (std::size_t r = 0; r < poses.size(); ++r) {
    offsets_row(streams.local.frames[r], config.offset_scale, all.raw() + r * dim);
  }
  AdamState adam;
  adam.config.learning_rate = config.codec_lr;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, poses.size() - 1);
  const std::size_t batch = std::min<std::size_t>(config.batch, poses.size());
  Tensor x = Tensor::matrix(batch, dim);
  for (std::size_t step = 0; step < config.codec_steps; ++step) {
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t r = pick(rng);
      std::copy(all.raw() + r * dim, all.raw() + (r + 1) * dim, x.raw() + b * dim);
    }
    codec.zero_grad();
    Graph g;
    ParamScope scope(g, codec);
    Var in = g.constant_view(x);
    Var loss = g.mean(g.abs(g.sub(net.reconstruct(scope, in), in)));
    g.backward(loss);
    adam_step(codec, adam);
  }
}

LocalForecaster init_local(const ForecastConfig& config, const CompletionModel& completion,
                           std::span<const Pose> codec_poses, std::uint64_t seed) {
  config.validate();
  LocalForecaster m;
  m.config = config;
  m.codec_spec = codec_spec(completion);
  m.codec = seed_codec(completion);
  train_codec(m.codec, m.codec_spec, codec_poses, config, derive_seed(seed, 1));
  std::mt19937_64 rng(derive_seed(seed, 2));
  m.qrnn().init(m.params, rng);
  return m;
}

namespace {

// Encodes the stacked [steps * B, 48] offsets into per-step latents.
std::vector<Var> encode_offsets(Graph& g, ParamScope& codec_scope, const LocalForecaster& m,
                                const Tensor& stacked, std::size_t steps, std::size_t batch) {
  Var z = m.codec_net().encode(codec_scope, g.input(stacked));
  return split_time(g, z, steps, batch);
}

Var local_forward(Graph& g, ParamScope& scope, ParamScope& codec_scope, const LocalForecaster& m,
                  const Tensor& hist, std::size_t batch, std::size_t t_f, const Tensor* teacher) {
  const auto xs = encode_offsets(g, codec_scope, m, hist, m.config.t_p, batch);
  const auto net = m.qrnn();
  Var context = net.encode(scope, xs);
  std::vector<Var> teach;
  if (teacher) teach = encode_offsets(g, codec_scope, m, *teacher, t_f, batch);
  auto ys = net.decode(scope, context, xs.back(), t_f, teacher ? &teach : nullptr);
  return m.codec_net().decode(codec_scope, stack_time(g, ys));
}

void fill_offsets(Tensor& out, const std::vector<LocalStream>& streams, std::size_t steps,
                  double scale) {
  const std::size_t batch = streams.size();
  const std::size_t dim = 2 * kLocalJointCount;
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t b = 0; b < batch; ++b) {
      offsets_row(streams[b].frames[t], scale, out.raw() + (t * batch + b) * dim);
    }
  }
}

}  // namespace

Var local_loss(Graph& g, ParamScope& scope, const LocalForecaster& model,
               std::span<const ForecastExample> batch, bool teacher) {
  const auto& cfg = model.config;
  check_lengths(batch, cfg);
  const std::size_t B = batch.size();
  const std::size_t dim = 2 * kLocalJointCount;
  Tensor hist = Tensor::matrix(cfg.t_p * B, dim);
  Tensor teach = Tensor::matrix(cfg.t_f * B, dim);
  Tensor target = Tensor::matrix(cfg.t_f * B, dim);
  Tensor weights = Tensor::matrix(cfg.t_f * B, dim);
  std::vector<LocalStream> h, te;
  for (const auto& ex : batch) {
    h.push_back(decompose(ex.history, MissingJoints::kAllow).local);
    te.push_back(decompose(ex.teacher, MissingJoints::kAllow).local);
  }
  fill_offsets(hist, h, cfg.t_p, cfg.offset_scale);
  fill_offsets(teach, te, cfg.t_f, cfg.offset_scale);
  for (std::size_t t = 0; t < cfg.t_f; ++t) {
    for (std::size_t b = 0; b < B; ++b) {
      const Pose& p = batch[b].target[t];
      const Keypoint& a = p.anchor();
      for (std::size_t k = 0; k < kLocalJointCount; ++k) {
        const Keypoint& q = p[local_to_joint(k)];
        const std::size_t row = t * B + b;
        target(row, 2 * k) = (q.u - a.u) / cfg.offset_scale;
        target(row, 2 * k + 1) = (q.v - a.v) / cfg.offset_scale;
        weights(row, 2 * k) = weights(row, 2 * k + 1) = q.c * a.c;
      }
    }
  }
  ParamScope codec_scope(g, static_cast<const ParameterSet&>(model.codec));
  Var pred = local_forward(g, scope, codec_scope, model, hist, B, cfg.t_f,
                           teacher ? &teach : nullptr);
  return weighted_l1(g, pred, target, weights);
}

void train_local(LocalForecaster& model, std::span<const ForecastExample> examples,
                 std::uint64_t seed, std::vector<double>* epoch_loss) {
  const bool teacher = model.config.teacher_forcing;
  run_training(model.params, model.config.local_lr, model.config, examples, seed,
               [&](Graph& g, ParamScope& scope, std::span<const ForecastExample> batch) {
                 return local_loss(g, scope, model, batch, teacher);
               },
               epoch_loss);
}

std::vector<LocalStream> forecast_local(std::span<const LocalStream> histories,
                                        const LocalForecaster& model) {
  const auto& cfg = model.config;
  if (histories.empty()) return {};
  for (const auto& h : histories) {
    if (h.size() != cfg.t_p) {
      throw std::invalid_argument("forecast_local: history has " + std::to_string(h.size()) +
                                  " frames, model expects t_p = " + std::to_string(cfg.t_p));
    }
  }
  const std::size_t B = histories.size();
  const std::size_t dim = 2 * kLocalJointCount;
  Tensor hist = Tensor::matrix(cfg.t_p * B, dim);
  fill_offsets(hist, std::vector<LocalStream>(histories.begin(), histories.end()), cfg.t_p,
               cfg.offset_scale);
  Graph g;
  ParamScope scope(g, static_cast<const ParameterSet&>(model.params));
  ParamScope codec_scope(g, static_cast<const ParameterSet&>(model.codec));
  const Tensor& y = g.value(local_forward(g, scope, codec_scope, model, hist, B, cfg.t_f, nullptr));
  std::vector<LocalStream> out(B);
  for (std::size_t b = 0; b < B; ++b) {
    out[b].frames.resize(cfg.t_f);
    for (std::size_t t = 0; t < cfg.t_f; ++t) {
      LocalFrame& f = out[b].frames[t];
      for (std::size_t k = 0; k < kLocalJointCount; ++k) {
        f.offset[k] = {snap_to_lattice(y(t * B + b, 2 * k) * cfg.offset_scale),
                       snap_to_lattice(y(t * B + b, 2 * k + 1) * cfg.offset_scale)};
        f.confidence[k] = 1.0;
      }
    }
  }
  return out;
}

LocalStream forecast_local(const LocalStream& history, const LocalForecaster& model) {
  return forecast_local(std::span<const LocalStream>(&history, 1), model).front();
}

// ---------------------------------------------------------------------------
// Global stream

void FrameEncoder::init(ParameterSet& params, std::mt19937_64& rng) const {
  init_dense(params, "frame.l0", kFrameFeatureCount, hidden, rng);
  init_dense(params, "frame.l1", hidden, 2, rng);
}

Var FrameEncoder::operator()(ParamScope& scope, Var features) const {
  return dense(scope, "frame.l1", dense(scope, "frame.l0", features, Activation::kTanh),
               Activation::kLinear);
}

AnchorReference anchor_reference(const GlobalStream& hist) {
  AnchorReference ref;
  std::vector<std::size_t> seen;
  for (std::size_t t = 0; t < hist.size(); ++t) {
    if (t >= hist.confidence.size() || hist.confidence[t] > 0.0) seen.push_back(t);
  }
  if (seen.empty()) return ref;
  ref.first = hist.anchor[seen.front()];
  ref.last = hist.anchor[seen.back()];
  if (seen.size() >= 2) {
    const std::size_t a = seen[seen.size() - 2];
    const std::size_t b = seen.back();
    const double gap = static_cast<double>(b - a);
    ref.velocity = {(hist.anchor[b].u - hist.anchor[a].u) / gap,
                    (hist.anchor[b].v - hist.anchor[a].v) / gap};
  }
  return ref;
}

std::array<double, kFrameFeatureCount> frame_features(const GlobalStream& hist, std::size_t t,
                                                      const ForecastConfig& cfg) {
  std::array<double, kFrameFeatureCount> f{};
  const Vec2 origin = anchor_reference(hist).first;
  const bool seen = t >= hist.confidence.size() || hist.confidence[t] > 0.0;
  if (seen) {
    f[0] = (hist.anchor[t].u - origin.u) / cfg.position_scale;
    f[1] = (hist.anchor[t].v - origin.v) / cfg.position_scale;
  }
  f[2] = t < hist.depth.size() ? hist.depth[t] / cfg.depth_scale : 0.0;
  f[3] = t < hist.confidence.size() ? hist.confidence[t] : 1.0;
  if (cfg.use_transforms && t < hist.transforms.size()) {
    const auto& m = hist.transforms[t].m;
    for (std::size_t r = 0; r < 3; ++r) {
      for (std::size_t c = 0; c < 3; ++c) f[4 + 3 * r + c] = m[4 * r + c] - (r == c ? 1.0 : 0.0);
      f[13 + r] = m[4 * r + 3] / cfg.translation_scale;
    }
  }
  return f;
}

QrnnEncoderDecoder GlobalForecaster::qrnn() const {
  QrnnConfig q;
  q.input_dim = 2;
  q.target_dim = 2;
  q.hidden = config.hidden;
  q.layers = config.global_layers;
  q.kernel = config.kernel;
  return {q, "global"};
}

GlobalForecaster init_global(const ForecastConfig& config, std::uint64_t seed) {
  config.validate();
  GlobalForecaster m;
  m.config = config;
  std::mt19937_64 rng(seed);
  m.frame_encoder().init(m.params, rng);
  m.qrnn().init(m.params, rng);
  return m;
}

std::vector<Vec2> residuals_to_positions(std::span<const Vec2> residuals, Vec2 first, Vec2 last,
                                         ResidualMode mode) {
  std::vector<Vec2> out;
  out.reserve(residuals.size());
  Vec2 acc = last;
  for (const Vec2& r : residuals) {
    if (mode == ResidualMode::kConsecutive) {
      acc = {acc.u + r.u, acc.v + r.v};
      out.push_back(acc);
    } else {
      out.push_back({first.u + r.u, first.v + r.v});
    }
  }
  return out;
}

namespace {

bool is_identity(const TransformSE3& t) {
  const auto& id = TransformSE3::identity().m;
  for (std::size_t k = 0; k < id.size(); ++k) {
    if (std::abs(t.m[k] - id[k]) > 1e-12) return false;
  }
  return true;
}

void check_global_history(const GlobalStream& h, std::size_t t_p) {
  if (h.size() != t_p) {
    throw std::invalid_argument("forecast_global: history has " + std::to_string(h.size()) +
                                " frames, model expects t_p = " + std::to_string(t_p));
  }
  if (!h.transforms.empty() && !is_identity(h.transforms.front())) {
    throw std::invalid_argument(
        "forecast_global: transforms[0] must be the identity (history in the first camera frame)");
  }
}

double output_scale(const ForecastConfig& cfg) {
  return cfg.residual_mode == ResidualMode::kConsecutive ? cfg.residual_scale : cfg.position_scale;
}

// Decoder inputs for one step: the residual of frame `t` of `track` (with
// `prev` the position before it).
Vec2 residual_of(Vec2 p, Vec2 prev, Vec2 first, const ForecastConfig& cfg) {
  const double s = output_scale(cfg);
  if (cfg.residual_mode == ResidualMode::kConsecutive) return {(p.u - prev.u) / s, (p.v - prev.v) / s};
  return {(p.u - first.u) / s, (p.v - first.v) / s};
}

// Returns predicted decoder outputs as [t_f * B, 2] in output-scale units,
// already accumulated to positions relative to the reference point.
Var global_forward(Graph& g, ParamScope& scope, const GlobalForecaster& m,
                   const std::vector<GlobalStream>& hist, std::size_t t_f, Tensor& features,
                   Tensor& seed, const Tensor* teacher) {
  const auto& cfg = m.config;
  const std::size_t B = hist.size();
  const std::size_t t_p = cfg.t_p;
  for (std::size_t t = 0; t < t_p; ++t) {
    for (std::size_t b = 0; b < B; ++b) {
      const auto f = frame_features(hist[b], t, cfg);
      std::copy(f.begin(), f.end(), features.raw() + (t * B + b) * kFrameFeatureCount);
    }
  }
  for (std::size_t b = 0; b < B; ++b) {
    const AnchorReference ref = anchor_reference(hist[b]);
    const Vec2 prev{ref.last.u - ref.velocity.u, ref.last.v - ref.velocity.v};
    const Vec2 r = residual_of(ref.last, prev, ref.first, cfg);
    seed(b, 0) = r.u;
    seed(b, 1) = r.v;
  }
  Var x = m.frame_encoder()(scope, g.input(features));
  std::vector<Var> xs = split_time(g, x, t_p, B);
  if (cfg.pooling_mode == PoolingMode::kMean) {
    Var acc = xs.front();
    for (std::size_t t = 1; t < xs.size(); ++t) acc = g.add(acc, xs[t]);
    xs = {g.scale(acc, 1.0 / static_cast<double>(t_p))};
  }
  const auto net = m.qrnn();
  Var context = net.encode(scope, xs);
  std::vector<Var> teach;
  if (teacher) teach = split_time(g, g.input(*teacher), t_f, B);
  auto ys = net.decode(scope, context, g.input(seed), t_f, teacher ? &teach : nullptr);
  if (cfg.residual_mode == ResidualMode::kConsecutive) {
    for (std::size_t j = 1; j < ys.size(); ++j) ys[j] = g.add(ys[j - 1], ys[j]);
  }
  return stack_time(g, ys);
}

}  // namespace

Var global_loss(Graph& g, ParamScope& scope, const GlobalForecaster& model,
                std::span<const ForecastExample> batch, bool teacher) {
  const auto& cfg = model.config;
  check_lengths(batch, cfg);
  const std::size_t B = batch.size();
  Tensor features = Tensor::matrix(cfg.t_p * B, kFrameFeatureCount);
  Tensor seed = Tensor::matrix(B, 2);
  Tensor teach = Tensor::matrix(cfg.t_f * B, 2);
  Tensor target = Tensor::matrix(cfg.t_f * B, 2);
  Tensor weights = Tensor::matrix(cfg.t_f * B, 2);
  std::vector<GlobalStream> hist;
  const double s = output_scale(cfg);
  for (std::size_t b = 0; b < B; ++b) {
    const auto& ex = batch[b];
    GlobalStream gs = decompose(ex.history, MissingJoints::kAllow).global;
    gs.depth = ex.depth;
    gs.transforms = ex.transforms;
    const AnchorReference aref = anchor_reference(gs);
    const Vec2 first = aref.first;
    const Vec2 last = aref.last;
    const Vec2 ref = cfg.residual_mode == ResidualMode::kConsecutive ? last : first;
    Vec2 prev = last;
    for (std::size_t t = 0; t < cfg.t_f; ++t) {
      const std::size_t row = t * B + b;
      const Keypoint& a = ex.target[t].anchor();
      target(row, 0) = (a.u - ref.u) / s;
      target(row, 1) = (a.v - ref.v) / s;
      weights(row, 0) = weights(row, 1) = a.c;
      const Vec2 tp = ex.teacher[t].anchor().position();
      const Vec2 r = residual_of(tp, prev, first, cfg);
      teach(row, 0) = r.u;
      teach(row, 1) = r.v;
      prev = tp;
    }
    hist.push_back(std::move(gs));
  }
  Var pred = global_forward(g, scope, model, hist, cfg.t_f, features, seed, teacher ? &teach : nullptr);
  return weighted_l1(g, pred, target, weights);
}

void train_global(GlobalForecaster& model, std::span<const ForecastExample> examples,
                  std::uint64_t seed, std::vector<double>* epoch_loss) {
  const bool teacher = model.config.teacher_forcing;
  run_training(model.params, model.config.global_lr, model.config, examples, seed,
               [&](Graph& g, ParamScope& scope, std::span<const ForecastExample> batch) {
                 return global_loss(g, scope, model, batch, teacher);
               },
               epoch_loss);
}

std::vector<std::vector<Vec2>> forecast_global(std::span<const GlobalStream> histories,
                                               const GlobalForecaster& model,
                                               std::optional<std::size_t> t_f_opt) {
  const auto& cfg = model.config;
  const std::size_t t_f = t_f_opt.value_or(cfg.t_f);
  if (histories.empty()) return {};
  for (const auto& h : histories) check_global_history(h, cfg.t_p);
  const std::size_t B = histories.size();
  Tensor features = Tensor::matrix(cfg.t_p * B, kFrameFeatureCount);
  Tensor seed = Tensor::matrix(B, 2);
  Graph g;
  ParamScope scope(g, static_cast<const ParameterSet&>(model.params));
  const std::vector<GlobalStream> hist(histories.begin(), histories.end());
  const Tensor& y = g.value(global_forward(g, scope, model, hist, t_f, features, seed, nullptr));
  const double s = output_scale(cfg);
  std::vector<std::vector<Vec2>> out(B);
  for (std::size_t b = 0; b < B; ++b) {
    const AnchorReference aref = anchor_reference(hist[b]);
    const Vec2 ref = cfg.residual_mode == ResidualMode::kConsecutive ? aref.last : aref.first;
    for (std::size_t t = 0; t < t_f; ++t) {
      out[b].push_back({snap_to_lattice(ref.u + y(t * B + b, 0) * s),
                        snap_to_lattice(ref.v + y(t * B + b, 1) * s)});
    }
  }
  return out;
}

std::vector<Vec2> forecast_global(const GlobalStream& history, const GlobalForecaster& model,
                                  std::optional<std::size_t> t_f) {
  return forecast_global(std::span<const GlobalStream>(&history, 1), model, t_f).front();
}

// ---------------------------------------------------------------------------
// Entangled

QrnnEncoderDecoder EntangledForecaster::qrnn() const {
  QrnnConfig q;
  q.input_dim = 2 * kJointCount;
  q.target_dim = 2 * kJointCount;
  q.hidden = config.hidden;
  q.layers = config.entangled_layers;
  q.kernel = config.kernel;
  return {q, "entangled"};
}

EntangledForecaster init_entangled(const ForecastConfig& config, double frame_width,
                                   double frame_height, std::uint64_t seed) {
  config.validate();
  EntangledForecaster m;
  m.config = config;
  m.frame_width = frame_width;
  m.frame_height = frame_height;
  std::mt19937_64 rng(seed);
  m.qrnn().init(m.params, rng);
  return m;
}

namespace {

void fill_pose_rows(Tensor& out, const std::vector<const std::vector<Pose>*>& seqs,
                    std::size_t steps, double w, double h) {
  const std::size_t B = seqs.size();
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t b = 0; b < B; ++b) {
      pose_to_row((*seqs[b])[t], w, h, out.raw() + (t * B + b) * 2 * kJointCount);
    }
  }
}

Var entangled_forward(Graph& g, ParamScope& scope, const EntangledForecaster& m, const Tensor& hist,
                      std::size_t B, const Tensor* teacher) {
  const auto& cfg = m.config;
  const auto xs = split_time(g, g.input(hist), cfg.t_p, B);
  const auto net = m.qrnn();
  Var context = net.encode(scope, xs);
  std::vector<Var> teach;
  if (teacher) teach = split_time(g, g.input(*teacher), cfg.t_f, B);
  return stack_time(g, net.decode(scope, context, xs.back(), cfg.t_f, teacher ? &teach : nullptr));
}

}  // namespace

Var entangled_loss(Graph& g, ParamScope& scope, const EntangledForecaster& model,
                   std::span<const ForecastExample> batch, bool teacher) {
  const auto& cfg = model.config;
  check_lengths(batch, cfg);
  const std::size_t B = batch.size();
  const std::size_t dim = 2 * kJointCount;
  Tensor hist = Tensor::matrix(cfg.t_p * B, dim);
  Tensor teach = Tensor::matrix(cfg.t_f * B, dim);
  Tensor target = Tensor::matrix(cfg.t_f * B, dim);
  Tensor weights = Tensor::matrix(cfg.t_f * B, dim);
  std::vector<const std::vector<Pose>*> h, te, ta;
  for (const auto& ex : batch) {
    h.push_back(&ex.history);
    te.push_back(&ex.teacher);
    ta.push_back(&ex.target);
  }
  fill_pose_rows(hist, h, cfg.t_p, model.frame_width, model.frame_height);
  fill_pose_rows(teach, te, cfg.t_f, model.frame_width, model.frame_height);
  fill_pose_rows(target, ta, cfg.t_f, model.frame_width, model.frame_height);
  for (std::size_t t = 0; t < cfg.t_f; ++t) {
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t i = 0; i < kJointCount; ++i) {
        const double c = (*ta[b])[t][i].c;
        weights(t * B + b, 2 * i) = weights(t * B + b, 2 * i + 1) = c;
      }
    }
  }
  Var pred = entangled_forward(g, scope, model, hist, B, teacher ? &teach : nullptr);
  return weighted_l1(g, pred, target, weights);
}

void train_entangled(EntangledForecaster& model, std::span<const ForecastExample> examples,
                     std::uint64_t seed, std::vector<double>* epoch_loss) {
  const bool teacher = model.config.teacher_forcing;
  run_training(model.params, model.config.entangled_lr, model.config, examples, seed,
               [&](Graph& g, ParamScope& scope, std::span<const ForecastExample> batch) {
                 return entangled_loss(g, scope, model, batch, teacher);
               },
               epoch_loss);
}

std::vector<std::vector<Pose>> forecast_entangled(std::span<const std::vector<Pose>> histories,
                                                  const EntangledForecaster& model) {
  const auto& cfg = model.config;
  if (histories.empty()) return {};
  std::vector<const std::vector<Pose>*> h;
  for (const auto& s : histories) {
    if (s.size() != cfg.t_p) {
      throw std::invalid_argument("forecast_entangled: history has " + std::to_string(s.size()) +
                                  " frames, model expects t_p = " + std::to_string(cfg.t_p));
    }
    h.push_back(&s);
  }
  const std::size_t B = histories.size();
  Tensor hist = Tensor::matrix(cfg.t_p * B, 2 * kJointCount);
  fill_pose_rows(hist, h, cfg.t_p, model.frame_width, model.frame_height);
  Graph g;
  ParamScope scope(g, static_cast<const ParameterSet&>(model.params));
  const Tensor& y = g.value(entangled_forward(g, scope, model, hist, B, nullptr));
  std::vector<std::vector<Pose>> out(B, std::vector<Pose>(cfg.t_f));
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t t = 0; t < cfg.t_f; ++t) {
      for (std::size_t i = 0; i < kJointCount; ++i) {
        out[b][t][i] = {snap_to_lattice(y(t * B + b, 2 * i) * model.frame_width),
                        snap_to_lattice(y(t * B + b, 2 * i + 1) * model.frame_height), 1.0};
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pipeline

std::vector<std::vector<Pose>> forecast_locomotion(std::span<const LocomotionSequence> sequences,
                                                   const CompletionModel* completion,
                                                   const StreamModels& models, std::size_t t_p,
                                                   std::size_t t_f, double alpha_c) {
  const std::size_t n = sequences.size();
  std::vector<GlobalStream> globals(n);
  std::vector<LocalStream> locals(n);
  for (std::size_t s = 0; s < n; ++s) {
    const auto& seq = sequences[s];
    if (seq.size() < t_p) {
      throw PipelineError("input", "sequence " + std::to_string(s) + " has fewer than t_p frames");
    }
    std::vector<Pose> hist(seq.frames.begin(), seq.frames.begin() + static_cast<std::ptrdiff_t>(t_p));
    if (completion) {
      try {
        hist = complete(hist, *completion, alpha_c);
      } catch (const std::exception& e) {
        throw PipelineError("complete", e.what());
      }
    }
    try {
      auto sp = decompose(hist, completion ? MissingJoints::kReject : MissingJoints::kAllow);
      globals[s] = std::move(sp.global);
      locals[s] = std::move(sp.local);
    } catch (const std::exception& e) {
      throw PipelineError("decompose", e.what());
    }
    globals[s].depth.assign(seq.anchor_depth.begin(),
                            seq.anchor_depth.begin() + static_cast<std::ptrdiff_t>(t_p));
    globals[s].transforms.assign(seq.transforms.begin(),
                                 seq.transforms.begin() + static_cast<std::ptrdiff_t>(t_p));
  }

  std::vector<LocalStream> local_future(n);
  if (models.local) {
    if (models.local->config.t_f != t_f) throw PipelineError("forecast_local", "t_f mismatch");
    try {
      local_future = forecast_local(locals, *models.local);
    } catch (const std::exception& e) {
      throw PipelineError("forecast_local", e.what());
    }
  } else {
    for (std::size_t s = 0; s < n; ++s) local_future[s].frames.assign(t_f, locals[s].frames.back());
  }

  std::vector<GlobalStream> global_future(n);
  if (models.global) {
    try {
      auto tracks = forecast_global(globals, *models.global, t_f);
      for (std::size_t s = 0; s < n; ++s) {
        global_future[s].anchor = std::move(tracks[s]);
        global_future[s].confidence.assign(t_f, 1.0);
      }
    } catch (const std::exception& e) {
      throw PipelineError("forecast_global", e.what());
    }
  } else {
    for (std::size_t s = 0; s < n; ++s) {
      global_future[s].anchor.assign(t_f, globals[s].anchor.back());
      global_future[s].confidence.assign(t_f, globals[s].confidence.back());
    }
  }

  std::vector<std::vector<Pose>> out(n);
  for (std::size_t s = 0; s < n; ++s) {
    try {
      out[s] = recombine(global_future[s], local_future[s]);
    } catch (const std::exception& e) {
      throw PipelineError("recombine", e.what());
    }
  }
  return out;
}

std::vector<Pose> forecast_locomotion(const LocomotionSequence& seq, const CompletionModel& completion,
                                      const LocalForecaster& local, const GlobalForecaster& global) {
  if (local.config.t_p != global.config.t_p || local.config.t_f != global.config.t_f) {
    throw PipelineError("input", "local and global models disagree on t_p/t_f");
  }
  if (local.codec_spec.latent_dim() != completion.config.widths.back()) {
    throw PipelineError("input", "local codec latent width differs from the completion model's");
  }
  return forecast_locomotion(std::span<const LocomotionSequence>(&seq, 1), &completion,
                             {&local, &global}, local.config.t_p, local.config.t_f,
                             completion.config.alpha_c)
      .front();
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

using nlohmann::json;
constexpr int kManifestVersion = 1;

std::filesystem::path manifest_path(const std::filesystem::path& dir) { return dir / "manifest.json"; }

json read_manifest(const std::filesystem::path& dir) {
  std::ifstream in(manifest_path(dir));
  if (!in) return json{{"schema_version", kManifestVersion}, {"models", json::object()}};
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw CheckpointError(manifest_path(dir).string() + ": " + e.what());
  }
  if (j.value("schema_version", 0) != kManifestVersion) {
    throw CheckpointError(manifest_path(dir).string() + ": unsupported schema_version");
  }
  return j;
}

void write_manifest(const std::filesystem::path& dir, const json& j) {
  std::ofstream out(manifest_path(dir));
  if (!out) throw CheckpointError("cannot write " + manifest_path(dir).string());
  out << j.dump(2) << '\n';
}

void record(const std::filesystem::path& dir, const std::string& name, const json& entry,
            const ForecastConfig* fc) {
  std::filesystem::create_directories(dir);
  json m = read_manifest(dir);
  m["models"][name] = entry;
  if (fc) {
    m["t_p"] = fc->t_p;
    m["t_f"] = fc->t_f;
    m["N_local"] = fc->local_layers;
    m["N_global"] = fc->global_layers;
    m["residual_mode"] = residual_mode_name(fc->residual_mode);
    m["pooling_mode"] = pooling_mode_name(fc->pooling_mode);
  }
  write_manifest(dir, m);
}

const json& entry_of(const std::filesystem::path& dir, const json& m, const std::string& name) {
  if (!m["models"].contains(name)) {
    throw CheckpointError(manifest_path(dir).string() + ": no '" + name + "' model");
  }
  return m["models"][name];
}

ForecastConfig forecast_config_of(const json& entry, const std::string& where) {
  ForecastConfig c;
  read_json(entry.at("config"), c, where);
  return c;
}

void require_names(const ParameterSet& params, const ParameterSet& expected, const std::string& what) {
  if (params.names() != expected.names()) {
    throw CheckpointError(what + ": parameter names do not match the configured architecture");
  }
  for (const auto& n : expected.names()) {
    if (params.value(n).shape() != expected.value(n).shape()) {
      throw CheckpointError(what + ": shape mismatch for '" + n + "'");
    }
  }
}

}  // namespace

void save_completion(const std::filesystem::path& dir, const CompletionModel& model) {
  std::filesystem::create_directories(dir);
  save_parameters(dir / "completion.ckpt", model.params);
  json e{{"file", "completion.ckpt"}, {"config", to_json_value(model.config)}};
  record(dir, "completion", e, nullptr);
  json m = read_manifest(dir);
  m["d_ae"] = model.config.widths.back();
  m["alpha_c"] = model.config.alpha_c;
  write_manifest(dir, m);
}

CompletionModel load_completion(const std::filesystem::path& dir) {
  const json m = read_manifest(dir);
  const json& e = entry_of(dir, m, "completion");
  CompletionModel model;
  read_json(e.at("config"), model.config, "completion.config");
  model.params = load_parameters(dir / "completion.ckpt");
  ParameterSet expect;
  std::mt19937_64 rng(0);
  model.net().init(expect, rng);
  require_names(model.params, expect, "completion.ckpt");
  return model;
}

void save_local(const std::filesystem::path& dir, const LocalForecaster& model) {
  std::filesystem::create_directories(dir);
  ParameterSet all = model.params;
  for (const auto& n : model.codec.names()) all.add(n, model.codec.value(n));
  save_parameters(dir / "local.ckpt", all);
  json spec{{"input_dim", model.codec_spec.input_dim},
            {"widths", model.codec_spec.widths},
            {"activation", activation_name(model.codec_spec.activation)}};
  json e{{"file", "local.ckpt"}, {"config", to_json_value(model.config)}, {"codec", spec}};
  record(dir, "local", e, &model.config);
}

LocalForecaster load_local(const std::filesystem::path& dir) {
  const json m = read_manifest(dir);
  const json& e = entry_of(dir, m, "local");
  LocalForecaster model;
  model.config = forecast_config_of(e, "local.config");
  try {
    model.codec_spec.input_dim = e.at("codec").at("input_dim").get<std::size_t>();
    model.codec_spec.widths = e.at("codec").at("widths").get<std::vector<std::size_t>>();
    model.codec_spec.activation = parse_activation(e.at("codec").at("activation").get<std::string>());
  } catch (const std::exception& ex) {
    throw CheckpointError(manifest_path(dir).string() + ": local.codec: " + ex.what());
  }
  ParameterSet all = load_parameters(dir / "local.ckpt");
  for (const auto& n : all.names()) {
    (n.rfind("codec.", 0) == 0 ? model.codec : model.params).add(n, all.value(n));
  }
  ParameterSet expect_codec, expect_qrnn;
  std::mt19937_64 rng(0);
  model.codec_net().init(expect_codec, rng);
  model.qrnn().init(expect_qrnn, rng);
  require_names(model.codec, expect_codec, "local.ckpt codec");
  require_names(model.params, expect_qrnn, "local.ckpt qrnn");
  return model;
}

void save_global(const std::filesystem::path& dir, const GlobalForecaster& model) {
  std::filesystem::create_directories(dir);
  save_parameters(dir / "global.ckpt", model.params);
  json e{{"file", "global.ckpt"}, {"config", to_json_value(model.config)}};
  record(dir, "global", e, &model.config);
}

GlobalForecaster load_global(const std::filesystem::path& dir) {
  const json m = read_manifest(dir);
  GlobalForecaster model;
  model.config = forecast_config_of(entry_of(dir, m, "global"), "global.config");
  model.params = load_parameters(dir / "global.ckpt");
  require_names(model.params, init_global(model.config, 0).params, "global.ckpt");
  return model;
}

void save_entangled(const std::filesystem::path& dir, const EntangledForecaster& model) {
  std::filesystem::create_directories(dir);
  save_parameters(dir / "entangled.ckpt", model.params);
  json e{{"file", "entangled.ckpt"},
         {"config", to_json_value(model.config)},
         {"frame_width", model.frame_width},
         {"frame_height", model.frame_height}};
  record(dir, "entangled", e, &model.config);
}

EntangledForecaster load_entangled(const std::filesystem::path& dir) {
  const json m = read_manifest(dir);
  const json& e = entry_of(dir, m, "entangled");
  EntangledForecaster model;
  model.config = forecast_config_of(e, "entangled.config");
  model.frame_width = e.value("frame_width", 1280.0);
  model.frame_height = e.value("frame_height", 720.0);
  model.params = load_parameters(dir / "entangled.ckpt");
  require_names(model.params,
                init_entangled(model.config, model.frame_width, model.frame_height, 0).params,
                "entangled.ckpt");
  return model;
}

}  // namespace loco

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "loco/completion.hpp"
#include "loco/qrnn.hpp"
#include "loco/streams.hpp"

namespace loco {

/// Decoder target of the global stream.
enum class ResidualMode {
  kConsecutive,  // per-frame displacement, summed from the last observed anchor
  kFromFirst,    // displacement from the first observed anchor
};
ResidualMode parse_residual_mode(const std::string& name);
const char* residual_mode_name(ResidualMode m);

/// How the frame encodings reach the QRNN encoder.
enum class PoolingMode {
  kSequence,  // the sequence of x_alpha is the encoder input
  kMean,      // a single step holding their mean
};
PoolingMode parse_pooling_mode(const std::string& name);
const char* pooling_mode_name(PoolingMode m);

struct ForecastConfig {
  std::size_t t_p = 15;
  std::size_t t_f = 15;
  double alpha_c = kDefaultConfidenceThreshold;

  std::size_t local_layers = 4;
  std::size_t global_layers = 2;
  std::size_t entangled_layers = 2;
  std::size_t hidden = 32;
  std::size_t kernel = 2;
  std::size_t frame_hidden = 16;

  double local_lr = 1e-4;
  double global_lr = 1e-3;
  double entangled_lr = 1e-3;
  std::size_t epochs = 60;
  /// Geometric per-epoch decay to learning rate * final_lr_fraction (1 = constant).
  double final_lr_fraction = 1.0;
  std::size_t batch = 32;
  bool teacher_forcing = false;
  /// Local decoder predicts the change of the latent rather than the latent.
  bool local_residual = true;

  double codec_lr = 1e-3;
  std::size_t codec_steps = 4000;

  ResidualMode residual_mode = ResidualMode::kConsecutive;
  PoolingMode pooling_mode = PoolingMode::kSequence;
  /// Transform-blind ablation feeds the identity instead of T_alpha.
  bool use_transforms = true;

  // Fixed input/output scalings.
  double offset_scale = 100.0;     // px
  double position_scale = 100.0;   // px
  double residual_scale = 10.0;    // px
  double depth_scale = 10.0;       // m
  double translation_scale = 5.0;  // m

  void validate() const;
};

/// Input/target bundle for one sequence. `history` is what the model sees
/// (completed poses, or raw detections for the ablations); `target` holds the
/// original future detections whose confidences weight the loss; `teacher`
/// holds the decoder inputs used under teacher forcing.
struct ForecastExample {
  std::vector<Pose> history;
  std::vector<double> depth;
  std::vector<TransformSE3> transforms;
  std::vector<Pose> target;
  std::vector<Pose> teacher;
};

/// Splits a sequence of at least t_p + t_f frames. With a completion model the
/// history and teacher frames are completed; targets never are.
ForecastExample make_example(const LocomotionSequence& seq, std::size_t t_p, std::size_t t_f,
                             const CompletionModel* completion, double alpha_c);

/// Mean over frames, joints and both coordinates of c * |pred - target| using
/// the target confidences. Throws on a negative confidence or length mismatch.
double weighted_l1_loss(std::span<const Pose> pred, std::span<const Pose> target);
double weighted_l1_loss(std::span<const Pose> pred, std::span<const Pose> target,
                        std::span<const Pose> confidences);
/// Graph form: mean(weights * |pred - target|).
Var weighted_l1(Graph& g, Var pred, Tensor target, Tensor weights);

// ---------------------------------------------------------------------------
// Local stream

struct LocalForecaster {
  ForecastConfig config;
  AutoencoderSpec codec_spec;
  ParameterSet codec;   // frozen spatial encoder/decoder, prefix "codec"
  ParameterSet params;  // QRNN, prefix "local"

  Autoencoder codec_net() const { return Autoencoder(codec_spec, "codec"); }
  QrnnEncoderDecoder qrnn() const;
};

/// Spatial codec for the 48 local offsets, initialized from the completion
/// autoencoder with the anchor's input rows and output columns removed.
ParameterSet seed_codec(const CompletionModel& completion);
AutoencoderSpec codec_spec(const CompletionModel& completion);

/// Fine-tunes the codec as a plain autoencoder on offsets of fully confident
/// poses (scaled by offset_scale).
void train_codec(ParameterSet& codec, const AutoencoderSpec& spec, std::span<const Pose> poses,
                 const ForecastConfig& config, std::uint64_t seed);

LocalForecaster init_local(const ForecastConfig& config, const CompletionModel& completion,
                           std::span<const Pose> codec_poses, std::uint64_t seed);
void train_local(LocalForecaster& model, std::span<const ForecastExample> examples,
                 std::uint64_t seed, std::vector<double>* epoch_loss = nullptr);

/// Builds the batch loss; exposed for gradient checking.
Var local_loss(Graph& g, ParamScope& scope, const LocalForecaster& model,
               std::span<const ForecastExample> batch, bool teacher);

/// Throws std::invalid_argument if the history does not hold t_p frames.
LocalStream forecast_local(const LocalStream& history, const LocalForecaster& model);
std::vector<LocalStream> forecast_local(std::span<const LocalStream> histories,
                                        const LocalForecaster& model);

// ---------------------------------------------------------------------------
// Global stream

inline constexpr std::size_t kFrameFeatureCount = 16;

/// Two-layer perceptron applied to every frame with shared weights:
/// 16 -> frame_hidden (tanh) -> 2. Parameters frame.l0, frame.l1.
struct FrameEncoder {
  std::size_t hidden = 16;

  void init(ParameterSet& params, std::mt19937_64& rng) const;
  Var operator()(ParamScope& scope, Var features) const;
};

/// First and last detected anchor positions of a history and the per-frame
/// velocity between the last two detections. Frames whose anchor confidence
/// is 0 are skipped; with no detection at all everything is zero.
struct AnchorReference {
  Vec2 first;
  Vec2 last;
  Vec2 velocity;
};
AnchorReference anchor_reference(const GlobalStream& hist);

/// Per-frame inputs: anchor position relative to the first detected anchor
/// (zero where undetected), depth, confidence, the rotation block minus
/// identity and the translation, each divided by its configured scale.
std::array<double, kFrameFeatureCount> frame_features(const GlobalStream& hist, std::size_t t,
                                                      const ForecastConfig& config);

struct GlobalForecaster {
  ForecastConfig config;
  ParameterSet params;  // prefixes "frame" and "global"

  FrameEncoder frame_encoder() const { return {config.frame_hidden}; }
  QrnnEncoderDecoder qrnn() const;
};

GlobalForecaster init_global(const ForecastConfig& config, std::uint64_t seed);
void train_global(GlobalForecaster& model, std::span<const ForecastExample> examples,
                  std::uint64_t seed, std::vector<double>* epoch_loss = nullptr);
Var global_loss(Graph& g, ParamScope& scope, const GlobalForecaster& model,
                std::span<const ForecastExample> batch, bool teacher);

/// Anchor track for t_f frames (config.t_f unless given). Throws if the
/// history length is wrong or transforms[0] is not the identity.
std::vector<Vec2> forecast_global(const GlobalStream& history, const GlobalForecaster& model,
                                  std::optional<std::size_t> t_f = std::nullopt);
std::vector<std::vector<Vec2>> forecast_global(std::span<const GlobalStream> histories,
                                               const GlobalForecaster& model,
                                               std::optional<std::size_t> t_f = std::nullopt);

/// Positions from decoder outputs: consecutive mode sums residuals from
/// `last`, from-first mode adds each residual to `first`.
std::vector<Vec2> residuals_to_positions(std::span<const Vec2> residuals, Vec2 first, Vec2 last,
                                         ResidualMode mode);

// ---------------------------------------------------------------------------
// Entangled ablation: one QRNN encoder-decoder over whole 50-d poses.

struct EntangledForecaster {
  ForecastConfig config;
  double frame_width = 1280.0;
  double frame_height = 720.0;
  ParameterSet params;  // prefix "entangled"

  QrnnEncoderDecoder qrnn() const;
};

EntangledForecaster init_entangled(const ForecastConfig& config, double frame_width,
                                   double frame_height, std::uint64_t seed);
void train_entangled(EntangledForecaster& model, std::span<const ForecastExample> examples,
                     std::uint64_t seed, std::vector<double>* epoch_loss = nullptr);
Var entangled_loss(Graph& g, ParamScope& scope, const EntangledForecaster& model,
                   std::span<const ForecastExample> batch, bool teacher);
std::vector<std::vector<Pose>> forecast_entangled(std::span<const std::vector<Pose>> histories,
                                                  const EntangledForecaster& model);

// ---------------------------------------------------------------------------
// Pipeline

/// Raised by forecast_locomotion with the failing stage in the message.
class PipelineError : public std::runtime_error {
 public:
  PipelineError(const std::string& stage, const std::string& detail)
      : std::runtime_error(stage + ": " + detail), stage_(stage) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

/// Stream forecasters pluggable into the pipeline; unset members fall back to
/// the zero-velocity rule for that stream.
struct StreamModels {
  const LocalForecaster* local = nullptr;
  const GlobalForecaster* global = nullptr;
};

/// complete -> decompose -> forecast both streams -> recombine, for every
/// sequence's first t_p frames. Without a completion model the raw detections
/// are decomposed as they are (decomposition-only ablation).
std::vector<std::vector<Pose>> forecast_locomotion(std::span<const LocomotionSequence> sequences,
                                                   const CompletionModel* completion,
                                                   const StreamModels& models,
                                                   std::size_t t_p, std::size_t t_f,
                                                   double alpha_c);
std::vector<Pose> forecast_locomotion(const LocomotionSequence& seq, const CompletionModel& completion,
                                      const LocalForecaster& local, const GlobalForecaster& global);

// ---------------------------------------------------------------------------
// Checkpoints: <name>.ckpt parameter containers plus manifest.json.

void save_completion(const std::filesystem::path& dir, const CompletionModel& model);
CompletionModel load_completion(const std::filesystem::path& dir);
void save_local(const std::filesystem::path& dir, const LocalForecaster& model);
LocalForecaster load_local(const std::filesystem::path& dir);
void save_global(const std::filesystem::path& dir, const GlobalForecaster& model);
GlobalForecaster load_global(const std::filesystem::path& dir);
void save_entangled(const std::filesystem::path& dir, const EntangledForecaster& model);
EntangledForecaster load_entangled(const std::filesystem::path& dir);

}  // namespace loco

#include "loco/io.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include "loco/config_json.hpp"

namespace loco {

using nlohmann::json;
using nlohmann::ordered_json;

void DatasetRecord::validate() const {
  if (id.empty()) throw std::invalid_argument("record id is empty");
  seq.validate();
  if (frame_index.size() != seq.size()) {
    throw std::invalid_argument("frame_index and frames differ in length");
  }
  for (std::size_t t = 1; t < frame_index.size(); ++t) {
    if (frame_index[t] <= frame_index[t - 1]) {
      throw std::invalid_argument("frame indices must be strictly increasing (frame " +
                                  std::to_string(t) + ")");
    }
  }
  for (std::size_t t = 0; t < seq.transforms.size(); ++t) {
    if (!(seq.transforms[t].rigidity_error() <= 1e-6)) {
      throw std::invalid_argument("frame " + std::to_string(t) + ": transform is not rigid");
    }
  }
  if (!truth.empty() && truth.size() != seq.size()) {
    throw std::invalid_argument("truth must cover every frame or be absent");
  }
  for (std::size_t t = 0; t < seq.size(); ++t) {
    for (std::size_t j = 0; j < kJointCount; ++j) {
      const Keypoint& k = seq.frames[t][j];
      if (!std::isfinite(k.u) || !std::isfinite(k.v) || !(k.c >= 0.0 && k.c <= 1.0)) {
        throw std::invalid_argument("frame " + std::to_string(t) + " joint " + std::to_string(j) +
                                    ": non-finite coordinate or confidence outside [0, 1]");
      }
    }
  }
}

DatasetRecord to_record(const SyntheticRecord& r) {
  DatasetRecord d;
  d.id = r.id;
  d.seq = r.noisy;
  d.truth = r.truth.frames;
  d.frame_index.resize(d.seq.size());
  for (std::size_t t = 0; t < d.frame_index.size(); ++t) d.frame_index[t] = t;
  return d;
}

namespace {

ordered_json record_json(const DatasetRecord& r) {
  ordered_json frames = ordered_json::array();
  for (std::size_t t = 0; t < r.seq.size(); ++t) {
    ordered_json f;
    f["index"] = r.frame_index[t];
    f["width"] = r.seq.frame_width;
    f["height"] = r.seq.frame_height;
    f["depth"] = r.seq.anchor_depth[t];
    f["transform"] = r.seq.transforms[t].m;
    ordered_json kps = ordered_json::array();
    for (const Keypoint& k : r.seq.frames[t].joints) kps.push_back({k.u, k.v, k.c});
    f["keypoints"] = std::move(kps);
    if (!r.truth.empty()) {
      ordered_json tr = ordered_json::array();
      for (const Keypoint& k : r.truth[t].joints) tr.push_back({k.u, k.v});
      f["truth"] = std::move(tr);
    }
    frames.push_back(std::move(f));
  }
  ordered_json j;
  j["schema_version"] = kDatasetSchemaVersion;
  j["id"] = r.id;
  j["t_p"] = r.seq.t_p;
  j["t_f"] = r.seq.t_f;
  j["frames"] = std::move(frames);
  return j;
}

template <class T>
T field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw std::invalid_argument(std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument(std::string("field '") + key + "' has the wrong type");
  }
}

void only_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known = known || it.key() == k;
    if (!known) throw std::invalid_argument(where + ": unknown field '" + it.key() + "'");
  }
}

}  // namespace

std::string record_to_line(const DatasetRecord& r) { return record_json(r).dump(); }

DatasetRecord record_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("record is not an object");
  only_keys(j, {"schema_version", "id", "t_p", "t_f", "frames"}, "record");
  if (field<int>(j, "schema_version") != kDatasetSchemaVersion) {
    throw std::invalid_argument("unsupported schema_version");
  }
  DatasetRecord r;
  r.id = field<std::string>(j, "id");
  r.seq.t_p = field<std::size_t>(j, "t_p");
  r.seq.t_f = field<std::size_t>(j, "t_f");
  const json& frames = j.at("frames");
  if (!frames.is_array()) throw std::invalid_argument("'frames' must be an array");
  bool has_truth = false;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const json& f = frames[t];
    const std::string where = "frame " + std::to_string(t);
    if (!f.is_object()) throw std::invalid_argument(where + " is not an object");
    only_keys(f, {"index", "width", "height", "depth", "transform", "keypoints", "truth"}, where);
    r.frame_index.push_back(field<std::size_t>(f, "index"));
    const double w = field<double>(f, "width");
    const double h = field<double>(f, "height");
    if (t == 0) {
      r.seq.frame_width = w;
      r.seq.frame_height = h;
    } else if (w != r.seq.frame_width || h != r.seq.frame_height) {
      throw std::invalid_argument(where + ": frame size changes within a record");
    }
    r.seq.anchor_depth.push_back(field<double>(f, "depth"));
    const auto m = field<std::vector<double>>(f, "transform");
    if (m.size() != 12) throw std::invalid_argument(where + ": transform needs 12 values");
    TransformSE3 tr;
    std::copy(m.begin(), m.end(), tr.m.begin());
    r.seq.transforms.push_back(tr);
    const auto kps = field<std::vector<std::vector<double>>>(f, "keypoints");
    if (kps.size() != kJointCount) {
      throw std::invalid_argument(where + ": expected 25 keypoints, got " + std::to_string(kps.size()));
    }
    Pose p;
    for (std::size_t i = 0; i < kJointCount; ++i) {
      if (kps[i].size() != 3) throw std::invalid_argument(where + ": keypoint needs [u, v, c]");
      p[i] = {kps[i][0], kps[i][1], kps[i][2]};
    }
    r.seq.frames.push_back(p);
    const bool truth_here = f.contains("truth");
    if (t == 0) has_truth = truth_here;
    if (truth_here != has_truth) throw std::invalid_argument(where + ": truth present on some frames only");
    if (truth_here) {
      const auto tk = field<std::vector<std::vector<double>>>(f, "truth");
      if (tk.size() != kJointCount) throw std::invalid_argument(where + ": truth needs 25 joints");
      Pose q;
      for (std::size_t i = 0; i < kJointCount; ++i) {
        if (tk[i].size() != 2) throw std::invalid_argument(where + ": truth joint needs [u, v]");
        q[i] = {tk[i][0], tk[i][1], 1.0};
      }
      r.truth.push_back(q);
    }
  }
  r.validate();
  return r;
}

std::vector<DatasetRecord> read_dataset(std::istream& in, const std::string& name) {
  std::vector<DatasetRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw IoError(name + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<DatasetRecord> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open");
  return read_dataset(in, path.string());
}

void write_dataset(std::ostream& out, std::span<const DatasetRecord> records) {
  for (const auto& r : records) out << record_to_line(r) << '\n';
}

void save_dataset(const std::filesystem::path& path, std::span<const DatasetRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string() + ": cannot write");
  write_dataset(out, records);
  if (!out) throw IoError(path.string() + ": write failed");
}

KdeNorm parse_kde_norm(const std::string& name) {
  if (name == "l2") return KdeNorm::kL2;
  if (name == "l1") return KdeNorm::kL1;
  throw std::invalid_argument("unknown kde norm '" + name + "'");
}

const char* kde_norm_name(KdeNorm n) { return n == KdeNorm::kL2 ? "l2" : "l1"; }

// ---------------------------------------------------------------------------
// Experiment configuration

void ExperimentConfig::finalize() {
  try {
    completion.widths = layer_widths(2 * kJointCount, d_ae, ae_layers);
    completion.alpha_c = forecast.alpha_c;
    completion.frame_width = intrinsics.width;
    completion.frame_height = intrinsics.height;
    completion.validate();
    forecast.validate();
    noise.validate();
    if (train_count == 0 || test_count == 0) throw std::invalid_argument("counts must be positive");
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

namespace {

using Type = ConfigKey::Type;

ConfigKey make_key(std::string name, Type type, std::string help,
                   std::function<json(const ExperimentConfig&)> get,
                   std::function<void(ExperimentConfig&, const json&)> set) {
  return {std::move(name), type, std::move(help), std::move(get), std::move(set)};
}

#define LOCO_REAL(key, expr, help)                                                   \
  make_key(key, Type::kReal, help, [](const ExperimentConfig& c) { return json(c.expr); }, \
           [](ExperimentConfig& c, const json& v) { c.expr = v.get<double>(); })
#define LOCO_COUNT(key, expr, help)                                                   \
  make_key(key, Type::kCount, help, [](const ExperimentConfig& c) { return json(c.expr); }, \
           [](ExperimentConfig& c, const json& v) { c.expr = v.get<std::size_t>(); })
#define LOCO_FLAG(key, expr, help)                                                   \
  make_key(key, Type::kFlag, help, [](const ExperimentConfig& c) { return json(c.expr); }, \
           [](ExperimentConfig& c, const json& v) { c.expr = v.get<bool>(); })

std::vector<ConfigKey> build_keys() {
  std::vector<ConfigKey> k;
  k.push_back(make_key(
      "seed", Type::kCount, "seed for generation and training",
      [](const ExperimentConfig& c) { return json(c.seed); },
      [](ExperimentConfig& c, const json& v) { c.seed = v.get<std::uint64_t>(); }));
  k.push_back(LOCO_COUNT("train_count", train_count, "generated training sequences"));
  k.push_back(LOCO_COUNT("test_count", test_count, "generated test sequences"));
  k.push_back(make_key(
      "preset", Type::kText, "scene preset: default | camera_heavy",
      [](const ExperimentConfig& c) { return json(scene_preset_name(c.preset)); },
      [](ExperimentConfig& c, const json& v) { c.preset = parse_scene_preset(v.get<std::string>()); }));
  k.push_back(make_key(
      "alpha_c", Type::kReal, "confidence threshold",
      [](const ExperimentConfig& c) { return json(c.forecast.alpha_c); },
      [](ExperimentConfig& c, const json& v) { c.forecast.alpha_c = v.get<double>(); }));
  k.push_back(LOCO_COUNT("d_ae", d_ae, "autoencoder latent width"));
  k.push_back(LOCO_COUNT("ae_layers", ae_layers, "encoder layers of the autoencoder"));
  k.push_back(make_key(
      "activation", Type::kText, "autoencoder activation: tanh | linear | relu",
      [](const ExperimentConfig& c) { return json(activation_name(c.completion.activation)); },
      [](ExperimentConfig& c, const json& v) {
        c.completion.activation = parse_activation(v.get<std::string>());
      }));
  k.push_back(LOCO_REAL("input_dropout", completion.input_dropout, "completion input dropout"));
  k.push_back(LOCO_REAL("lr_completion", completion.learning_rate, "completion learning rate"));
  k.push_back(LOCO_REAL("lr_completion_final_fraction", completion.final_lr_fraction,
                        "completion learning rate at the last step, as a fraction (1 = constant)"));
  k.push_back(LOCO_COUNT("completion_steps", completion.steps, "completion Adam steps"));
  k.push_back(LOCO_COUNT("completion_batch", completion.batch, "completion minibatch"));
  k.push_back(LOCO_COUNT("t_p", forecast.t_p, "observed frames"));
  k.push_back(LOCO_COUNT("t_f", forecast.t_f, "forecast frames"));
  k.push_back(LOCO_COUNT("N_local", forecast.local_layers, "local QRNN layers"));
  k.push_back(LOCO_COUNT("N_global", forecast.global_layers, "global QRNN layers"));
  k.push_back(LOCO_COUNT("N_entangled", forecast.entangled_layers, "entangled QRNN layers"));
  k.push_back(LOCO_COUNT("hidden", forecast.hidden, "QRNN hidden width"));
  k.push_back(LOCO_COUNT("kernel", forecast.kernel, "QRNN convolution width"));
  k.push_back(LOCO_COUNT("frame_hidden", forecast.frame_hidden, "frame encoder hidden width"));
  k.push_back(LOCO_REAL("lr_local", forecast.local_lr, "local forecaster learning rate"));
  k.push_back(LOCO_REAL("lr_global", forecast.global_lr, "global forecaster learning rate"));
  k.push_back(LOCO_REAL("lr_entangled", forecast.entangled_lr, "entangled learning rate"));
  k.push_back(LOCO_REAL("lr_codec", forecast.codec_lr, "spatial codec learning rate"));
  k.push_back(LOCO_COUNT("codec_steps", forecast.codec_steps, "spatial codec Adam steps"));
  k.push_back(LOCO_COUNT("epochs", forecast.epochs, "forecaster epochs"));
  k.push_back(LOCO_REAL("lr_final_fraction", forecast.final_lr_fraction,
                        "forecaster learning rate in the last epoch, as a fraction (1 = constant)"));
  k.push_back(LOCO_COUNT("batch", forecast.batch, "forecaster minibatch"));
  k.push_back(LOCO_FLAG("teacher_forcing", forecast.teacher_forcing, "train decoders on true inputs"));
  k.push_back(LOCO_FLAG("local_residual", forecast.local_residual, "local decoder predicts latent change"));
  k.push_back(LOCO_FLAG("use_transforms", forecast.use_transforms, "feed camera transforms"));
  k.push_back(make_key(
      "residual_mode", Type::kText, "global target: consecutive | from_first",
      [](const ExperimentConfig& c) { return json(residual_mode_name(c.forecast.residual_mode)); },
      [](ExperimentConfig& c, const json& v) {
        c.forecast.residual_mode = parse_residual_mode(v.get<std::string>());
      }));
  k.push_back(make_key(
      "pooling_mode", Type::kText, "frame encoding pooling: sequence | mean",
      [](const ExperimentConfig& c) { return json(pooling_mode_name(c.forecast.pooling_mode)); },
      [](ExperimentConfig& c, const json& v) {
        c.forecast.pooling_mode = parse_pooling_mode(v.get<std::string>());
      }));
  k.push_back(make_key(
      "kde_norm", Type::kText, "keypoint distance: l2 | l1",
      [](const ExperimentConfig& c) { return json(kde_norm_name(c.kde_norm)); },
      [](ExperimentConfig& c, const json& v) { c.kde_norm = parse_kde_norm(v.get<std::string>()); }));
  k.push_back(LOCO_REAL("noise_dropout", noise.dropout, "missed detection probability"));
  k.push_back(LOCO_REAL("noise_jitter", noise.jitter_sigma, "keypoint jitter sigma, px"));
  k.push_back(LOCO_REAL("noise_confidence_cap", noise.confidence_cap, "jitter at zero confidence, px"));
  k.push_back(LOCO_REAL("noise_rotation", noise.rotation_jitter, "rotation jitter per step, rad"));
  k.push_back(LOCO_REAL("noise_translation", noise.translation_jitter, "translation jitter per step, m"));
  k.push_back(LOCO_REAL("noise_depth", noise.depth_sigma, "relative depth noise"));
  return k;
}

#undef LOCO_REAL
#undef LOCO_COUNT
#undef LOCO_FLAG

bool type_matches(const ConfigKey& key, const json& v) {
  switch (key.type) {
    case Type::kReal: return v.is_number();
    case Type::kCount:
      return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
    case Type::kFlag: return v.is_boolean();
    case Type::kText: return v.is_string();
  }
  return false;
}

}  // namespace

const std::vector<ConfigKey>& experiment_config_keys() {
  static const std::vector<ConfigKey> keys = build_keys();
  return keys;
}

ordered_json ExperimentConfig::to_json() const {
  ordered_json j;
  j["schema_version"] = 1;
  for (const auto& k : experiment_config_keys()) j[k.name] = k.get(*this);
  return j;
}

ExperimentConfig experiment_config_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  ExperimentConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "schema_version") {
      if (*it != 1) throw ConfigError(where + ": unsupported schema_version");
      continue;
    }
    const ConfigKey* key = nullptr;
    for (const auto& k : experiment_config_keys()) {
      if (k.name == it.key()) key = &k;
    }
    if (!key) throw ConfigError(where + ": unknown key '" + it.key() + "'");
    if (!type_matches(*key, *it)) throw ConfigError(where + "." + it.key() + ": wrong type");
    try {
      key->set(c, *it);
    } catch (const std::exception& e) {
      throw ConfigError(where + "." + it.key() + ": " + e.what());
    }
  }
  c.finalize();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot open");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return experiment_config_from_json(j, path.string());
}

json parse_config_value(const ConfigKey& key, const std::string& text) {
  try {
    switch (key.type) {
      case Type::kText:
        return json(text);
      case Type::kFlag:
        if (text == "true" || text == "1") return json(true);
        if (text == "false" || text == "0") return json(false);
        break;
      case Type::kCount: {
        std::size_t pos = 0;
        if (!text.empty() && text[0] != '-') {
          const unsigned long long v = std::stoull(text, &pos);
          if (pos == text.size()) return json(static_cast<std::uint64_t>(v));
        }
        break;
      }
      case Type::kReal: {
        std::size_t pos = 0;
        const double v = std::stod(text, &pos);
        if (pos == text.size()) return json(v);
        break;
      }
    }
  } catch (const std::exception&) {
  }
  throw ConfigError("--" + key.name + ": cannot parse '" + text + "'");
}

// ---------------------------------------------------------------------------
// Evaluation

std::vector<Pose> future_truth(const DatasetRecord& r, std::size_t t_p) {
  const auto& src = r.truth.empty() ? r.seq.frames : r.truth;
  if (src.size() <= t_p) return {};
  return {src.begin() + static_cast<std::ptrdiff_t>(t_p), src.end()};
}

namespace {

// Records per predictor call. Fixed, so batched arithmetic and therefore the
// report bytes do not depend on how many threads run.
constexpr std::size_t kEvalChunk = 32;

std::vector<std::vector<Pose>> predict_in_chunks(std::span<const DatasetRecord> records,
                                                 const Predictor& predictor) {
  const std::size_t chunks = (records.size() + kEvalChunk - 1) / kEvalChunk;
  std::vector<std::vector<Pose>> out(records.size());
  std::vector<std::exception_ptr> errors(chunks);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t c = next++; c < chunks; c = next++) {
      const std::size_t begin = c * kEvalChunk, n = std::min(kEvalChunk, records.size() - begin);
      try {
        auto preds = predictor(records.subspan(begin, n));
        if (preds.size() != n) throw std::runtime_error("evaluate: predictor returned wrong count");
        std::move(preds.begin(), preds.end(), out.begin() + static_cast<std::ptrdiff_t>(begin));
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  const std::size_t threads =
      std::min<std::size_t>(chunks, std::max(1u, std::thread::hardware_concurrency()));
  std::vector<std::jthread> pool;
  for (std::size_t i = 1; i < threads; ++i) pool.emplace_back(work);
  work();
  pool.clear();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace

EvaluationReport evaluate(std::span<const DatasetRecord> records, const std::string& method,
                          const Predictor& predictor, std::size_t t_p, std::size_t t_f,
                          KdeNorm norm, ordered_json config_echo) {
  EvaluationReport rep;
  rep.method = method;
  rep.config = std::move(config_echo);
  std::vector<DatasetRecord> usable;
  for (const auto& r : records) {
    if (r.seq.size() >= t_p + t_f) {
      usable.push_back(r);
    } else {
      ++rep.skipped;
    }
  }
  const auto preds = predict_in_chunks(usable, predictor);

  for (std::size_t h : kHorizons) rep.horizons.push_back({h, 0, 0, 0.0, 0.0});
  for (std::size_t i = 0; i < usable.size(); ++i) {
    const auto truth = future_truth(usable[i], t_p);
    const auto& pred = preds[i];
    if (pred.size() < t_f) throw std::runtime_error("evaluate: forecast shorter than t_f");
    RecordResult rr;
    rr.id = usable[i].id;
    const std::span<const Pose> p(pred.data(), t_f), t(truth.data(), t_f);
    rr.kde = kde(p, t, norm);
    rr.mean_kde = mean_kde(p, t, norm);
    for (auto& row : rep.horizons) {
      if (row.t_f > pred.size() || row.t_f > truth.size()) {
        ++row.skipped;
        continue;
      }
      const double v = kde(std::span<const Pose>(pred.data(), row.t_f),
                           std::span<const Pose>(truth.data(), row.t_f), norm);
      rr.horizon_kde[row.t_f] = v;
      row.kde += v;
      ++row.records;
    }
    rep.kde += rr.kde;
    rep.mean_kde += rr.mean_kde;
    rep.records.push_back(std::move(rr));
  }
  if (!rep.records.empty()) {
    rep.kde /= static_cast<double>(rep.records.size());
    rep.mean_kde /= static_cast<double>(rep.records.size());
  }
  for (auto& row : rep.horizons) {
    if (row.records) {
      row.kde /= static_cast<double>(row.records);
      row.mean_kde = row.kde / static_cast<double>(kJointCount);
    }
  }
  return rep;
}

ordered_json EvaluationReport::to_json() const {
  ordered_json j;
  j["schema_version"] = kReportSchemaVersion;
  j["method"] = method;
  j["records_evaluated"] = records.size();
  j["records_skipped"] = skipped;
  j["kde"] = kde;
  j["mean_kde"] = mean_kde;
  ordered_json hz = ordered_json::array();
  for (const auto& h : horizons) {
    hz.push_back({{"t_f", h.t_f},
                  {"records", h.records},
                  {"skipped", h.skipped},
                  {"kde", h.kde},
                  {"mean_kde", h.mean_kde}});
  }
  j["horizons"] = std::move(hz);
  ordered_json per = ordered_json::array();
  for (const auto& r : records) {
    ordered_json e{{"id", r.id}, {"kde", r.kde}, {"mean_kde", r.mean_kde}};
    ordered_json hk = ordered_json::object();
    for (const auto& [h, v] : r.horizon_kde) hk[std::to_string(h)] = v;
    e["horizon_kde"] = std::move(hk);
    per.push_back(std::move(e));
  }
  j["records"] = std::move(per);
  j["config"] = config;
  return j;
}

std::string EvaluationReport::to_text() const {
  std::ostringstream os;
  char buf[160];
  os << "method: " << method << '\n';
  os << "records: " << records.size() << " evaluated, " << skipped << " skipped\n";
  std::snprintf(buf, sizeof buf, "KDE %.4f  mean KDE %.4f\n", kde, mean_kde);
  os << buf;
  os << "horizon  records  skipped        KDE   mean KDE\n";
  for (const auto& h : horizons) {
    std::snprintf(buf, sizeof buf, "%7zu  %7zu  %7zu  %9.4f  %9.4f\n", h.t_f, h.records, h.skipped,
                  h.kde, h.mean_kde);
    os << buf;
  }
  os << "config: " << config.dump() << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// SVG

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

void draw_pose(std::ostringstream& os, const Pose& p, const char* color, double opacity) {
  char buf[200];
  for (const auto& [a, b] : kBody25Edges) {
    if (p[a].missing() || p[b].missing()) continue;
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"%s\" "
                  "stroke-opacity=\"%.2f\"/>\n",
                  p[a].u, p[a].v, p[b].u, p[b].v, color, opacity);
    os << buf;
  }
  for (std::size_t j = 0; j < kJointCount; ++j) {
    if (p[j].missing()) continue;
    std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"2\" fill=\"%s\" fill-opacity=\"%.2f\"/>\n",
                  p[j].u, p[j].v, color, opacity);
    os << buf;
  }
}

void draw_group(std::ostringstream& os, const char* cls, std::span<const Pose> poses,
                const char* color) {
  os << "<g class=\"" << cls << "\" stroke-width=\"1.5\">\n";
  for (std::size_t t = 0; t < poses.size(); ++t) {
    const double opacity = 0.25 + 0.75 * static_cast<double>(t + 1) / static_cast<double>(poses.size());
    draw_pose(os, poses[t], color, opacity);
  }
  os << "</g>\n";
}

}  // namespace

std::string render_svg(const DatasetRecord& record, std::span<const Pose> prediction,
                       std::size_t t_p) {
  if (t_p == 0 || t_p > record.seq.size()) {
    throw std::invalid_argument("render_svg: t_p must lie in [1, frames]");
  }
  const auto truth = future_truth(record, t_p);
  if (prediction.size() > truth.size()) {
    throw std::invalid_argument("render_svg: prediction longer than the recorded future");
  }
  std::ostringstream os;
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
                "viewBox=\"0 0 %.0f %.0f\">\n",
                record.seq.frame_width, record.seq.frame_height, record.seq.frame_width,
                record.seq.frame_height);
  os << buf;
  os << "<title>" << xml_escape(record.id) << "</title>\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  draw_group(os, "history", std::span<const Pose>(record.seq.frames.data(), t_p), "#1f77b4");
  if (!prediction.empty()) {
    draw_group(os, "truth", std::span<const Pose>(truth.data(), prediction.size()), "#2ca02c");
    draw_group(os, "prediction", prediction, "#d62728");
  }
  os << "</svg>\n";
  return os.str();
}

void render_svg(const DatasetRecord& record, std::span<const Pose> prediction, std::size_t t_p,
                const std::filesystem::path& path) {
  const std::string svg = render_svg(record, prediction, t_p);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string() + ": cannot write");
  out << svg;
  if (!out) throw IoError(path.string() + ": write failed");
}

}  // namespace loco

#include "cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include "loco/baselines.hpp"
#include "loco/checkpoint.hpp"
#include "loco/config_json.hpp"
#include "loco/forecast.hpp"
#include "loco/io.hpp"
#include "loco/synth.hpp"

namespace loco {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

// Seed streams of the individual training stages.
enum SeedStream : std::uint64_t { kCompletionSeed = 11, kLocalSeed = 12, kGlobalSeed = 13, kEntangledSeed = 14 };

struct CommonOptions {
  std::string config_path;
  std::map<std::string, std::string> overrides;
};

void add_config_options(CLI::App* cmd, CommonOptions& common) {
  cmd->add_option("--config", common.config_path, "JSON experiment configuration")
      ->check(CLI::ExistingFile);
  for (const auto& key : experiment_config_keys()) {
    cmd->add_option("--" + key.name, common.overrides[key.name], key.help);
  }
}

ExperimentConfig resolve_config(CLI::App* cmd, const CommonOptions& common) {
  ExperimentConfig cfg;
  json j = json::object();
  if (!common.config_path.empty()) {
    std::ifstream in(common.config_path);
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw ConfigError(common.config_path + ": " + e.what());
    }
  }
  for (const auto& key : experiment_config_keys()) {
    if (cmd->count("--" + key.name) > 0) {
      j[key.name] = parse_config_value(key, common.overrides.at(key.name));
    }
  }
  return experiment_config_from_json(j, common.config_path.empty() ? "config" : common.config_path);
}

void write_experiment(const fs::path& dir, const ExperimentConfig& cfg) {
  const fs::path path = dir / "manifest.json";
  ordered_json m;
  {
    std::ifstream in(path);
    if (in) in >> m;
  }
  m["kde_norm"] = kde_norm_name(cfg.kde_norm);
  m["experiment"] = cfg.to_json();
  std::ofstream out(path);
  if (!out) throw IoError(path.string() + ": cannot write");
  out << m.dump(2) << '\n';
}

std::vector<Pose> confident_poses(std::span<const DatasetRecord> records, double alpha_c) {
  std::vector<Pose> out;
  for (const auto& r : records) {
    auto f = confidence_filter(r.seq.frames, alpha_c);
    out.insert(out.end(), f.begin(), f.end());
  }
  return out;
}

std::vector<ForecastExample> examples_of(std::span<const DatasetRecord> records,
                                         const ExperimentConfig& cfg,
                                         const CompletionModel* completion) {
  std::vector<ForecastExample> out;
  const auto& f = cfg.forecast;
  for (const auto& r : records) {
    if (r.seq.size() < f.t_p + f.t_f) continue;
    out.push_back(make_example(r.seq, f.t_p, f.t_f, completion, f.alpha_c));
  }
  if (out.empty()) throw std::invalid_argument("no record holds t_p + t_f frames");
  return out;
}

std::optional<CompletionModel> maybe_completion(const fs::path& dir) {
  const auto m = dir / "manifest.json";
  if (!fs::exists(dir / "completion.ckpt") || !fs::exists(m)) return std::nullopt;
  return load_completion(dir);
}

// Methods the forecast/evaluate/plot commands understand.
Predictor make_predictor(const std::string& method, const fs::path& models,
                         const ExperimentConfig& cfg) {
  const auto& f = cfg.forecast;
  const std::size_t t_p = f.t_p;
  const double alpha_c = f.alpha_c;
  auto sequences = [](std::span<const DatasetRecord> records) {
    std::vector<LocomotionSequence> seqs;
    for (const auto& r : records) seqs.push_back(r.seq);
    return seqs;
  };

  if (method == "full" || method == "decomposition_only" || method == "global_only") {
    auto completion = method == "decomposition_only"
                          ? std::shared_ptr<CompletionModel>()
                          : std::make_shared<CompletionModel>(load_completion(models));
    auto global = std::make_shared<GlobalForecaster>(load_global(models));
    std::shared_ptr<LocalForecaster> local;
    if (method != "global_only") local = std::make_shared<LocalForecaster>(load_local(models));
    const std::size_t t_f = global->config.t_f;
    return [=](std::span<const DatasetRecord> records) {
      const auto seqs = sequences(records);
      return forecast_locomotion(seqs, completion.get(), {local.get(), global.get()},
                                 global->config.t_p, t_f, alpha_c);
    };
  }
  if (method == "entangled") {
    auto model = std::make_shared<EntangledForecaster>(load_entangled(models));
    std::shared_ptr<CompletionModel> comp;
    std::ifstream in(models / "manifest.json");
    json m;
    if (in) in >> m;
    if (m.contains("models") && m["models"].contains("entangled") &&
        m["models"]["entangled"].value("completed_input", false)) {
      comp = std::make_shared<CompletionModel>(load_completion(models));
    }
    return [=](std::span<const DatasetRecord> records) {
      std::vector<std::vector<Pose>> hs;
      for (const auto& r : records) {
        std::vector<Pose> h(r.seq.frames.begin(), r.seq.frames.begin() + static_cast<std::ptrdiff_t>(t_p));
        if (comp) h = complete(h, *comp, alpha_c);
        hs.push_back(std::move(h));
      }
      return forecast_entangled(hs, *model);
    };
  }
  const Baseline b = parse_baseline(method);
  std::shared_ptr<CompletionModel> comp;
  if (!models.empty()) {
    if (auto c = maybe_completion(models)) comp = std::make_shared<CompletionModel>(std::move(*c));
  }
  const std::size_t rollout = std::max(f.t_f, kHorizons.back());
  return [=](std::span<const DatasetRecord> records) {
    std::vector<std::vector<Pose>> out;
    for (const auto& r : records) {
      std::vector<Pose> h(r.seq.frames.begin(), r.seq.frames.begin() + static_cast<std::ptrdiff_t>(t_p));
      if (comp) h = complete(h, *comp, alpha_c);
      out.push_back(run_baseline(b, h, rollout));
    }
    return out;
  };
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"loco: pedestrian pose forecasting"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  CommonOptions common;
  std::string data, models, out_path, text_path, method = "full", record_id, id_prefix = "ped";
  std::size_t count = 0;
  bool raw = false, completed = false;

  auto* gen = app.add_subcommand("generate", "write a synthetic dataset");
  add_config_options(gen, common);
  gen->add_option("--out", out_path, "output JSONL")->required();
  gen->add_option("--count", count, "number of sequences (default train_count)");
  gen->add_option("--id-prefix", id_prefix, "record id prefix");

  auto* tc = app.add_subcommand("train-completion", "train the pose completion autoencoder");
  auto* tl = app.add_subcommand("train-local", "train the local stream forecaster");
  auto* tg = app.add_subcommand("train-global", "train the global stream forecaster");
  auto* te = app.add_subcommand("train-entangled", "train the entangled ablation");
  for (auto* cmd : {tc, tl, tg, te}) {
    add_config_options(cmd, common);
    cmd->add_option("--data", data, "training JSONL")->required()->check(CLI::ExistingFile);
    cmd->add_option("--models", models, "checkpoint bundle directory")->required();
  }
  for (auto* cmd : {tl, tg}) {
    cmd->add_flag("--raw", raw, "train on raw detections (decomposition without completion)");
  }
  te->add_flag("--completed", completed, "feed completed poses (completion without decomposition)");

  auto* fc = app.add_subcommand("forecast", "write forecasts as JSONL");
  auto* ev = app.add_subcommand("evaluate", "score a method on a dataset");
  auto* pl = app.add_subcommand("plot", "render one record as SVG");
  for (auto* cmd : {fc, ev, pl}) {
    add_config_options(cmd, common);
    cmd->add_option("--data", data, "dataset JSONL")->required()->check(CLI::ExistingFile);
    cmd->add_option("--models", models, "checkpoint bundle directory");
    cmd->add_option("--method", method,
                    "full | decomposition_only | global_only | entangled | zero_velocity | "
                    "constant_velocity | last_observed_velocity");
    cmd->add_option("--out", out_path, "output file")->required();
  }
  ev->add_option("--text", text_path, "also write the text report here");
  pl->add_option("--record", record_id, "record id (default: first record)");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    if (!rev.empty()) rev.pop_back();  // program name
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    CLI::App* cmd = app.get_subcommands().front();
    const ExperimentConfig cfg = resolve_config(cmd, common);
    const auto& f = cfg.forecast;

    if (cmd == gen) {
      const auto recs = generate_dataset(count ? count : cfg.train_count, f.t_p, f.t_f, cfg.preset,
                                         cfg.noise, cfg.intrinsics, cfg.seed, id_prefix);
      std::vector<DatasetRecord> records;
      for (const auto& r : recs) records.push_back(to_record(r));
      save_dataset(out_path, records);
      out << "wrote " << records.size() << " records to " << out_path << '\n';
      return 0;
    }

    if (cmd == tc || cmd == tl || cmd == tg || cmd == te) {
      const auto records = load_dataset(data);
      const fs::path dir = models;
      fs::create_directories(dir);
      if (cmd == tc) {
        const auto poses = confident_poses(records, f.alpha_c);
        auto model = train_completion(poses, cfg.completion, derive_seed(cfg.seed, kCompletionSeed));
        save_completion(dir, model);
        out << "completion: " << poses.size() << " confident poses, final loss "
            << model.loss_history.back() << '\n';
      } else if (cmd == tl) {
        const auto completion = load_completion(dir);
        const auto examples = examples_of(records, cfg, raw ? nullptr : &completion);
        auto model = init_local(f, completion, confident_poses(records, f.alpha_c),
                                derive_seed(cfg.seed, kLocalSeed));
        std::vector<double> loss;
        train_local(model, examples, derive_seed(cfg.seed, kLocalSeed + 100), &loss);
        save_local(dir, model);
        out << "local: " << examples.size() << " sequences, final epoch loss " << loss.back() << '\n';
      } else if (cmd == tg) {
        std::optional<CompletionModel> completion;
        if (!raw) completion = load_completion(dir);
        const auto examples = examples_of(records, cfg, completion ? &*completion : nullptr);
        auto model = init_global(f, derive_seed(cfg.seed, kGlobalSeed));
        std::vector<double> loss;
        train_global(model, examples, derive_seed(cfg.seed, kGlobalSeed + 100), &loss);
        save_global(dir, model);
        out << "global: " << examples.size() << " sequences, final epoch loss " << loss.back() << '\n';
      } else {
        std::optional<CompletionModel> completion;
        if (completed) completion = load_completion(dir);
        const auto examples = examples_of(records, cfg, completion ? &*completion : nullptr);
        auto model = init_entangled(f, cfg.intrinsics.width, cfg.intrinsics.height,
                                    derive_seed(cfg.seed, kEntangledSeed));
        std::vector<double> loss;
        train_entangled(model, examples, derive_seed(cfg.seed, kEntangledSeed + 100), &loss);
        save_entangled(dir, model);
        ordered_json m;
        {
          std::ifstream in(dir / "manifest.json");
          in >> m;
        }
        m["models"]["entangled"]["completed_input"] = completed;
        std::ofstream(dir / "manifest.json") << m.dump(2) << '\n';
        out << "entangled: " << examples.size() << " sequences, final epoch loss " << loss.back()
            << '\n';
      }
      write_experiment(dir, cfg);
      return 0;
    }

    const auto records = load_dataset(data);
    const Predictor predict = make_predictor(method, models, cfg);

    if (cmd == fc) {
      std::vector<DatasetRecord> usable;
      for (const auto& r : records) {
        if (r.seq.size() >= f.t_p) usable.push_back(r);
      }
      const auto preds = usable.empty() ? std::vector<std::vector<Pose>>{} : predict(usable);
      std::ofstream os(out_path, std::ios::binary);
      if (!os) throw IoError(out_path + ": cannot write");
      for (std::size_t i = 0; i < usable.size(); ++i) {
        ordered_json j;
        j["schema_version"] = kDatasetSchemaVersion;
        j["id"] = usable[i].id;
        j["method"] = method;
        ordered_json frames = ordered_json::array();
        for (std::size_t t = 0; t < preds[i].size(); ++t) {
          ordered_json kps = ordered_json::array();
          for (const Keypoint& k : preds[i][t].joints) kps.push_back({k.u, k.v, k.c});
          frames.push_back({{"index", usable[i].frame_index[f.t_p - 1] + 1 + t}, {"keypoints", kps}});
        }
        j["frames"] = std::move(frames);
        os << j.dump() << '\n';
      }
      out << "wrote " << usable.size() << " forecasts to " << out_path << '\n';
      return 0;
    }

    if (cmd == ev) {
      ordered_json echo = cfg.to_json();
      echo["method"] = method;
      echo["models"] = models;
      echo["data"] = data;
      const auto report = evaluate(records, method, predict, f.t_p, f.t_f, cfg.kde_norm, echo);
      std::ofstream os(out_path, std::ios::binary);
      if (!os) throw IoError(out_path + ": cannot write");
      os << report.to_json().dump(2) << '\n';
      const std::string text = report.to_text();
      if (!text_path.empty()) {
        std::ofstream ts(text_path, std::ios::binary);
        if (!ts) throw IoError(text_path + ": cannot write");
        ts << text;
      }
      out << text;
      return 0;
    }

    // plot
    const DatasetRecord* rec = nullptr;
    for (const auto& r : records) {
      if (record_id.empty() || r.id == record_id) {
        rec = &r;
        break;
      }
    }
    if (!rec) throw std::invalid_argument("no record with id '" + record_id + "'");
    auto pred = predict(std::span<const DatasetRecord>(rec, 1)).front();
    const std::size_t available = rec->seq.size() - f.t_p;
    if (pred.size() > std::min(f.t_f, available)) pred.resize(std::min(f.t_f, available));
    render_svg(*rec, pred, f.t_p, out_path);
    out << "wrote " << out_path << '\n';
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace loco

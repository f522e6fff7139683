#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "loco/completion.hpp"
#include "loco/forecast.hpp"
#include "loco/synth.hpp"

namespace loco {

inline constexpr int kDatasetSchemaVersion = 1;
inline constexpr int kReportSchemaVersion = 1;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One pedestrian: observed detections with depth and chained transforms,
/// plus the clean ground truth when the record came from the generator.
struct DatasetRecord {
  std::string id;
  std::vector<std::size_t> frame_index;
  LocomotionSequence seq;
  std::vector<Pose> truth;  // empty when unknown

  void validate() const;
  friend bool operator==(const DatasetRecord&, const DatasetRecord&) = default;
};

DatasetRecord to_record(const SyntheticRecord& r);

/// One JSON object per line. Blank lines are skipped; anything else that does
/// not parse or validate raises IoError naming the path and line.
std::vector<DatasetRecord> load_dataset(const std::filesystem::path& path);
std::vector<DatasetRecord> read_dataset(std::istream& in, const std::string& name);
void save_dataset(const std::filesystem::path& path, std::span<const DatasetRecord> records);
void write_dataset(std::ostream& out, std::span<const DatasetRecord> records);
std::string record_to_line(const DatasetRecord& r);
DatasetRecord record_from_json(const nlohmann::json& j);

KdeNorm parse_kde_norm(const std::string& name);
const char* kde_norm_name(KdeNorm n);

// ---------------------------------------------------------------------------

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::size_t train_count = 500;
  std::size_t test_count = 100;
  ScenePreset preset = ScenePreset::kDefault;
  std::size_t d_ae = 10;
  std::size_t ae_layers = 3;
  KdeNorm kde_norm = KdeNorm::kL2;
  CompletionConfig completion;
  ForecastConfig forecast;
  NoiseConfig noise;
  Intrinsics intrinsics;

  /// Re-derives the autoencoder widths from d_ae / ae_layers and checks every
  /// value; throws ConfigError.
  void finalize();
  nlohmann::ordered_json to_json() const;
};

/// Flat key table shared by the JSON loader, the report echo and the CLI flags.
struct ConfigKey {
  enum class Type { kReal, kCount, kFlag, kText };
  std::string name;
  Type type;
  std::string help;
  std::function<nlohmann::json(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const nlohmann::json&)> set;
};
const std::vector<ConfigKey>& experiment_config_keys();

/// Strict: unknown keys and ill-typed values raise ConfigError.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j, const std::string& where);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
/// Parses a command-line string for `key` into a JSON value of the key's type.
nlohmann::json parse_config_value(const ConfigKey& key, const std::string& text);

// ---------------------------------------------------------------------------

inline constexpr std::array<std::size_t, 6> kHorizons{5, 10, 15, 20, 25, 30};

struct RecordResult {
  std::string id;
  double kde = 0.0;
  double mean_kde = 0.0;
  std::map<std::size_t, double> horizon_kde;
};

struct HorizonRow {
  std::size_t t_f = 0;
  std::size_t records = 0;
  std::size_t skipped = 0;
  double kde = 0.0;
  double mean_kde = 0.0;
};

struct EvaluationReport {
  std::string method;
  nlohmann::ordered_json config;
  std::vector<RecordResult> records;
  std::size_t skipped = 0;
  double kde = 0.0;
  double mean_kde = 0.0;
  std::vector<HorizonRow> horizons;

  nlohmann::ordered_json to_json() const;
  std::string to_text() const;
};

/// Forecasts for a batch of records, one pose list per record.
using Predictor =
    std::function<std::vector<std::vector<Pose>>(std::span<const DatasetRecord> records)>;

/// Scores each record's forecast against its ground truth (the observed
/// future if the record carries none). The headline numbers use the first t_f
/// frames; the horizon table uses prefixes of every length in kHorizons. A
/// record too short for a horizon, or whose forecast is too short, is skipped
/// for it and counted.
EvaluationReport evaluate(std::span<const DatasetRecord> records, const std::string& method,
                          const Predictor& predictor, std::size_t t_p, std::size_t t_f,
                          KdeNorm norm, nlohmann::ordered_json config_echo);

/// Future frames the record holds after t_p, ground truth preferred.
std::vector<Pose> future_truth(const DatasetRecord& r, std::size_t t_p);

// ---------------------------------------------------------------------------

/// SVG with the observed history in blue, the forecast in red and the true
/// future in green, skeletons drawn along the BODY-25 edges. Joints with
/// c == 0 and their edges are omitted.
std::string render_svg(const DatasetRecord& record, std::span<const Pose> prediction,
                       std::size_t t_p);
void render_svg(const DatasetRecord& record, std::span<const Pose> prediction, std::size_t t_p,
                const std::filesystem::path& path);

}  // namespace loco

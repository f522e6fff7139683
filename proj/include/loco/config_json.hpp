#pragma once

#include <json.hpp>

#include "loco/completion.hpp"
#include "loco/forecast.hpp"
#include "loco/synth.hpp"

namespace loco {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Objects are read strictly: a key that is not a field is a ConfigError.
// Missing keys keep their defaults.
nlohmann::json to_json_value(const CompletionConfig& c);
nlohmann::json to_json_value(const ForecastConfig& c);
nlohmann::json to_json_value(const NoiseConfig& c);
void read_json(const nlohmann::json& j, CompletionConfig& c, const std::string& where);
void read_json(const nlohmann::json& j, ForecastConfig& c, const std::string& where);
void read_json(const nlohmann::json& j, NoiseConfig& c, const std::string& where);

}  // namespace loco

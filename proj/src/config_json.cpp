#include "loco/config_json.hpp"

#include <set>

namespace loco {
namespace {

using nlohmann::json;

class StrictReader {
 public:
  StrictReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }
  void get_size(const char* key, std::size_t& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    if (!it->is_number_unsigned()) {
      throw ConfigError(where_ + "." + key + ": expected a non-negative integer");
    }
    out = it->get<std::size_t>();
  }
  template <class E, class Parse>
  void get_enum(const char* key, E& out, Parse parse) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    if (!it->is_string()) throw ConfigError(where_ + "." + key + ": expected a string");
    try {
      out = parse(it->get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(where_ + ": unknown key '" + it.key() + "'");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

template <class Validate>
void validated(const std::string& where, Validate v) {
  try {
    v();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

}  // namespace

json to_json_value(const CompletionConfig& c) {
  return {{"widths", c.widths},
          {"activation", activation_name(c.activation)},
          {"input_dropout", c.input_dropout},
          {"learning_rate", c.learning_rate},
          {"final_lr_fraction", c.final_lr_fraction},
          {"steps", c.steps},
          {"batch", c.batch},
          {"alpha_c", c.alpha_c},
          {"frame_width", c.frame_width},
          {"frame_height", c.frame_height}};
}

void read_json(const json& j, CompletionConfig& c, const std::string& where) {
  StrictReader r(j, where);
  r.get("widths", c.widths);
  r.get_enum("activation", c.activation, parse_activation);
  r.get("input_dropout", c.input_dropout);
  r.get("learning_rate", c.learning_rate);
  r.get("final_lr_fraction", c.final_lr_fraction);
  r.get_size("steps", c.steps);
  r.get_size("batch", c.batch);
  r.get("alpha_c", c.alpha_c);
  r.get("frame_width", c.frame_width);
  r.get("frame_height", c.frame_height);
  r.finish();
  validated(where, [&] { c.validate(); });
}

json to_json_value(const ForecastConfig& c) {
  return {{"t_p", c.t_p},
          {"t_f", c.t_f},
          {"alpha_c", c.alpha_c},
          {"local_layers", c.local_layers},
          {"global_layers", c.global_layers},
          {"entangled_layers", c.entangled_layers},
          {"hidden", c.hidden},
          {"kernel", c.kernel},
          {"frame_hidden", c.frame_hidden},
          {"local_lr", c.local_lr},
          {"global_lr", c.global_lr},
          {"entangled_lr", c.entangled_lr},
          {"epochs", c.epochs},
          {"final_lr_fraction", c.final_lr_fraction},
          {"batch", c.batch},
          {"teacher_forcing", c.teacher_forcing},
          {"local_residual", c.local_residual},
          {"codec_lr", c.codec_lr},
          {"codec_steps", c.codec_steps},
          {"residual_mode", residual_mode_name(c.residual_mode)},
          {"pooling_mode", pooling_mode_name(c.pooling_mode)},
          {"use_transforms", c.use_transforms},
          {"offset_scale", c.offset_scale},
          {"position_scale", c.position_scale},
          {"residual_scale", c.residual_scale},
          {"depth_scale", c.depth_scale},
          {"translation_scale", c.translation_scale}};
}

void read_json(const json& j, ForecastConfig& c, const std::string& where) {
  StrictReader r(j, where);
  r.get_size("t_p", c.t_p);
  r.get_size("t_f", c.t_f);
  r.get("alpha_c", c.alpha_c);
  r.get_size("local_layers", c.local_layers);
  r.get_size("global_layers", c.global_layers);
  r.get_size("entangled_layers", c.entangled_layers);
  r.get_size("hidden", c.hidden);
  r.get_size("kernel", c.kernel);
  r.get_size("frame_hidden", c.frame_hidden);
  r.get("local_lr", c.local_lr);
  r.get("global_lr", c.global_lr);
  r.get("entangled_lr", c.entangled_lr);
  r.get_size("epochs", c.epochs);
  r.get("final_lr_fraction", c.final_lr_fraction);
  r.get_size("batch", c.batch);
  r.get("teacher_forcing", c.teacher_forcing);
  r.get("local_residual", c.local_residual);
  r.get("codec_lr", c.codec_lr);
  r.get_size("codec_steps", c.codec_steps);
  r.get_enum("residual_mode", c.residual_mode, parse_residual_mode);
  r.get_enum("pooling_mode", c.pooling_mode, parse_pooling_mode);
  r.get("use_transforms", c.use_transforms);
  r.get("offset_scale", c.offset_scale);
  r.get("position_scale", c.position_scale);
  r.get("residual_scale", c.residual_scale);
  r.get("depth_scale", c.depth_scale);
  r.get("translation_scale", c.translation_scale);
  r.finish();
  validated(where, [&] { c.validate(); });
}

json to_json_value(const NoiseConfig& c) {
  return {{"dropout", c.dropout},
          {"jitter_sigma", c.jitter_sigma},
          {"confidence_cap", c.confidence_cap},
          {"rotation_jitter", c.rotation_jitter},
          {"translation_jitter", c.translation_jitter},
          {"depth_sigma", c.depth_sigma}};
}

void read_json(const json& j, NoiseConfig& c, const std::string& where) {
  StrictReader r(j, where);
  r.get("dropout", c.dropout);
  r.get("jitter_sigma", c.jitter_sigma);
  r.get("confidence_cap", c.confidence_cap);
  r.get("rotation_jitter", c.rotation_jitter);
  r.get("translation_jitter", c.translation_jitter);
  r.get("depth_sigma", c.depth_sigma);
  r.finish();
  validated(where, [&] { c.validate(); });
}

}  // namespace loco

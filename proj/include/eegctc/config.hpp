/* Copyright 2026 The eegctc Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#ifndef EEGCTC_CONFIG_HPP_
#define EEGCTC_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"

#include "eegctc/ctc.hpp"
#include "eegctc/errors.hpp"
#include "eegctc/model.hpp"
#include "eegctc/synth.hpp"

namespace eegctc {

struct TrainConfig {
  std::uint64_t seed = 1;
  std::size_t iterations = 200;
  std::size_t batch_size = 128;
  std::size_t eval_interval = 100;
  std::size_t test_size = 64;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double grad_clip = 0.0;  // global L2 norm; 0 disables
  std::size_t hidden_size = 64;
  double dropout = 0.5;
  double bn_momentum = 0.9;
  double bn_eps = 1e-5;
  std::string precision = "float64";  // or "float32"
  SynthConfig synth;
  std::string bank;           // segment bank file; empty -> surrogate bank
  double target_cled = -1.0;  // stop once test CLED <= target; < 0 disables
  std::size_t listing_size = 20;
  std::string checkpoint = "checkpoint.ckpt";
  std::string metrics = "metrics.jsonl";
  bool log_timing = false;  // wall-clock seconds in metrics lines

  ModelConfig model() const {
    ModelConfig m;
    m.eegnet.channels = synth.channels;
    m.eegnet.segment_length = synth.segment_length;
    m.eegnet.dropout = dropout;
    m.eegnet.bn_momentum = bn_momentum;
    m.eegnet.bn_eps = bn_eps;
    m.hidden_size = hidden_size;
    m.alphabet = Alphabet(synth.labels);
    return m;
  }

  void validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (eval_interval < 1) throw ConfigError("eval_interval must be >= 1");
    if (test_size < 1) throw ConfigError("test_size must be >= 1");
    if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
      throw ConfigError("adam betas must lie in [0, 1)");
    }
    if (!(adam_epsilon > 0.0)) throw ConfigError("adam_epsilon must be > 0");
    if (!(grad_clip >= 0.0)) throw ConfigError("grad_clip must be >= 0");
    if (hidden_size < 1) throw ConfigError("hidden_size must be >= 1");
    if (precision != "float64" && precision != "float32") {
      throw ConfigError("precision must be \"float64\" or \"float32\"");
    }
    synth.validate();
    model().eegnet.validate();
  }
};

inline nlohmann::json to_json(const TrainConfig& c) {
  return nlohmann::json{
      {"seed", c.seed},
      {"iterations", c.iterations},
      {"batch_size", c.batch_size},
      {"eval_interval", c.eval_interval},
      {"test_size", c.test_size},
      {"learning_rate", c.learning_rate},
      {"adam_beta1", c.adam_beta1},
      {"adam_beta2", c.adam_beta2},
      {"adam_epsilon", c.adam_epsilon},
      {"grad_clip", c.grad_clip},
      {"hidden_size", c.hidden_size},
      {"dropout", c.dropout},
      {"bn_momentum", c.bn_momentum},
      {"bn_eps", c.bn_eps},
      {"precision", c.precision},
      {"labels", c.synth.labels},
      {"min_label_length", c.synth.min_label_length},
      {"max_label_length", c.synth.max_label_length},
      {"min_repeat", c.synth.min_repeat},
      {"max_repeat", c.synth.max_repeat},
      {"smooth_window", c.synth.smooth_window},
      {"channels", c.synth.channels},
      {"segment_length", c.synth.segment_length},
      {"bank_size", c.synth.bank_size},
      {"frequencies", c.synth.frequencies},
      {"amplitude", c.synth.amplitude},
      {"amplitude_jitter", c.synth.amplitude_jitter},
      {"noise_sigma", c.synth.noise_sigma},
      {"random_phase", c.synth.random_phase},
      {"bank", c.bank},
      {"target_cled", c.target_cled},
      {"listing_size", c.listing_size},
      {"checkpoint", c.checkpoint},
      {"metrics", c.metrics},
      {"log_timing", c.log_timing},
  };
}

// Sets one key. Unknown keys and type mismatches raise ConfigError.
inline void set_config_value(TrainConfig& c, const std::string& key,
                             const nlohmann::json& v) {
  try {
    if (key == "seed") c.seed = v.get<std::uint64_t>();
    else if (key == "iterations") c.iterations = v.get<std::size_t>();
    else if (key == "batch_size") c.batch_size = v.get<std::size_t>();
    else if (key == "eval_interval") c.eval_interval = v.get<std::size_t>();
    else if (key == "test_size") c.test_size = v.get<std::size_t>();
    else if (key == "learning_rate") c.learning_rate = v.get<double>();
    else if (key == "adam_beta1") c.adam_beta1 = v.get<double>();
    else if (key == "adam_beta2") c.adam_beta2 = v.get<double>();
    else if (key == "adam_epsilon") c.adam_epsilon = v.get<double>();
    else if (key == "grad_clip") c.grad_clip = v.get<double>();
    else if (key == "hidden_size") c.hidden_size = v.get<std::size_t>();
    else if (key == "dropout") c.dropout = v.get<double>();
    else if (key == "bn_momentum") c.bn_momentum = v.get<double>();
    else if (key == "bn_eps") c.bn_eps = v.get<double>();
    else if (key == "precision") c.precision = v.get<std::string>();
    else if (key == "labels") c.synth.labels = v.get<std::vector<std::string>>();
    else if (key == "min_label_length") c.synth.min_label_length = v.get<std::size_t>();
    else if (key == "max_label_length") c.synth.max_label_length = v.get<std::size_t>();
    else if (key == "min_repeat") c.synth.min_repeat = v.get<std::size_t>();
    else if (key == "max_repeat") c.synth.max_repeat = v.get<std::size_t>();
    else if (key == "smooth_window") c.synth.smooth_window = v.get<std::size_t>();
    else if (key == "channels") c.synth.channels = v.get<std::size_t>();
    else if (key == "segment_length") c.synth.segment_length = v.get<std::size_t>();
    else if (key == "bank_size") c.synth.bank_size = v.get<std::size_t>();
    else if (key == "frequencies") c.synth.frequencies = v.get<std::vector<double>>();
    else if (key == "amplitude") c.synth.amplitude = v.get<double>();
    else if (key == "amplitude_jitter") c.synth.amplitude_jitter = v.get<double>();
    else if (key == "noise_sigma") c.synth.noise_sigma = v.get<double>();
    else if (key == "random_phase") c.synth.random_phase = v.get<bool>();
    else if (key == "bank") c.bank = v.get<std::string>();
    else if (key == "target_cled") c.target_cled = v.get<double>();
    else if (key == "listing_size") c.listing_size = v.get<std::size_t>();
    else if (key == "checkpoint") c.checkpoint = v.get<std::string>();
    else if (key == "metrics") c.metrics = v.get<std::string>();
    else if (key == "log_timing") c.log_timing = v.get<bool>();
    else throw ConfigError("unknown config key '" + key + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

inline TrainConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  TrainConfig c;
  for (const auto& [key, value] : j.items()) set_config_value(c, key, value);
  return c;
}

inline TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("malformed config '" + path.string() + "': " + e.what());
  }
  return config_from_json(j);
}

}  // namespace eegctc

#endif  // EEGCTC_CONFIG_HPP_

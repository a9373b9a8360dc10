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
// eegctc command-line front end.
//
//   eegctc generate --what bank|dataset --out FILE [--count N] [--split test|fresh]
//   eegctc train    [--config FILE] [--<key> VALUE ...]
//   eegctc eval     --checkpoint FILE [--data FILE]
//   eegctc decode   --checkpoint FILE --signal FILE [--index I]
//
// Exit status: 0 success, 1 usage error, 2 runtime error.

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "eegctc/eegctc.hpp"

namespace {

using namespace eegctc;
using nlohmann::json;

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

// Raised for bad invocations that get past the argument parser.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigFlags {
  std::string config_path;
  std::map<std::string, std::string> overrides;
};

// --config plus one --<key> flag per config key.
void add_config_flags(CLI::App* app, ConfigFlags& flags) {
  app->add_option("--config", flags.config_path, "JSON config file");
  const json defaults = to_json(TrainConfig{});
  for (const auto& [key, value] : defaults.items()) {
    auto* opt = app->add_option_function<std::string>(
        "--" + key, [&flags, key](const std::string& v) { flags.overrides[key] = v; },
        "config override (default " + value.dump() + ")");
    opt->group("Config keys");
  }
}

// Flag text -> JSON value. Numbers, booleans and JSON literals parse as
// such; list keys also take comma-separated items; anything else is a string.
json parse_flag_value(const std::string& text, const json& like) {
  if (like.is_array() && (text.empty() || text.front() != '[')) {
    json arr = json::array();
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) {
      arr.push_back(parse_flag_value(item, json(nullptr)));
    }
    return arr;
  }
  if (like.is_string()) return text;
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    return text;
  }
}

TrainConfig resolve_config(const ConfigFlags& flags) {
  TrainConfig cfg;
  try {
    if (!flags.config_path.empty()) {
      if (!std::filesystem::exists(flags.config_path)) {
        throw UsageError("config file '" + flags.config_path + "' does not exist");
      }
      cfg = load_config(flags.config_path);
    }
    const json defaults = to_json(TrainConfig{});
    for (const auto& [key, text] : flags.overrides) {
      set_config_value(cfg, key, parse_flag_value(text, defaults.at(key)));
    }
    cfg.validate();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string(what) + " is required");
  if (!std::filesystem::exists(path)) {
    throw UsageError(std::string(what) + " '" + path + "' does not exist");
  }
}

std::string format_seconds(double s) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(1) << s << "s";
  return o.str();
}

void print_listing(const Alphabet& alphabet, const std::vector<DecodedPair>& listing) {
  std::size_t width = 7;
  for (const auto& p : listing) width = std::max(width, alphabet.format(p.decoded).size());
  std::cout << "  #  " << std::left << std::setw(static_cast<int>(width)) << "decoded"
            << "  truth\n";
  for (std::size_t i = 0; i < listing.size(); ++i) {
    const auto& p = listing[i];
    std::cout << std::right << std::setw(3) << i << "  " << std::left
              << std::setw(static_cast<int>(width)) << alphabet.format(p.decoded) << "  "
              << alphabet.format(p.truth) << (p.decoded == p.truth ? "" : "   *") << '\n';
  }
  std::size_t matches = 0;
  for (const auto& p : listing) matches += p.decoded == p.truth;
  std::cout << "exact matches: " << matches << "/" << listing.size() << '\n';
}

// ---------------------------------------------------------------------------

int cmd_generate(const ConfigFlags& flags, const std::string& what, const std::string& out,
                 std::optional<std::size_t> count, const std::string& split) {
  const TrainConfig cfg = resolve_config(flags);
  if (out.empty()) throw UsageError("--out is required");
  const auto bank = make_bank(cfg);
  if (what == "bank") {
    save_bank(bank, out);
    std::cout << "wrote bank with " << bank.class_count() << " classes to " << out << '\n';
    return 0;
  }
  if (split != "test" && split != "fresh") throw UsageError("--split must be test or fresh");
  SampleSet set;
  set.labels = cfg.synth.labels;
  set.channels = cfg.synth.channels;
  set.segment_length = cfg.synth.segment_length;
  const std::size_t n = count.value_or(cfg.test_size);
  set.samples = make_dataset(cfg.synth, bank, cfg.seed,
                             split == "test" ? kStreamTest : kStreamDataset, n);
  save_samples(set, out);
  std::cout << "wrote " << n << " samples to " << out << '\n';
  return 0;
}

template <typename T>
int train_as(const TrainConfig& cfg) {
  const Alphabet alphabet = cfg.model().alphabet;
  auto observer = [&](const MetricsRecord& rec, const EvalReport&) {
    std::cout << "iter " << std::setw(5) << rec.iteration << "  loss "
              << (rec.train_loss ? std::to_string(*rec.train_loss) : std::string("-"))
              << "  test_loss " << rec.test_loss << "  cled " << rec.cled;
    if (rec.seconds) std::cout << "  " << format_seconds(*rec.seconds);
    std::cout << std::endl;
  };
  const auto result = run_training<T>(cfg, observer);
  std::cout << "first " << result.last_report.listing.size() << " test decodes:\n";
  print_listing(alphabet, result.last_report.listing);
  if (!cfg.checkpoint.empty()) std::cout << "checkpoint: " << cfg.checkpoint << '\n';
  if (!cfg.metrics.empty()) std::cout << "metrics: " << cfg.metrics << '\n';
  return 0;
}

int cmd_train(const ConfigFlags& flags) {
  const TrainConfig cfg = resolve_config(flags);
  return cfg.precision == "float32" ? train_as<float>(cfg) : train_as<double>(cfg);
}

std::vector<SyntheticSample> load_for(const TrainConfig& cfg, const std::string& path) {
  const auto set = load_samples(path);
  if (set.labels != cfg.synth.labels || set.channels != cfg.synth.channels ||
      set.segment_length != cfg.synth.segment_length) {
    throw UsageError("data file '" + path + "' does not match the checkpoint's labels or shape");
  }
  return set.samples;
}

template <typename T>
int eval_as(const Checkpoint& ckpt, const TrainConfig& cfg, const std::string& data,
            std::size_t listing) {
  auto [model, adam] = restore_checkpoint<T>(ckpt);
  std::vector<SyntheticSample> samples;
  if (data.empty()) {
    samples = make_test_set(cfg, make_bank(cfg));
  } else {
    samples = load_for(cfg, data);
  }
  const auto report = evaluate(model, std::span<const SyntheticSample>(samples), listing);
  std::cout << "checkpoint iteration " << ckpt.iteration << '\n';
  std::cout << "CLED " << std::setprecision(6) << report.cled << " over " << samples.size()
            << " samples (mean test loss " << report.mean_loss << ")\n";
  if (report.truncated) {
    std::cerr << "warning: " << report.truncated
              << " signal(s) had a trailing partial segment, which was dropped\n";
  }
  print_listing(model.config().alphabet, report.listing);
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& data) {
  require_file(checkpoint, "--checkpoint");
  if (!data.empty()) require_file(data, "--data");
  const auto ckpt = load_checkpoint(checkpoint);
  const TrainConfig cfg = config_from_json(ckpt.config);
  return cfg.precision == "float32" ? eval_as<float>(ckpt, cfg, data, cfg.listing_size)
                                    : eval_as<double>(ckpt, cfg, data, cfg.listing_size);
}

template <typename T>
int decode_as(const Checkpoint& ckpt, const TrainConfig& cfg, const std::string& signal,
              std::optional<std::size_t> index) {
  auto [model, adam] = restore_checkpoint<T>(ckpt);
  const auto samples = load_for(cfg, signal);
  if (index && *index >= samples.size()) {
    throw UsageError("--index " + std::to_string(*index) + " out of range for " +
                     std::to_string(samples.size()) + " samples");
  }
  const std::size_t lo = index.value_or(0), hi = index ? *index + 1 : samples.size();
  for (std::size_t i = lo; i < hi; ++i) {
    std::cout << model.config().alphabet.format(model.decode(samples[i].signal)) << '\n';
  }
  return 0;
}

int cmd_decode(const std::string& checkpoint, const std::string& signal,
               std::optional<std::size_t> index) {
  require_file(checkpoint, "--checkpoint");
  require_file(signal, "--signal");
  const auto ckpt = load_checkpoint(checkpoint);
  const TrainConfig cfg = config_from_json(ckpt.config);
  return cfg.precision == "float32" ? decode_as<float>(ckpt, cfg, signal, index)
                                    : decode_as<double>(ckpt, cfg, signal, index);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CNN-LSTM-CTC decoder for sequence-labelled EEG"};
  app.require_subcommand(1);

  ConfigFlags gen_flags, train_flags;
  std::string what = "dataset", out, split = "fresh";
  std::optional<std::size_t> count;
  auto* gen = app.add_subcommand("generate", "write a segment bank or a sample dataset");
  gen->add_option("--what", what, "bank or dataset")->check(CLI::IsMember({"bank", "dataset"}));
  gen->add_option("--out", out, "output file")->required();
  gen->add_option("--count", count, "number of samples (default: test_size)");
  gen->add_option("--split", split, "test: the training run's test set; fresh: a new stream")
      ->check(CLI::IsMember({"test", "fresh"}));
  add_config_flags(gen, gen_flags);

  auto* train = app.add_subcommand("train", "train from a config; writes checkpoint and metrics");
  add_config_flags(train, train_flags);

  std::string eval_ckpt, eval_data;
  auto* eval = app.add_subcommand("eval", "CLED report and decode listing for a checkpoint");
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval->add_option("--data", eval_data, "sample file (default: the run's test set)");

  std::string dec_ckpt, dec_signal;
  std::optional<std::size_t> dec_index;
  auto* decode = app.add_subcommand("decode", "print decoded label sequences for a sample file");
  decode->add_option("--checkpoint", dec_ckpt, "checkpoint file")->required();
  decode->add_option("--signal", dec_signal, "sample file")->required();
  decode->add_option("--index", dec_index, "decode only this sample");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*gen) return cmd_generate(gen_flags, what, out, count, split);
    if (*train) return cmd_train(train_flags);
    if (*eval) return cmd_eval(eval_ckpt, eval_data);
    if (*decode) return cmd_decode(dec_ckpt, dec_signal, dec_index);
  } catch (const UsageError& e) {
    const auto chosen = app.get_subcommands();
    std::cerr << "error: " << e.what() << "\n\n"
              << (chosen.empty() ? app.help() : chosen.front()->help());
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

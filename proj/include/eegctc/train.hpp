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
// Training loop, Adam, evaluation by normalized edit distance, checkpoints
// and metrics lines.
#ifndef EEGCTC_TRAIN_HPP_
#define EEGCTC_TRAIN_HPP_

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "eegctc/binary_io.hpp"
#include "eegctc/config.hpp"
#include "eegctc/ctc.hpp"
#include "eegctc/model.hpp"
#include "eegctc/prng.hpp"
#include "eegctc/synth.hpp"

namespace eegctc {

// Seed streams derived from the master seed.
enum : std::uint64_t {
  kStreamBank = 1,
  kStreamTest = 2,
  kStreamInit = 3,
  kStreamDropout = 4,
  kStreamTrain = 5,
  kStreamDataset = 6,
};

// Levenshtein distance with unit costs.
template <typename Seq>
std::size_t edit_distance(const Seq& a, const Seq& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

template <typename T>
class Adam {
 public:
  Adam() = default;
  Adam(double lr, double beta1, double beta2, double eps)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  // Moment buffers are created lazily on the first step.
  void step(std::vector<std::pair<std::string, Tensor<T>*>> params, double grad_clip = 0.0) {
    if (first_moment_.empty()) {
      for (auto& [name, p] : params) {
        first_moment_.emplace_back(p->shape());
        second_moment_.emplace_back(p->shape());
      }
    }
    if (first_moment_.size() != params.size()) {
      throw StateError("adam: parameter list changed between steps");
    }
    double scale = 1.0;
    if (grad_clip > 0.0) {
      double sq = 0.0;
      for (auto& [name, p] : params)
        for (const T g : p->grad()) sq += static_cast<double>(g) * g;
      const double norm = std::sqrt(sq);
      if (norm > grad_clip) scale = grad_clip / norm;
    }
    ++steps_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto values = params[i].second->data();
      const auto grads = params[i].second->grad();
      auto& m = first_moment_[i];
      auto& v = second_moment_[i];
      for (std::size_t k = 0; k < values.size(); ++k) {
        const double g = static_cast<double>(grads[k]) * scale;
        m[k] = static_cast<T>(beta1_ * m[k] + (1.0 - beta1_) * g);
        v[k] = static_cast<T>(beta2_ * v[k] + (1.0 - beta2_) * g * g);
        const double update = lr_ * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps_);
        values[k] = static_cast<T>(values[k] - update);
      }
    }
  }

  std::uint64_t steps() const { return steps_; }
  std::vector<Tensor<T>>& first_moment() { return first_moment_; }
  std::vector<Tensor<T>>& second_moment() { return second_moment_; }
  void restore(std::uint64_t steps, std::vector<Tensor<T>> m, std::vector<Tensor<T>> v) {
    steps_ = steps;
    first_moment_ = std::move(m);
    second_moment_ = std::move(v);
  }

 private:
  double lr_ = 1e-3, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  std::uint64_t steps_ = 0;
  std::vector<Tensor<T>> first_moment_, second_moment_;
};

struct StepResult {
  double mean_loss = 0.0;  // per feasible sample
  std::size_t skipped = 0;  // samples without any valid alignment
};

// One optimizer step on a batch: summed CTC loss, gradient averaged over
// the samples that have a valid alignment.
template <typename T>
StepResult train_step(Model<T>& model, Adam<T>& adam,
                      std::span<const SyntheticSample> batch, Prng& dropout_rng,
                      double grad_clip = 0.0) {
  if (batch.empty()) throw ArgumentError("train_step: empty batch");
  std::vector<Tensor<double>> signals;
  signals.reserve(batch.size());
  for (const auto& s : batch) signals.push_back(s.signal);
  model.zero_grad();
  auto pass = model.forward(signals, Mode::train, dropout_rng, true);

  std::vector<Tensor<T>> grads;
  grads.reserve(batch.size());
  StepResult r;
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto ctc = ctc_loss_from_logits(pass.logits[i], batch[i].label);
    if (!ctc.feasible) {
      ++r.skipped;
      grads.emplace_back(pass.logits[i].shape());
      continue;
    }
    total += ctc.loss;
    grads.push_back(std::move(ctc.grad_logits));
  }
  const std::size_t used = batch.size() - r.skipped;
  if (used == 0) {
    throw ConfigError("train_step: no sample in the batch has a valid CTC alignment; "
                      "check label length and repeat ranges");
  }
  const T inv = static_cast<T>(1.0 / static_cast<double>(used));
  for (auto& g : grads)
    for (auto& v : g.data()) v *= inv;
  model.backward(pass, grads);
  adam.step(model.parameters(), grad_clip);
  r.mean_loss = total / static_cast<double>(used);
  return r;
}

struct DecodedPair {
  LabelSequence decoded;
  LabelSequence truth;
};

struct EvalReport {
  double cled = 0.0;       // mean of ED(decoded, truth) / |truth|
  double mean_loss = 0.0;  // mean CTC loss over feasible samples
  std::size_t infeasible = 0;
  std::size_t truncated = 0;  // signals whose length was not a multiple of S
  std::vector<DecodedPair> listing;
};

// Eval-mode decoding of every sample. The CLED sum is taken over sorted
// per-sample terms so the result does not depend on sample order.
template <typename T>
EvalReport evaluate(Model<T>& model, std::span<const SyntheticSample> testset,
                    std::size_t listing_size = 20) {
  if (testset.empty()) throw ArgumentError("evaluate: empty test set");
  EvalReport report;
  std::vector<double> terms, losses;
  terms.reserve(testset.size());
  Prng unused(0);
  for (const auto& sample : testset) {
    if (sample.label.empty()) throw ArgumentError("evaluate: sample with empty label");
    auto pass = model.forward(std::span<const Tensor<double>>(&sample.signal, 1), Mode::eval,
                              unused, false);
    report.truncated += pass.dropped_samples;
    const auto& logits = pass.logits.front();
    const auto decoded = greedy_decode(softmax_rows(logits));
    terms.push_back(static_cast<double>(edit_distance(decoded, sample.label)) /
                    static_cast<double>(sample.label.size()));
    const auto ctc = ctc_loss_from_logits(logits, sample.label);
    if (ctc.feasible) losses.push_back(ctc.loss);
    else ++report.infeasible;
    if (report.listing.size() < listing_size) report.listing.push_back({decoded, sample.label});
  }
  std::sort(terms.begin(), terms.end());
  std::sort(losses.begin(), losses.end());
  double sum = 0.0;
  for (const double t : terms) sum += t;
  report.cled = sum / static_cast<double>(terms.size());
  double loss_sum = 0.0;
  for (const double l : losses) loss_sum += l;
  report.mean_loss = losses.empty() ? 0.0 : loss_sum / static_cast<double>(losses.size());
  return report;
}

// ---------------------------------------------------------------------------
// Checkpoint container: "CKPT", u32 version, config JSON blob, u64 iteration,
// u64 optimizer step count, u32 tensor count, then per tensor a name, rank,
// extents and float64 values.

struct Checkpoint {
  nlohmann::json config;
  std::uint64_t iteration = 0;
  std::uint64_t optimizer_steps = 0;
  std::vector<std::pair<std::string, Tensor<double>>> tensors;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

inline std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  io::Writer w;
  w.magic("CKPT");
  w.u32(kCheckpointVersion);
  w.str(ckpt.config.dump());
  w.u64(ckpt.iteration);
  w.u64(ckpt.optimizer_steps);
  w.u32(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (const auto d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (const double v : t.data()) w.f64(v);
  }
  return w.buffer();
}

inline Checkpoint decode_checkpoint(std::vector<std::uint8_t> bytes, std::string source) {
  io::Reader r(std::move(bytes), std::move(source));
  r.magic("CKPT");
  const auto version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw MalformedHeaderError(r.source() + ": unsupported checkpoint version " +
                               std::to_string(version));
  }
  Checkpoint ckpt;
  try {
    ckpt.config = nlohmann::json::parse(r.str("config"));
  } catch (const nlohmann::json::parse_error& e) {
    throw MalformedHeaderError(r.source() + ": config blob is not JSON: " + e.what());
  }
  ckpt.iteration = r.u64("iteration");
  ckpt.optimizer_steps = r.u64("optimizer steps");
  const auto count = r.u32("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    auto name = r.str("tensor name");
    const auto rank = r.u32("tensor rank");
    Shape shape;
    for (std::uint32_t a = 0; a < rank; ++a) {
      const auto d = r.u32("tensor extent");
      if (d == 0) throw InconsistentShapeError(r.source() + ": zero extent in " + name);
      shape.push_back(d);
    }
    r.need(shape_size(shape) * 8, "tensor payload");
    Tensor<double> t(shape);
    for (auto& v : t.data()) v = r.f64("tensor value");
    ckpt.tensors.emplace_back(std::move(name), std::move(t));
  }
  if (r.remaining() != 0) {
    throw InconsistentShapeError(r.source() + ": trailing bytes after tensors");
  }
  return ckpt;
}

inline void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  io::write_file(path, encode_checkpoint(ckpt));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_file(path), path.string());
}

template <typename T>
Checkpoint make_checkpoint(Model<T>& model, Adam<T>& adam, const TrainConfig& cfg,
                           std::uint64_t iteration) {
  Checkpoint ckpt;
  ckpt.config = to_json(cfg);
  ckpt.iteration = iteration;
  ckpt.optimizer_steps = adam.steps();
  for (auto& [name, t] : model.state()) ckpt.tensors.emplace_back(name, t->template cast<double>());
  const auto params = model.parameters();
  for (std::size_t i = 0; i < adam.first_moment().size(); ++i) {
    ckpt.tensors.emplace_back("adam.m." + params[i].first,
                              adam.first_moment()[i].template cast<double>());
    ckpt.tensors.emplace_back("adam.v." + params[i].first,
                              adam.second_moment()[i].template cast<double>());
  }
  return ckpt;
}

// Rebuilds model and optimizer from a checkpoint.
template <typename T>
std::pair<Model<T>, Adam<T>> restore_checkpoint(const Checkpoint& ckpt) {
  const TrainConfig cfg = config_from_json(ckpt.config);
  cfg.validate();
  Model<T> model(cfg.model(), 0);
  Adam<T> adam(cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon);
  auto find = [&](const std::string& name) -> const Tensor<double>* {
    for (const auto& [n, t] : ckpt.tensors)
      if (n == name) return &t;
    return nullptr;
  };
  for (auto& [name, t] : model.state()) {
    const auto* src = find(name);
    if (!src) throw ValidationError("checkpoint: missing tensor '" + name + "'");
    if (src->shape() != t->shape()) {
      throw InconsistentShapeError("checkpoint: tensor '" + name + "' has shape " +
                                   to_string(src->shape()) + ", model expects " +
                                   to_string(t->shape()));
    }
    *t = src->template cast<T>();
  }
  std::vector<Tensor<T>> m, v;
  for (auto& [name, t] : model.parameters()) {
    const auto* mi = find("adam.m." + name);
    const auto* vi = find("adam.v." + name);
    if (!mi || !vi) break;
    if (mi->shape() != t->shape() || vi->shape() != t->shape()) {
      throw InconsistentShapeError("checkpoint: optimizer state for '" + name +
                                   "' has the wrong shape");
    }
    m.push_back(mi->template cast<T>());
    v.push_back(vi->template cast<T>());
  }
  if (!m.empty() && m.size() != model.parameters().size()) {
    throw ValidationError("checkpoint: incomplete optimizer state");
  }
  adam.restore(ckpt.optimizer_steps, std::move(m), std::move(v));
  return {std::move(model), std::move(adam)};
}

// ---------------------------------------------------------------------------

struct MetricsRecord {
  std::uint64_t iteration = 0;
  std::optional<double> train_loss;  // mean over the iterations since the last record
  double test_loss = 0.0;
  double cled = 0.0;
  std::size_t skipped = 0;
  std::optional<double> seconds;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["iteration"] = iteration;
    j["loss"] = train_loss ? nlohmann::json(*train_loss) : nlohmann::json(nullptr);
    j["test_loss"] = test_loss;
    j["cled"] = cled;
    j["skipped"] = skipped;
    if (seconds) j["seconds"] = *seconds;
    return j;
  }
};

template <typename T>
struct TrainingResult {
  Model<T> model;
  Adam<T> adam;
  std::vector<MetricsRecord> metrics;
  std::vector<double> losses;  // per training iteration
  EvalReport last_report;
  std::uint64_t iterations_run = 0;
};

// Called after every evaluation with the record and the full report.
using EvalObserver = std::function<void(const MetricsRecord&, const EvalReport&)>;

inline SegmentBank make_bank(const TrainConfig& cfg) {
  if (cfg.bank.empty()) {
    Prng rng(derive_seed(cfg.seed, kStreamBank));
    return make_surrogate_bank(cfg.synth, rng);
  }
  auto bank = load_bank(cfg.bank);
  if (bank.channels != cfg.synth.channels || bank.segment_length != cfg.synth.segment_length ||
      bank.class_count() != cfg.synth.class_count()) {
    throw ConfigError("bank '" + cfg.bank + "' is " + std::to_string(bank.channels) + "x" +
                      std::to_string(bank.segment_length) + " with " +
                      std::to_string(bank.class_count()) +
                      " classes, which does not match the config");
  }
  return bank;
}

inline std::vector<SyntheticSample> make_test_set(const TrainConfig& cfg,
                                                  const SegmentBank& bank) {
  return make_dataset(cfg.synth, bank, cfg.seed, kStreamTest, cfg.test_size);
}

inline std::vector<SyntheticSample> make_train_batch(const TrainConfig& cfg,
                                                     const SegmentBank& bank,
                                                     std::uint64_t iteration) {
  return make_dataset(cfg.synth, bank, derive_seed(cfg.seed, kStreamTrain, iteration), 0,
                      cfg.batch_size);
}

// Fixed test set, fresh batch every iteration, evaluation at iteration 0 and
// every eval_interval iterations, checkpoint after each evaluation. Metrics
// and checkpoint paths may be empty to skip writing.
template <typename T>
TrainingResult<T> run_training(const TrainConfig& cfg, const EvalObserver& observer = {}) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const auto bank = make_bank(cfg);
  const auto testset = make_test_set(cfg, bank);

  TrainingResult<T> result{Model<T>(cfg.model(), derive_seed(cfg.seed, kStreamInit)),
                           Adam<T>(cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2,
                                   cfg.adam_epsilon),
                           {}, {}, {}, 0};
  Prng dropout_rng(derive_seed(cfg.seed, kStreamDropout));

  std::ofstream metrics_out;
  if (!cfg.metrics.empty()) {
    metrics_out.open(cfg.metrics, std::ios::trunc);
    if (!metrics_out) throw IoError("cannot open metrics log '" + cfg.metrics + "'");
  }

  double interval_loss = 0.0;
  std::size_t interval_steps = 0, interval_skipped = 0;
  for (std::uint64_t it = 0;; ++it) {
    if (it % cfg.eval_interval == 0 || it == cfg.iterations) {
      auto report = evaluate(result.model, std::span<const SyntheticSample>(testset),
                             cfg.listing_size);
      MetricsRecord rec;
      rec.iteration = it;
      if (interval_steps) rec.train_loss = interval_loss / static_cast<double>(interval_steps);
      rec.test_loss = report.mean_loss;
      rec.cled = report.cled;
      rec.skipped = interval_skipped;
      if (cfg.log_timing) {
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                          .count();
      }
      if (metrics_out.is_open()) {
        metrics_out << rec.to_json().dump() << '\n';
        metrics_out.flush();
        if (!metrics_out) throw IoError("write to metrics log '" + cfg.metrics + "' failed");
      }
      if (!cfg.checkpoint.empty()) {
        save_checkpoint(make_checkpoint(result.model, result.adam, cfg, it), cfg.checkpoint);
      }
      if (observer) observer(rec, report);
      result.metrics.push_back(rec);
      result.last_report = std::move(report);
      interval_loss = 0.0;
      interval_steps = interval_skipped = 0;
      if (cfg.target_cled >= 0.0 && rec.cled <= cfg.target_cled) break;
    }
    if (it >= cfg.iterations) break;

    const auto batch = make_train_batch(cfg, bank, it);
    const auto step = train_step(result.model, result.adam,
                                 std::span<const SyntheticSample>(batch), dropout_rng,
                                 cfg.grad_clip);
    result.losses.push_back(step.mean_loss);
    interval_loss += step.mean_loss;
    interval_skipped += step.skipped;
    ++interval_steps;
    result.iterations_run = it + 1;
  }
  return result;
}

}  // namespace eegctc

#endif  // EEGCTC_TRAIN_HPP_

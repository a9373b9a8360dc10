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
// Full decoder: signal -> S-sample segments -> EEGnet features -> LSTM ->
// per-frame logits over the blank-extended alphabet.
#ifndef EEGCTC_MODEL_HPP_
#define EEGCTC_MODEL_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "eegctc/ctc.hpp"
#include "eegctc/eegnet.hpp"
#include "eegctc/lstm.hpp"
#include "eegctc/ops.hpp"
#include "eegctc/prng.hpp"
#include "eegctc/tensor.hpp"

namespace eegctc {

struct ModelConfig {
  EegnetConfig eegnet;
  std::size_t hidden_size = 64;
  Alphabet alphabet;

  LstmConfig lstm() const {
    return {eegnet.feature_size(), hidden_size, alphabet.size(), 1.0};
  }
};

// Splits a C x L signal into floor(L / S) consecutive S-sample segments.
// `dropped` receives the number of trailing samples that did not fit.
template <typename T>
std::vector<Tensor<T>> split_segments(const Tensor<double>& signal,
                                      std::size_t segment_length,
                                      std::size_t* dropped = nullptr) {
  require_rank(signal, 2, "split_segments signal");
  const std::size_t channels = signal.dim(0), len = signal.dim(1);
  const std::size_t count = len / segment_length;
  if (dropped) *dropped = len - count * segment_length;
  std::vector<Tensor<T>> segs;
  segs.reserve(count);
  for (std::size_t m = 0; m < count; ++m) {
    Tensor<T> seg({channels, segment_length});
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t t = 0; t < segment_length; ++t)
        seg.at(c, t) = static_cast<T>(signal.at(c, m * segment_length + t));
    segs.push_back(std::move(seg));
  }
  return segs;
}

template <typename T>
class Model {
 public:
  // Activations of one batched forward pass, kept for backward.
  struct Pass {
    EegnetCache<T> cnn;
    std::vector<LstmCache<T>> rnn;
    std::vector<std::size_t> offsets;  // first segment index of each signal
    std::vector<Tensor<T>> logits;     // per signal, frames x |L'|
    std::size_t dropped_samples = 0;
  };

  Model() = default;

  Model(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.eegnet.validate();
    Prng rng(seed);
    cnn = EegnetParams<T>(cfg_.eegnet, rng);
    rnn = LstmParams<T>(cfg_.lstm(), rng);
  }

  const ModelConfig& config() const { return cfg_; }

  std::vector<std::pair<std::string, Tensor<T>*>> parameters() {
    auto p = cnn.trainable();
    for (auto& q : rnn.trainable()) p.push_back(q);
    return p;
  }

  // Trainable tensors followed by batchnorm running statistics.
  std::vector<std::pair<std::string, Tensor<T>*>> state() {
    auto p = parameters();
    for (auto& q : cnn.running_stats()) p.push_back(q);
    return p;
  }

  void zero_grad() {
    for (auto& [name, t] : parameters()) {
      t->enable_grad();
      t->zero_grad();
    }
  }

  // All segments of all signals pass through EEGnet as one batch.
  Pass forward(std::span<const Tensor<double>> signals, Mode mode, Prng& rng,
               bool keep_cache) {
    Pass pass;
    std::vector<Tensor<T>> segments;
    for (const auto& sig : signals) {
      std::size_t dropped = 0;
      auto segs = split_segments<T>(sig, cfg_.eegnet.segment_length, &dropped);
      if (segs.empty()) {
        throw ArgumentError("model forward: signal of " + std::to_string(sig.dim(1)) +
                            " samples is shorter than one segment");
      }
      if (dropped) ++pass.dropped_samples;
      pass.offsets.push_back(segments.size());
      for (auto& s : segs) segments.push_back(std::move(s));
    }
    pass.offsets.push_back(segments.size());

    auto features = eegnet_forward<T>(segments, cnn, mode, rng,
                                      keep_cache ? &pass.cnn : nullptr);
    const std::size_t width = cfg_.eegnet.feature_size();
    if (keep_cache) pass.rnn.resize(signals.size());
    for (std::size_t i = 0; i < signals.size(); ++i) {
      const std::size_t frames = pass.offsets[i + 1] - pass.offsets[i];
      Tensor<T> xs({frames, width});
      for (std::size_t t = 0; t < frames; ++t) {
        const auto& f = features[pass.offsets[i] + t];
        std::copy(f.data().begin(), f.data().end(), xs.row(t).begin());
      }
      const auto hidden = lstm_forward(xs, rnn, keep_cache ? &pass.rnn[i] : nullptr);
      pass.logits.push_back(project_logits(hidden, rnn));
    }
    return pass;
  }

  // grad_logits[i] is d loss / d pass.logits[i]. Accumulates into grads.
  void backward(const Pass& pass, std::span<const Tensor<T>> grad_logits) {
    if (pass.rnn.size() != grad_logits.size() || !pass.cnn.valid) {
      throw StateError("model backward: pass was not run with keep_cache");
    }
    const std::size_t width = cfg_.eegnet.feature_size();
    std::vector<Tensor<T>> grad_features(pass.offsets.back());
    for (std::size_t i = 0; i < grad_logits.size(); ++i) {
      const auto grad_hidden = project_backward(pass.rnn[i].hidden, grad_logits[i], rnn);
      const auto grad_x = lstm_backward(grad_hidden, pass.rnn[i], rnn);
      for (std::size_t t = 0; t < grad_x.dim(0); ++t) {
        Tensor<T> g({width});
        std::copy(grad_x.row(t).begin(), grad_x.row(t).end(), g.data().begin());
        grad_features[pass.offsets[i] + t] = std::move(g);
      }
    }
    eegnet_backward<T>(grad_features, pass.cnn, cnn);
  }

  // Eval-mode posteriors for one signal.
  Tensor<T> posteriors(const Tensor<double>& signal) {
    Prng unused(0);
    auto pass = forward(std::span<const Tensor<double>>(&signal, 1), Mode::eval, unused,
                        false);
    return softmax_rows(pass.logits.front());
  }

  LabelSequence decode(const Tensor<double>& signal) {
    return greedy_decode(posteriors(signal));
  }

  EegnetParams<T> cnn;
  LstmParams<T> rnn;

 private:
  ModelConfig cfg_;
};

}  // namespace eegctc

#endif  // EEGCTC_MODEL_HPP_

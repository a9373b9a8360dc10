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
// Connectionist temporal classification: the path-collapse map, path and
// label-sequence probabilities, the forward-backward loss with gradients
// w.r.t. pre-softmax logits, and best-path decoding.
//
// Convention: the blank symbol is the last index of the extended alphabet.
#ifndef EEGCTC_CTC_HPP_
#define EEGCTC_CTC_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "eegctc/errors.hpp"
#include "eegctc/ops.hpp"
#include "eegctc/tensor.hpp"

namespace eegctc {

// Indices into the label set L (never the blank).
using LabelSequence = std::vector<std::size_t>;
// Indices into L' = L + {blank}, one per output frame.
using Path = std::vector<std::size_t>;

class Alphabet {
 public:
  Alphabet() : Alphabet(std::vector<std::string>{"a", "u", "rest"}) {}

  explicit Alphabet(std::vector<std::string> labels) : labels_(std::move(labels)) {
    if (labels_.empty()) throw ConfigError("alphabet: no labels");
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      if (labels_[i].empty() || labels_[i] == kBlankName) {
        throw ConfigError("alphabet: label '" + labels_[i] + "' is reserved or empty");
      }
      for (std::size_t j = 0; j < i; ++j) {
        if (labels_[i] == labels_[j]) {
          throw ConfigError("alphabet: duplicate label '" + labels_[i] + "'");
        }
      }
    }
  }

  // |L'|, the number of posterior columns.
  std::size_t size() const { return labels_.size() + 1; }
  std::size_t label_count() const { return labels_.size(); }
  std::size_t blank() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }

  const std::string& name(std::size_t index) const {
    static const std::string blank_name(kBlankName);
    if (index == blank()) return blank_name;
    return labels_.at(index);
  }

  std::optional<std::size_t> find(const std::string& label) const {
    const auto it = std::find(labels_.begin(), labels_.end(), label);
    if (it == labels_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - labels_.begin());
  }

  // Whitespace-separated label names -> indices.
  LabelSequence parse(const std::string& text) const {
    std::istringstream is(text);
    LabelSequence out;
    for (std::string tok; is >> tok;) {
      const auto idx = find(tok);
      if (!idx) throw ArgumentError("unknown label '" + tok + "'");
      out.push_back(*idx);
    }
    return out;
  }

  std::string format(const std::vector<std::size_t>& seq) const {
    std::string s;
    for (std::size_t i = 0; i < seq.size(); ++i) {
      if (i) s += ' ';
      s += name(seq[i]);
    }
    return s;
  }

  friend bool operator==(const Alphabet&, const Alphabet&) = default;

  static constexpr const char* kBlankName = "_";

 private:
  std::vector<std::string> labels_;
};

// B: merge runs of identical symbols, then drop blanks.
inline LabelSequence collapse(const Path& path, std::size_t blank) {
  LabelSequence out;
  for (std::size_t t = 0; t < path.size(); ++t) {
    if (t > 0 && path[t] == path[t - 1]) continue;
    if (path[t] != blank) out.push_back(path[t]);
  }
  return out;
}

template <typename T>
double path_prob(const Tensor<T>& posteriors, const Path& path) {
  require_rank(posteriors, 2, "path_prob posteriors");
  if (path.size() != posteriors.dim(0)) {
    throw ArgumentError("path_prob: path length " + std::to_string(path.size()) +
                        " != frame count " + std::to_string(posteriors.dim(0)));
  }
  double p = 1.0;
  for (std::size_t t = 0; t < path.size(); ++t) {
    p *= static_cast<double>(posteriors.at(t, path.at(t)));
  }
  return p;
}

inline constexpr double kBruteforcePathLimit = 1e7;

// Calls fn(path, probability) for every path in L'^T.
template <typename T, typename Fn>
void for_each_path(const Tensor<T>& posteriors, Fn&& fn) {
  require_rank(posteriors, 2, "path enumeration posteriors");
  const std::size_t frames = posteriors.dim(0), n = posteriors.dim(1);
  if (static_cast<double>(frames) * std::log(static_cast<double>(n)) >
      std::log(kBruteforcePathLimit)) {
    throw ResourceError("path enumeration: " + std::to_string(n) + "^" +
                        std::to_string(frames) + " paths exceeds the 1e7 bound");
  }
  Path path(frames, 0);
  for (;;) {
    fn(path, path_prob(posteriors, path));
    std::size_t t = frames;
    while (t > 0) {
      --t;
      if (++path[t] < n) break;
      path[t] = 0;
      if (t == 0) return;
    }
  }
}

// p(l|x) by exhaustive enumeration of B^-1(l). Verification oracle only.
template <typename T>
double label_prob_bruteforce(const Tensor<T>& posteriors, const LabelSequence& labels) {
  const std::size_t blank = posteriors.dim(1) - 1;
  double total = 0.0;
  for_each_path(posteriors, [&](const Path& path, double p) {
    if (collapse(path, blank) == labels) total += p;
  });
  return total;
}

template <typename T>
struct CtcResult {
  double loss = 0.0;        // -ln p(l|x); +inf when no alignment exists
  double log_prob = 0.0;    // ln p(l|x)
  bool feasible = true;
  Tensor<T> grad_logits;    // d loss / d pre-softmax logits, T x n
};

namespace detail {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

// Forward-backward over the blank-extended label given log posteriors.
template <typename T>
CtcResult<T> ctc_from_log_probs(const std::vector<double>& log_y,
                                std::size_t frames, std::size_t n,
                                const LabelSequence& labels) {
  const std::size_t blank = n - 1;
  for (const auto l : labels) {
    if (l >= blank) {
      throw ArgumentError("ctc_loss: label index " + std::to_string(l) +
                          " is blank or out of range");
    }
  }
  const std::size_t ext_len = 2 * labels.size() + 1;
  std::vector<std::size_t> ext(ext_len, blank);
  for (std::size_t i = 0; i < labels.size(); ++i) ext[2 * i + 1] = labels[i];
  auto ly = [&](std::size_t t, std::size_t k) { return log_y[t * n + k]; };
  // Skip transition s-2 -> s allowed onto a label differing from the previous one.
  auto can_skip = [&](std::size_t s) {
    return s >= 2 && ext[s] != blank && ext[s] != ext[s - 2];
  };

  std::vector<double> alpha(frames * ext_len, kNegInf);
  std::vector<double> beta(frames * ext_len, kNegInf);
  auto A = [&](std::size_t t, std::size_t s) -> double& { return alpha[t * ext_len + s]; };
  auto B = [&](std::size_t t, std::size_t s) -> double& { return beta[t * ext_len + s]; };

  A(0, 0) = ly(0, blank);
  if (ext_len > 1) A(0, 1) = ly(0, ext[1]);
  for (std::size_t t = 1; t < frames; ++t) {
    for (std::size_t s = 0; s < ext_len; ++s) {
      double acc = A(t - 1, s);
      if (s >= 1) acc = log_add(acc, A(t - 1, s - 1));
      if (can_skip(s)) acc = log_add(acc, A(t - 1, s - 2));
      A(t, s) = acc == kNegInf ? kNegInf : acc + ly(t, ext[s]);
    }
  }

  // beta excludes the emission at frame t.
  B(frames - 1, ext_len - 1) = 0.0;
  if (ext_len > 1) B(frames - 1, ext_len - 2) = 0.0;
  for (std::size_t t = frames - 1; t-- > 0;) {
    for (std::size_t s = 0; s < ext_len; ++s) {
      double acc = B(t + 1, s) + ly(t + 1, ext[s]);
      if (s + 1 < ext_len) acc = log_add(acc, B(t + 1, s + 1) + ly(t + 1, ext[s + 1]));
      if (s + 2 < ext_len && can_skip(s + 2)) {
        acc = log_add(acc, B(t + 1, s + 2) + ly(t + 1, ext[s + 2]));
      }
      B(t, s) = acc;
    }
  }

  double log_p = A(frames - 1, ext_len - 1);
  if (ext_len > 1) log_p = log_add(log_p, A(frames - 1, ext_len - 2));

  CtcResult<T> r;
  r.grad_logits = Tensor<T>({frames, n});
  if (log_p == kNegInf) {
    r.feasible = false;
    r.log_prob = kNegInf;
    r.loss = std::numeric_limits<double>::infinity();
    return r;
  }
  r.log_prob = log_p;
  r.loss = -log_p;

  std::vector<double> occupancy(n);
  for (std::size_t t = 0; t < frames; ++t) {
    std::fill(occupancy.begin(), occupancy.end(), kNegInf);
    for (std::size_t s = 0; s < ext_len; ++s) {
      occupancy[ext[s]] = log_add(occupancy[ext[s]], A(t, s) + B(t, s));
    }
    for (std::size_t k = 0; k < n; ++k) {
      r.grad_logits.at(t, k) =
          static_cast<T>(std::exp(ly(t, k)) - std::exp(occupancy[k] - log_p));
    }
  }
  return r;
}

}  // namespace detail

// Negative log-likelihood of `labels` under per-frame posteriors (rows sum
// to one), with the gradient pushed through the softmax to the logits.
template <typename T>
CtcResult<T> ctc_loss(const Tensor<T>& posteriors, const LabelSequence& labels) {
  require_rank(posteriors, 2, "ctc_loss posteriors");
  const std::size_t frames = posteriors.dim(0), n = posteriors.dim(1);
  if (n < 2) throw DimensionError("ctc_loss: need at least one label plus blank");
  std::vector<double> log_y(frames * n);
  for (std::size_t i = 0; i < log_y.size(); ++i) {
    log_y[i] = std::log(static_cast<double>(posteriors[i]));
  }
  return detail::ctc_from_log_probs<T>(log_y, frames, n, labels);
}

// Same, starting from unnormalized logits (log-softmax avoids log(0)).
template <typename T>
CtcResult<T> ctc_loss_from_logits(const Tensor<T>& logits, const LabelSequence& labels) {
  require_rank(logits, 2, "ctc_loss logits");
  const std::size_t frames = logits.dim(0), n = logits.dim(1);
  if (n < 2) throw DimensionError("ctc_loss: need at least one label plus blank");
  const auto log_probs = log_softmax_rows(logits.template cast<double>());
  return detail::ctc_from_log_probs<T>(log_probs.values(), frames, n, labels);
}

// Per-frame argmax (lowest index on ties), then collapse.
template <typename T>
LabelSequence greedy_decode(const Tensor<T>& posteriors) {
  require_rank(posteriors, 2, "greedy_decode posteriors");
  Path best(posteriors.dim(0));
  for (std::size_t t = 0; t < best.size(); ++t) {
    const auto row = posteriors.row(t);
    best[t] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) -
                                       row.begin());
  }
  return collapse(best, posteriors.dim(1) - 1);
}

}  // namespace eegctc

#endif  // EEGCTC_CTC_HPP_

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
// Single-layer, left-to-right LSTM over the per-segment feature sequence,
// followed by an affine projection to per-frame label logits.
//
// Gate pre-activations are laid out as four consecutive blocks of `hidden`
// columns: input, forget, cell candidate, output.
#ifndef EEGCTC_LSTM_HPP_
#define EEGCTC_LSTM_HPP_

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "eegctc/errors.hpp"
#include "eegctc/ops.hpp"
#include "eegctc/prng.hpp"
#include "eegctc/tensor.hpp"

namespace eegctc {

struct LstmConfig {
  std::size_t input_size = 50;
  std::size_t hidden_size = 64;
  std::size_t output_size = 4;  // |L'|
  double forget_bias = 1.0;

  void validate() const {
    if (input_size == 0 || hidden_size == 0 || output_size < 2) {
      throw ConfigError("lstm: input/hidden sizes must be positive and outputs >= 2");
    }
  }
};

template <typename T>
struct LstmParams {
  Tensor<T> w_input;   // input_size x 4H
  Tensor<T> w_hidden;  // H x 4H
  Tensor<T> bias;      // 4H
  Tensor<T> w_proj;    // H x n
  Tensor<T> b_proj;    // n

  LstmParams() = default;

  LstmParams(const LstmConfig& cfg, Prng& rng) {
    cfg.validate();
    const std::size_t h = cfg.hidden_size;
    auto uniform = [&rng](Shape shape, std::size_t fan_in) {
      Tensor<T> t(std::move(shape));
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (auto& v : t.data()) v = static_cast<T>(rng.uniform(-bound, bound));
      return t;
    };
    w_input = uniform({cfg.input_size, 4 * h}, cfg.input_size);
    w_hidden = uniform({h, 4 * h}, h);
    bias = Tensor<T>({4 * h});
    for (std::size_t j = h; j < 2 * h; ++j) bias[j] = static_cast<T>(cfg.forget_bias);
    w_proj = uniform({h, cfg.output_size}, h);
    b_proj = Tensor<T>({cfg.output_size});
  }

  std::size_t input_size() const { return w_input.dim(0); }
  std::size_t hidden_size() const { return w_hidden.dim(0); }
  std::size_t output_size() const { return w_proj.dim(1); }

  std::vector<std::pair<std::string, Tensor<T>*>> trainable() {
    return {{"lstm.w_input", &w_input},
            {"lstm.w_hidden", &w_hidden},
            {"lstm.bias", &bias},
            {"lstm.w_proj", &w_proj},
            {"lstm.b_proj", &b_proj}};
  }
};

template <typename T>
struct LstmCache {
  Tensor<T> inputs;  // T x input_size
  Tensor<T> gates;   // T x 4H, post-activation
  Tensor<T> cells;   // T x H
  Tensor<T> cell_tanh;
  Tensor<T> hidden;  // T x H
  bool valid = false;
};

// Returns the T x H hidden sequence. Initial hidden and cell states are zero.
template <typename T>
Tensor<T> lstm_forward(const Tensor<T>& xs, const LstmParams<T>& params,
                       LstmCache<T>* cache = nullptr) {
  require_rank(xs, 2, "lstm_forward input");
  if (xs.dim(0) == 0) throw ArgumentError("lstm_forward: empty sequence");
  require_dim(xs, 1, params.input_size(), "lstm_forward input (feature axis)");
  const std::size_t steps = xs.dim(0), h = params.hidden_size(), in = xs.dim(1);

  Tensor<T> gates({steps, 4 * h}), cells({steps, h}), cell_tanh({steps, h}),
      hidden({steps, h});
  std::vector<T> z(4 * h);
  for (std::size_t t = 0; t < steps; ++t) {
    std::copy(params.bias.data().begin(), params.bias.data().end(), z.begin());
    for (std::size_t i = 0; i < in; ++i) {
      detail::axpy(xs.at(t, i), params.w_input.row(i).data(), z.data(), 4 * h);
    }
    if (t > 0) {
      for (std::size_t j = 0; j < h; ++j) {
        detail::axpy(hidden.at(t - 1, j), params.w_hidden.row(j).data(), z.data(), 4 * h);
      }
    }
    auto g = gates.row(t);
    for (std::size_t j = 0; j < h; ++j) {
      g[j] = sigmoid(z[j]);
      g[h + j] = sigmoid(z[h + j]);
      g[2 * h + j] = std::tanh(z[2 * h + j]);
      g[3 * h + j] = sigmoid(z[3 * h + j]);
      const T prev_c = t > 0 ? cells.at(t - 1, j) : T{0};
      const T c = g[h + j] * prev_c + g[j] * g[2 * h + j];
      cells.at(t, j) = c;
      cell_tanh.at(t, j) = std::tanh(c);
      hidden.at(t, j) = g[3 * h + j] * cell_tanh.at(t, j);
    }
  }
  if (cache) {
    cache->inputs = xs;
    cache->gates = std::move(gates);
    cache->cells = std::move(cells);
    cache->cell_tanh = std::move(cell_tanh);
    cache->hidden = hidden;
    cache->valid = true;
  }
  return hidden;
}

// Backpropagation through time. Accumulates into the grad buffers of the
// recurrent weights and returns d loss / d inputs (T x input_size).
template <typename T>
Tensor<T> lstm_backward(const Tensor<T>& grad_hidden, const LstmCache<T>& cache,
                        LstmParams<T>& params) {
  if (!cache.valid) throw StateError("lstm_backward: no cached forward pass");
  detail::require_same_shape(grad_hidden, cache.hidden, "lstm_backward grad");
  params.w_input.enable_grad();
  params.w_hidden.enable_grad();
  params.bias.enable_grad();
  const std::size_t steps = cache.hidden.dim(0), h = params.hidden_size();
  const std::size_t in = params.input_size();
  auto gw_in = params.w_input.grad();
  auto gw_h = params.w_hidden.grad();
  auto gb = params.bias.grad();

  Tensor<T> grad_x({steps, in});
  std::vector<T> dh_next(h, T{0}), dc_next(h, T{0}), dz(4 * h);
  for (std::size_t t = steps; t-- > 0;) {
    const auto g = cache.gates.row(t);
    for (std::size_t j = 0; j < h; ++j) {
      const T ig = g[j], fg = g[h + j], cg = g[2 * h + j], og = g[3 * h + j];
      const T tc = cache.cell_tanh.at(t, j);
      const T dh = grad_hidden.at(t, j) + dh_next[j];
      const T dc = dh * og * (T{1} - tc * tc) + dc_next[j];
      const T prev_c = t > 0 ? cache.cells.at(t - 1, j) : T{0};
      dz[j] = dc * cg * ig * (T{1} - ig);
      dz[h + j] = dc * prev_c * fg * (T{1} - fg);
      dz[2 * h + j] = dc * ig * (T{1} - cg * cg);
      dz[3 * h + j] = dh * tc * og * (T{1} - og);
      dc_next[j] = dc * fg;
    }
    for (std::size_t k = 0; k < 4 * h; ++k) gb[k] += dz[k];
    for (std::size_t i = 0; i < in; ++i) {
      detail::axpy(cache.inputs.at(t, i), dz.data(), &gw_in[i * 4 * h], 4 * h);
      grad_x.at(t, i) = detail::dot(dz.data(), params.w_input.row(i).data(), 4 * h);
    }
    for (std::size_t j = 0; j < h; ++j) {
      if (t > 0) {
        detail::axpy(cache.hidden.at(t - 1, j), dz.data(), &gw_h[j * 4 * h], 4 * h);
      }
      dh_next[j] = detail::dot(dz.data(), params.w_hidden.row(j).data(), 4 * h);
    }
  }
  return grad_x;
}

// Per-frame affine map to logits: T x H -> T x n.
template <typename T>
Tensor<T> project_logits(const Tensor<T>& hidden, const LstmParams<T>& params) {
  require_dim(hidden, 1, params.hidden_size(), "project_logits hidden (feature axis)");
  auto logits = matmul(hidden, params.w_proj);
  for (std::size_t t = 0; t < logits.dim(0); ++t)
    for (std::size_t k = 0; k < logits.dim(1); ++k) logits.at(t, k) += params.b_proj[k];
  return logits;
}

// Per-frame label posteriors: softmax of the projected logits.
template <typename T>
Tensor<T> project_posteriors(const Tensor<T>& hidden, const LstmParams<T>& params) {
  return softmax_rows(project_logits(hidden, params));
}

// Accumulates projection grads; returns d loss / d hidden.
template <typename T>
Tensor<T> project_backward(const Tensor<T>& hidden, const Tensor<T>& grad_logits,
                           LstmParams<T>& params) {
  params.w_proj.enable_grad();
  params.b_proj.enable_grad();
  Tensor<T> grad_w(params.w_proj.shape());
  Tensor<T> grad_hidden(hidden.shape());
  matmul_backward(hidden, params.w_proj, grad_logits, &grad_hidden, &grad_w);
  auto gw = params.w_proj.grad();
  for (std::size_t i = 0; i < gw.size(); ++i) gw[i] += grad_w[i];
  auto gb = params.b_proj.grad();
  for (std::size_t t = 0; t < grad_logits.dim(0); ++t)
    for (std::size_t k = 0; k < grad_logits.dim(1); ++k) gb[k] += grad_logits.at(t, k);
  return grad_hidden;
}

}  // namespace eegctc

#endif  // EEGCTC_LSTM_HPP_

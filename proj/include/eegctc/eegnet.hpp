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
// Per-segment convolutional feature extractor.
//
//   C x S  --channel mix (20 filters)--> 20 x S  -> BN -> dropout
//          --reshape--> 20 x S x 1 --conv 5 x (3 x 33)--> 20 x S x 5
//          -> BN -> maxpool(2,5) -> dropout                 10 x S/5 x 5
//          --conv 5 x (11 x 3)--> BN -> maxpool(2,5) -> dropout  5 x S/25 x 5
//          --flatten--> feature vector (50 values for S = 50)
//
// There is no pointwise activation between layers; batch norm and max
// pooling are the only non-linear stages.
#ifndef EEGCTC_EEGNET_HPP_
#define EEGCTC_EEGNET_HPP_

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "eegctc/errors.hpp"
#include "eegctc/ops.hpp"
#include "eegctc/prng.hpp"
#include "eegctc/tensor.hpp"

namespace eegctc {

struct EegnetConfig {
  std::size_t channels = 8;
  std::size_t segment_length = 50;
  std::size_t mix_filters = 20;
  std::size_t conv2_filters = 5;
  std::size_t conv2_kernel_h = 3;
  std::size_t conv2_kernel_w = 33;
  std::size_t conv3_filters = 5;
  std::size_t conv3_kernel_h = 11;
  std::size_t conv3_kernel_w = 3;
  std::size_t pool_h = 2;
  std::size_t pool_w = 5;
  double dropout = 0.5;
  double bn_momentum = 0.9;
  double bn_eps = 1e-5;

  std::size_t pooled_h() const { return mix_filters / pool_h / pool_h; }
  std::size_t pooled_w() const { return segment_length / pool_w / pool_w; }
  std::size_t feature_size() const { return pooled_h() * pooled_w() * conv3_filters; }

  void validate() const {
    if (channels == 0) throw ConfigError("eegnet: channel count must be positive");
    if (segment_length == 0) throw ConfigError("eegnet: segment length must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) {
      throw ConfigError("eegnet: dropout rate must lie in [0, 1)");
    }
    if (!(bn_momentum >= 0.0 && bn_momentum <= 1.0) || !(bn_eps > 0.0)) {
      throw ConfigError("eegnet: batchnorm momentum must be in [0,1] and eps > 0");
    }
    for (std::size_t k : {conv2_kernel_h, conv2_kernel_w, conv3_kernel_h, conv3_kernel_w}) {
      if (k % 2 == 0) throw ConfigError("eegnet: convolution kernel extents must be odd");
    }
    if (pool_h == 0 || pool_w == 0 || mix_filters % (pool_h * pool_h) != 0 ||
        segment_length % (pool_w * pool_w) != 0) {
      throw ConfigError("eegnet: pooling (" + std::to_string(pool_h) + "," +
                        std::to_string(pool_w) + ") does not tile " +
                        std::to_string(mix_filters) + "x" +
                        std::to_string(segment_length) + " twice");
    }
  }
};

template <typename T>
struct EegnetParams {
  Tensor<T> mix_kernels;  // mix_filters x C
  Tensor<T> mix_bias;
  Tensor<T> bn1_gamma, bn1_beta;
  Tensor<T> conv2_kernels;  // F x kh x kw x 1
  Tensor<T> conv2_bias;
  Tensor<T> bn2_gamma, bn2_beta;
  Tensor<T> conv3_kernels;  // F x kh x kw x conv2_filters
  Tensor<T> conv3_bias;
  Tensor<T> bn3_gamma, bn3_beta;
  BatchNormState<T> bn1, bn2, bn3;
  double dropout = 0.5;
  std::size_t pool_h = 2;
  std::size_t pool_w = 5;

  EegnetParams() = default;

  // Weights centered-uniform with half-width 1/sqrt(fan_in); biases and
  // batchnorm shifts zero, batchnorm scales one.
  EegnetParams(const EegnetConfig& cfg, Prng& rng) {
    cfg.validate();
    auto uniform = [&rng](Shape shape, std::size_t fan_in) {
      Tensor<T> t(std::move(shape));
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (auto& v : t.data()) v = static_cast<T>(rng.uniform(-bound, bound));
      return t;
    };
    const T mom = static_cast<T>(cfg.bn_momentum), eps = static_cast<T>(cfg.bn_eps);
    mix_kernels = uniform({cfg.mix_filters, cfg.channels}, cfg.channels);
    mix_bias = Tensor<T>({cfg.mix_filters});
    bn1_gamma = Tensor<T>({cfg.mix_filters}, T{1});
    bn1_beta = Tensor<T>({cfg.mix_filters});
    bn1 = BatchNormState<T>(cfg.mix_filters, mom, eps);

    conv2_kernels = uniform({cfg.conv2_filters, cfg.conv2_kernel_h, cfg.conv2_kernel_w, 1},
                            cfg.conv2_kernel_h * cfg.conv2_kernel_w);
    conv2_bias = Tensor<T>({cfg.conv2_filters});
    bn2_gamma = Tensor<T>({cfg.conv2_filters}, T{1});
    bn2_beta = Tensor<T>({cfg.conv2_filters});
    bn2 = BatchNormState<T>(cfg.conv2_filters, mom, eps);

    conv3_kernels = uniform(
        {cfg.conv3_filters, cfg.conv3_kernel_h, cfg.conv3_kernel_w, cfg.conv2_filters},
        cfg.conv3_kernel_h * cfg.conv3_kernel_w * cfg.conv2_filters);
    conv3_bias = Tensor<T>({cfg.conv3_filters});
    bn3_gamma = Tensor<T>({cfg.conv3_filters}, T{1});
    bn3_beta = Tensor<T>({cfg.conv3_filters});
    bn3 = BatchNormState<T>(cfg.conv3_filters, mom, eps);

    dropout = cfg.dropout;
    pool_h = cfg.pool_h;
    pool_w = cfg.pool_w;
  }

  std::vector<std::pair<std::string, Tensor<T>*>> trainable() {
    return {{"eegnet.mix_kernels", &mix_kernels},   {"eegnet.mix_bias", &mix_bias},
            {"eegnet.bn1_gamma", &bn1_gamma},       {"eegnet.bn1_beta", &bn1_beta},
            {"eegnet.conv2_kernels", &conv2_kernels}, {"eegnet.conv2_bias", &conv2_bias},
            {"eegnet.bn2_gamma", &bn2_gamma},       {"eegnet.bn2_beta", &bn2_beta},
            {"eegnet.conv3_kernels", &conv3_kernels}, {"eegnet.conv3_bias", &conv3_bias},
            {"eegnet.bn3_gamma", &bn3_gamma},       {"eegnet.bn3_beta", &bn3_beta}};
  }

  std::vector<std::pair<std::string, Tensor<T>*>> running_stats() {
    return {{"eegnet.bn1_running_mean", &bn1.running_mean},
            {"eegnet.bn1_running_var", &bn1.running_var},
            {"eegnet.bn2_running_mean", &bn2.running_mean},
            {"eegnet.bn2_running_var", &bn2.running_var},
            {"eegnet.bn3_running_mean", &bn3.running_mean},
            {"eegnet.bn3_running_var", &bn3.running_var}};
  }
};

// Everything the backward pass needs from one batched forward pass.
template <typename T>
struct EegnetCache {
  std::vector<Tensor<T>> inputs;
  BatchNormCache<T> bn1, bn2, bn3;
  std::vector<Tensor<T>> drop1_mask, drop2_mask, drop3_mask;
  std::vector<Tensor<T>> conv2_in, conv3_in;
  std::vector<std::vector<std::uint32_t>> pool2_argmax, pool3_argmax;
  Shape conv2_out_shape, conv3_out_shape, pool3_out_shape;
  bool valid = false;
};

// Output shapes of the first batch member at every stage.
struct EegnetTrace {
  Shape mix, conv2, pool2, conv3, pool3, features;
};

// Runs a batch of C x S segments jointly (batch statistics are pooled over
// all of them in train mode). Returns one feature vector per segment.
template <typename T>
std::vector<Tensor<T>> eegnet_forward(std::span<const Tensor<T>> segments,
                                      EegnetParams<T>& params, Mode mode, Prng& rng,
                                      EegnetCache<T>* cache = nullptr,
                                      EegnetTrace* trace = nullptr) {
  if (segments.empty()) throw ArgumentError("eegnet_forward: empty batch");
  const std::size_t channels = params.mix_kernels.dim(1);
  for (const auto& seg : segments) {
    require_rank(seg, 2, "eegnet segment");
    if (seg.dim(0) != channels) {
      throw ConfigError("eegnet_forward: segment has " + std::to_string(seg.dim(0)) +
                        " channels, model expects " + std::to_string(channels));
    }
    require_dim(seg, 1, segments.front().dim(1), "eegnet segment (time axis)");
  }
  const std::size_t n = segments.size();
  const std::size_t pool_h = params.pool_h, pool_w = params.pool_w;

  std::vector<Tensor<T>> stage(n);
  for (std::size_t b = 0; b < n; ++b) {
    stage[b] = channel_mix_conv(segments[b], params.mix_kernels, params.mix_bias);
  }
  if (trace) trace->mix = stage.front().shape();
  stage = batchnorm<T>(stage, 0, params.bn1_gamma, params.bn1_beta, params.bn1, mode,
                       cache ? &cache->bn1 : nullptr);

  std::vector<Tensor<T>> masks1(n), masks2(n), masks3(n), conv2_in(n), conv3_in(n);
  std::vector<std::vector<std::uint32_t>> argmax2(n), argmax3(n);
  for (std::size_t b = 0; b < n; ++b) {
    auto dropped = dropout(stage[b], params.dropout, rng, mode);
    masks1[b] = std::move(dropped.mask);
    const std::size_t h = dropped.output.dim(0), w = dropped.output.dim(1);
    conv2_in[b] = dropped.output.reshaped({h, w, 1});
    stage[b] = conv2d_same(conv2_in[b], params.conv2_kernels, params.conv2_bias);
  }
  if (trace) trace->conv2 = stage.front().shape();
  const Shape conv2_out_shape = stage.front().shape();
  stage = batchnorm<T>(stage, 2, params.bn2_gamma, params.bn2_beta, params.bn2, mode,
                       cache ? &cache->bn2 : nullptr);

  for (std::size_t b = 0; b < n; ++b) {
    auto pooled = maxpool2d(stage[b], pool_h, pool_w);
    argmax2[b] = std::move(pooled.argmax);
    auto dropped = dropout(pooled.output, params.dropout, rng, mode);
    masks2[b] = std::move(dropped.mask);
    conv3_in[b] = std::move(dropped.output);
    stage[b] = conv2d_same(conv3_in[b], params.conv3_kernels, params.conv3_bias);
  }
  if (trace) {
    trace->pool2 = conv3_in.front().shape();
    trace->conv3 = stage.front().shape();
  }
  const Shape conv3_out_shape = stage.front().shape();
  stage = batchnorm<T>(stage, 2, params.bn3_gamma, params.bn3_beta, params.bn3, mode,
                       cache ? &cache->bn3 : nullptr);

  Shape pool3_out_shape;
  for (std::size_t b = 0; b < n; ++b) {
    auto pooled = maxpool2d(stage[b], pool_h, pool_w);
    argmax3[b] = std::move(pooled.argmax);
    pool3_out_shape = pooled.output.shape();
    auto dropped = dropout(pooled.output, params.dropout, rng, mode);
    masks3[b] = std::move(dropped.mask);
    stage[b] = dropped.output.flattened();
  }
  if (trace) {
    trace->pool3 = pool3_out_shape;
    trace->features = stage.front().shape();
  }

  if (cache) {
    cache->inputs.assign(segments.begin(), segments.end());
    cache->drop1_mask = std::move(masks1);
    cache->drop2_mask = std::move(masks2);
    cache->drop3_mask = std::move(masks3);
    cache->conv2_in = std::move(conv2_in);
    cache->conv3_in = std::move(conv3_in);
    cache->pool2_argmax = std::move(argmax2);
    cache->pool3_argmax = std::move(argmax3);
    cache->conv2_out_shape = conv2_out_shape;
    cache->conv3_out_shape = conv3_out_shape;
    cache->pool3_out_shape = pool3_out_shape;
    cache->valid = true;
  }
  return stage;
}

// Accumulates parameter gradients into the grad buffers of `params`
// (enabled on demand). Returns input gradients when `want_input_grad`.
template <typename T>
std::vector<Tensor<T>> eegnet_backward(std::span<const Tensor<T>> grad_features,
                                       const EegnetCache<T>& cache,
                                       EegnetParams<T>& params,
                                       bool want_input_grad = false) {
  if (!cache.valid) throw StateError("eegnet_backward: no cached forward pass");
  const std::size_t n = cache.inputs.size();
  if (grad_features.size() != n) {
    throw DimensionError("eegnet_backward: " + std::to_string(grad_features.size()) +
                         " feature gradients for a batch of " + std::to_string(n));
  }
  for (auto& [name, t] : params.trainable()) t->enable_grad();

  std::vector<Tensor<T>> g(n);
  for (std::size_t b = 0; b < n; ++b) {
    const auto unflat = grad_features[b].reshaped(cache.pool3_out_shape);
    const auto undropped = dropout_backward(unflat, cache.drop3_mask[b]);
    g[b] = maxpool2d_backward(undropped, std::span<const std::uint32_t>(cache.pool3_argmax[b]),
                              cache.conv3_out_shape);
  }
  g = batchnorm_backward<T>(g, cache.bn3, params.bn3_gamma, params.bn3_gamma.grad(),
                            params.bn3_beta.grad());

  for (std::size_t b = 0; b < n; ++b) {
    Tensor<T> grad_in(cache.conv3_in[b].shape());
    conv2d_same_backward(cache.conv3_in[b], params.conv3_kernels, g[b], &grad_in,
                        params.conv3_kernels.grad(), params.conv3_bias.grad());
    const auto undropped = dropout_backward(grad_in, cache.drop2_mask[b]);
    g[b] = maxpool2d_backward(undropped, std::span<const std::uint32_t>(cache.pool2_argmax[b]),
                              cache.conv2_out_shape);
  }
  g = batchnorm_backward<T>(g, cache.bn2, params.bn2_gamma, params.bn2_gamma.grad(),
                            params.bn2_beta.grad());

  for (std::size_t b = 0; b < n; ++b) {
    Tensor<T> grad_in(cache.conv2_in[b].shape());
    conv2d_same_backward(cache.conv2_in[b], params.conv2_kernels, g[b], &grad_in,
                        params.conv2_kernels.grad(), params.conv2_bias.grad());
    const std::size_t h = grad_in.dim(0), w = grad_in.dim(1);
    g[b] = dropout_backward(grad_in.reshaped({h, w}), cache.drop1_mask[b]);
  }
  g = batchnorm_backward<T>(g, cache.bn1, params.bn1_gamma, params.bn1_gamma.grad(),
                            params.bn1_beta.grad());

  std::vector<Tensor<T>> grad_inputs;
  if (want_input_grad) grad_inputs.reserve(n);
  for (std::size_t b = 0; b < n; ++b) {
    Tensor<T> grad_in;
    if (want_input_grad) grad_in = Tensor<T>(cache.inputs[b].shape());
    channel_mix_conv_backward(cache.inputs[b], params.mix_kernels, g[b],
                              want_input_grad ? &grad_in : nullptr,
                              params.mix_kernels.grad(), params.mix_bias.grad());
    if (want_input_grad) grad_inputs.push_back(std::move(grad_in));
  }
  return grad_inputs;
}

}  // namespace eegctc

#endif  // EEGCTC_EEGNET_HPP_

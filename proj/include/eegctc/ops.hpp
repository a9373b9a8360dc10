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
// Forward operations and their analytic gradients. Every *_backward
// function accumulates (+=) into the gradient buffers it is handed, so a
// parameter shared by several calls collects the sum of its contributions.
#ifndef EEGCTC_OPS_HPP_
#define EEGCTC_OPS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "eegctc/errors.hpp"
#include "eegctc/prng.hpp"
#include "eegctc/tensor.hpp"

namespace eegctc {

enum class Mode { train, eval };

namespace detail {

template <typename T>
inline void axpy(T a, const T* __restrict x, T* __restrict y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

template <typename T>
inline T dot(const T* x, const T* y, std::size_t n) {
  T s{0};
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b,
                        const char* what) {
  if (a.shape() != b.shape()) {
    for (std::size_t ax = 0; ax < std::min(a.rank(), b.rank()); ++ax) {
      if (a.dim(ax) != b.dim(ax)) {
        throw DimensionError(std::string(what) + ": axis " +
                             std::to_string(ax) + " differs (" +
                             to_string(a.shape()) + " vs " +
                             to_string(b.shape()) + ")");
      }
    }
    throw DimensionError(std::string(what) + ": rank differs (" +
                         to_string(a.shape()) + " vs " + to_string(b.shape()) +
                         ")");
  }
}

template <typename T>
void require_span(std::span<const T> s, std::size_t n, const char* what) {
  if (s.size() != n) {
    throw DimensionError(std::string(what) + ": gradient buffer holds " +
                         std::to_string(s.size()) + " values, expected " +
                         std::to_string(n));
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Pointwise channel mixing: out[k][t] = bias[k] + sum_c kernels[k][c] * in[c][t]

template <typename T>
Tensor<T> channel_mix_conv(const Tensor<T>& input, const Tensor<T>& kernels,
                           const Tensor<T>& bias) {
  require_rank(input, 2, "channel_mix_conv input");
  require_rank(kernels, 2, "channel_mix_conv kernels");
  const std::size_t channels = input.dim(0), steps = input.dim(1);
  const std::size_t filters = kernels.dim(0);
  require_dim(kernels, 1, channels, "channel_mix_conv kernels (channel axis)");
  require_rank(bias, 1, "channel_mix_conv bias");
  require_dim(bias, 0, filters, "channel_mix_conv bias (filter axis)");

  Tensor<T> out({filters, steps});
  for (std::size_t k = 0; k < filters; ++k) {
    T* o = out.row(k).data();
    std::fill(o, o + steps, bias[k]);
    for (std::size_t c = 0; c < channels; ++c) {
      detail::axpy(kernels.at(k, c), input.row(c).data(), o, steps);
    }
  }
  return out;
}

// `grad_input` may be null when the input gradient is not needed.
template <typename T>
void channel_mix_conv_backward(const Tensor<T>& input, const Tensor<T>& kernels,
                               const Tensor<T>& grad_out, Tensor<T>* grad_input,
                               std::span<T> grad_kernels,
                               std::span<T> grad_bias) {
  const std::size_t channels = input.dim(0), steps = input.dim(1);
  const std::size_t filters = kernels.dim(0);
  detail::require_span<T>(grad_kernels, kernels.size(), "channel_mix_conv");
  detail::require_span<T>(grad_bias, filters, "channel_mix_conv");
  require_dim(grad_out, 0, filters, "channel_mix_conv grad_out");
  require_dim(grad_out, 1, steps, "channel_mix_conv grad_out");
  for (std::size_t k = 0; k < filters; ++k) {
    const T* g = grad_out.row(k).data();
    T gb{0};
    for (std::size_t t = 0; t < steps; ++t) gb += g[t];
    grad_bias[k] += gb;
    for (std::size_t c = 0; c < channels; ++c) {
      grad_kernels[k * channels + c] += detail::dot(g, input.row(c).data(), steps);
    }
  }
  if (grad_input) {
    detail::require_same_shape(*grad_input, input, "channel_mix_conv grad_input");
    for (std::size_t k = 0; k < filters; ++k) {
      for (std::size_t c = 0; c < channels; ++c) {
        detail::axpy(kernels.at(k, c), grad_out.row(k).data(),
                     grad_input->row(c).data(), steps);
      }
    }
  }
}

// ---------------------------------------------------------------------------
// 2-d cross-correlation with zero "same" padding.
// input H x W x D, kernels F x kh x kw x D, bias F -> output H x W x F.

namespace detail {

struct Conv2dGeometry {
  std::size_t height, width, depth, filters, kh, kw, pad_h, pad_w;
  std::size_t padded_h() const { return height + 2 * pad_h; }
  std::size_t padded_w() const { return width + 2 * pad_w; }
};

template <typename T>
Conv2dGeometry conv2d_geometry(const Tensor<T>& input, const Tensor<T>& kernels) {
  require_rank(input, 3, "conv2d_same input");
  require_rank(kernels, 4, "conv2d_same kernels");
  require_dim(kernels, 3, input.dim(2), "conv2d_same kernels (depth axis)");
  const std::size_t kh = kernels.dim(1), kw = kernels.dim(2);
  if (kh % 2 == 0 || kw % 2 == 0) {
    throw ConfigError("conv2d_same: kernel extents must be odd, got " +
                      std::to_string(kh) + "x" + std::to_string(kw));
  }
  return {input.dim(0), input.dim(1), input.dim(2), kernels.dim(0),
          kh,           kw,           (kh - 1) / 2,  (kw - 1) / 2};
}

// H x W x D (channel-last)  ->  D planes of (H + 2ph) x (W + 2pw), zero border.
template <typename T>
std::vector<T> to_padded_planes(std::span<const T> hwd, std::size_t height,
                                std::size_t width, std::size_t depth, std::size_t pad_h,
                                std::size_t pad_w) {
  const std::size_t ph = height + 2 * pad_h, pw = width + 2 * pad_w;
  std::vector<T> planes(depth * ph * pw, T{0});
  for (std::size_t h = 0; h < height; ++h)
    for (std::size_t w = 0; w < width; ++w)
      for (std::size_t d = 0; d < depth; ++d)
        planes[(d * ph + h + pad_h) * pw + w + pad_w] = hwd[(h * width + w) * depth + d];
  return planes;
}

// Valid correlation of plane stacks, accumulated into dst:
//   dst[o][y][x] += sum_{c,i,j} weights[o][c][i][j] * src[c][y+i][x+j]
// src is C x src_h x src_w, weights O x C x kh x kw, dst O x dst_h x dst_w
// with src_h = dst_h + kh - 1 and src_w = dst_w + kw - 1. Output columns are
// processed in register tiles; the summation order is fixed (c, i, j).
template <typename T>
void correlate_planes(const T* src, std::size_t channels, std::size_t src_h,
                      std::size_t src_w, const T* weights, std::size_t outs,
                      std::size_t kh, std::size_t kw, T* dst, std::size_t dst_h,
                      std::size_t dst_w) {
  constexpr std::size_t kTile = 64 / sizeof(T);
  for (std::size_t o = 0; o < outs; ++o) {
    const T* w_o = weights + o * channels * kh * kw;
    for (std::size_t y = 0; y < dst_h; ++y) {
      T* drow = dst + (o * dst_h + y) * dst_w;
      std::size_t x0 = 0;
      for (; x0 + kTile <= dst_w; x0 += kTile) {
        T acc[kTile];
        for (std::size_t v = 0; v < kTile; ++v) acc[v] = drow[x0 + v];
        for (std::size_t c = 0; c < channels; ++c) {
          for (std::size_t i = 0; i < kh; ++i) {
            const T* srow = src + (c * src_h + y + i) * src_w + x0;
            const T* wrow = w_o + (c * kh + i) * kw;
            for (std::size_t j = 0; j < kw; ++j) {
              const T k = wrow[j];
              for (std::size_t v = 0; v < kTile; ++v) acc[v] += k * srow[j + v];
            }
          }
        }
        for (std::size_t v = 0; v < kTile; ++v) drow[x0 + v] = acc[v];
      }
      for (std::size_t x = x0; x < dst_w; ++x) {
        T acc = drow[x];
        for (std::size_t c = 0; c < channels; ++c)
          for (std::size_t i = 0; i < kh; ++i) {
            const T* srow = src + (c * src_h + y + i) * src_w + x;
            const T* wrow = w_o + (c * kh + i) * kw;
            for (std::size_t j = 0; j < kw; ++j) acc += wrow[j] * srow[j];
          }
        drow[x] = acc;
      }
    }
  }
}

}  // namespace detail

template <typename T>
Tensor<T> conv2d_same(const Tensor<T>& input, const Tensor<T>& kernels,
                      const Tensor<T>& bias) {
  const auto g = detail::conv2d_geometry(input, kernels);
  require_rank(bias, 1, "conv2d_same bias");
  require_dim(bias, 0, g.filters, "conv2d_same bias (filter axis)");
  const auto padded = detail::to_padded_planes(input.data(), g.height, g.width, g.depth,
                                               g.pad_h, g.pad_w);
  // F x kh x kw x D  ->  F x D x kh x kw
  std::vector<T> w(kernels.size());
  for (std::size_t f = 0; f < g.filters; ++f)
    for (std::size_t i = 0; i < g.kh; ++i)
      for (std::size_t j = 0; j < g.kw; ++j)
        for (std::size_t d = 0; d < g.depth; ++d)
          w[((f * g.depth + d) * g.kh + i) * g.kw + j] =
              kernels[((f * g.kh + i) * g.kw + j) * g.depth + d];

  const std::size_t hw_size = g.height * g.width;
  std::vector<T> planes(g.filters * hw_size);
  for (std::size_t f = 0; f < g.filters; ++f)
    std::fill_n(planes.begin() + f * hw_size, hw_size, bias[f]);
  detail::correlate_planes(padded.data(), g.depth, g.padded_h(), g.padded_w(), w.data(),
                           g.filters, g.kh, g.kw, planes.data(), g.height, g.width);

  Tensor<T> out({g.height, g.width, g.filters});
  for (std::size_t f = 0; f < g.filters; ++f)
    for (std::size_t hw = 0; hw < hw_size; ++hw) out[hw * g.filters + f] = planes[f * hw_size + hw];
  return out;
}

template <typename T>
void conv2d_same_backward(const Tensor<T>& input, const Tensor<T>& kernels,
                          const Tensor<T>& grad_out, Tensor<T>* grad_input,
                          std::span<T> grad_kernels, std::span<T> grad_bias) {
  const auto g = detail::conv2d_geometry(input, kernels);
  detail::require_span<T>(grad_kernels, kernels.size(), "conv2d_same");
  detail::require_span<T>(grad_bias, g.filters, "conv2d_same");
  require_dim(grad_out, 0, g.height, "conv2d_same grad_out");
  require_dim(grad_out, 1, g.width, "conv2d_same grad_out");
  require_dim(grad_out, 2, g.filters, "conv2d_same grad_out");
  const std::size_t hw_size = g.height * g.width;

  // Unpadded F x H x W copy of the output gradient.
  std::vector<T> go(g.filters * hw_size);
  for (std::size_t hw = 0; hw < hw_size; ++hw)
    for (std::size_t f = 0; f < g.filters; ++f) go[f * hw_size + hw] = grad_out[hw * g.filters + f];
  for (std::size_t f = 0; f < g.filters; ++f) {
    T gb{0};
    for (std::size_t hw = 0; hw < hw_size; ++hw) gb += go[f * hw_size + hw];
    grad_bias[f] += gb;
  }

  // d kernel[f][i][j][d] = sum_{y,x} go[f][y][x] * padded_in[d][y+i][x+j]:
  // a valid correlation of each input plane with each gradient plane.
  const auto padded = detail::to_padded_planes(input.data(), g.height, g.width, g.depth,
                                               g.pad_h, g.pad_w);
  const std::size_t plane = g.padded_h() * g.padded_w();
  std::vector<T> gk(g.kh * g.kw);
  for (std::size_t f = 0; f < g.filters; ++f) {
    for (std::size_t d = 0; d < g.depth; ++d) {
      std::fill(gk.begin(), gk.end(), T{0});
      detail::correlate_planes(padded.data() + d * plane, 1, g.padded_h(), g.padded_w(),
                               go.data() + f * hw_size, 1, g.height, g.width, gk.data(),
                               g.kh, g.kw);
      for (std::size_t i = 0; i < g.kh; ++i)
        for (std::size_t j = 0; j < g.kw; ++j)
          grad_kernels[((f * g.kh + i) * g.kw + j) * g.depth + d] += gk[i * g.kw + j];
    }
  }

  if (grad_input) {
    detail::require_same_shape(*grad_input, input, "conv2d_same grad_input");
    // Full correlation with the flipped kernel: D x F x kh x kw weights over
    // the zero-padded gradient planes.
    std::vector<T> go_hwf(grad_out.data().begin(), grad_out.data().end());
    const auto go_pad = detail::to_padded_planes(std::span<const T>(go_hwf), g.height,
                                                 g.width, g.filters, g.pad_h, g.pad_w);
    std::vector<T> w(kernels.size());
    for (std::size_t f = 0; f < g.filters; ++f)
      for (std::size_t i = 0; i < g.kh; ++i)
        for (std::size_t j = 0; j < g.kw; ++j)
          for (std::size_t d = 0; d < g.depth; ++d)
            w[((d * g.filters + f) * g.kh + (g.kh - 1 - i)) * g.kw + (g.kw - 1 - j)] =
                kernels[((f * g.kh + i) * g.kw + j) * g.depth + d];
    std::vector<T> gin(g.depth * hw_size, T{0});
    detail::correlate_planes(go_pad.data(), g.filters, g.padded_h(), g.padded_w(), w.data(),
                             g.depth, g.kh, g.kw, gin.data(), g.height, g.width);
    for (std::size_t hw = 0; hw < hw_size; ++hw)
      for (std::size_t d = 0; d < g.depth; ++d)
        (*grad_input)[hw * g.depth + d] += gin[d * hw_size + hw];
  }
}

// ---------------------------------------------------------------------------
// Batch normalization over a batch of equally shaped tensors. One feature
// axis is kept; statistics pool every other axis and every batch member.

template <typename T>
struct BatchNormState {
  Tensor<T> running_mean;
  Tensor<T> running_var;
  T momentum = T(0.9);
  T eps = T(1e-5);

  BatchNormState() = default;
  explicit BatchNormState(std::size_t features, T momentum_ = T(0.9),
                          T eps_ = T(1e-5))
      : running_mean({features}, T{0}),
        running_var({features}, T{1}),
        momentum(momentum_),
        eps(eps_) {}
};

template <typename T>
struct BatchNormCache {
  std::vector<Tensor<T>> normalized;  // x-hat per batch member
  std::vector<T> inv_std;             // per feature
  std::size_t feature_axis = 0;
  Mode mode = Mode::train;
  bool valid = false;
};

namespace detail {

struct FeatureLayout {
  std::size_t outer, features, inner;
};

template <typename T>
FeatureLayout feature_layout(const Tensor<T>& t, std::size_t axis) {
  if (axis >= t.rank()) {
    throw DimensionError("batchnorm: feature axis " + std::to_string(axis) +
                         " out of range for shape " + to_string(t.shape()));
  }
  FeatureLayout l{1, t.dim(axis), 1};
  for (std::size_t a = 0; a < axis; ++a) l.outer *= t.dim(a);
  for (std::size_t a = axis + 1; a < t.rank(); ++a) l.inner *= t.dim(a);
  return l;
}

}  // namespace detail

template <typename T>
std::vector<Tensor<T>> batchnorm(std::span<const Tensor<T>> inputs,
                                 std::size_t feature_axis,
                                 const Tensor<T>& gamma, const Tensor<T>& beta,
                                 BatchNormState<T>& state, Mode mode,
                                 BatchNormCache<T>* cache = nullptr) {
  if (inputs.empty()) throw ArgumentError("batchnorm: empty batch");
  const auto layout = detail::feature_layout(inputs.front(), feature_axis);
  const std::size_t nf = layout.features;
  require_dim(gamma, 0, nf, "batchnorm gamma");
  require_dim(beta, 0, nf, "batchnorm beta");
  require_dim(state.running_mean, 0, nf, "batchnorm running mean");
  require_dim(state.running_var, 0, nf, "batchnorm running var");
  for (const auto& x : inputs) {
    detail::require_same_shape(x, inputs.front(), "batchnorm batch member");
  }

  std::vector<T> mean(nf, T{0}), var(nf, T{0});
  auto for_each_feature = [&](const Tensor<T>& x, auto&& fn) {
    for (std::size_t o = 0; o < layout.outer; ++o)
      for (std::size_t f = 0; f < nf; ++f)
        for (std::size_t i = 0; i < layout.inner; ++i) {
          const std::size_t idx = (o * nf + f) * layout.inner + i;
          fn(f, idx, x[idx]);
        }
  };

  if (mode == Mode::train) {
    const T count = static_cast<T>(inputs.size() * layout.outer * layout.inner);
    for (const auto& x : inputs)
      for_each_feature(x, [&](std::size_t f, std::size_t, T v) { mean[f] += v; });
    for (auto& m : mean) m /= count;
    for (const auto& x : inputs)
      for_each_feature(x, [&](std::size_t f, std::size_t, T v) {
        const T d = v - mean[f];
        var[f] += d * d;
      });
    for (auto& v : var) v /= count;
    for (std::size_t f = 0; f < nf; ++f) {
      state.running_mean[f] =
          state.momentum * state.running_mean[f] + (T{1} - state.momentum) * mean[f];
      state.running_var[f] =
          state.momentum * state.running_var[f] + (T{1} - state.momentum) * var[f];
    }
  } else {
    for (std::size_t f = 0; f < nf; ++f) {
      mean[f] = state.running_mean[f];
      var[f] = state.running_var[f];
    }
  }

  std::vector<T> inv_std(nf);
  for (std::size_t f = 0; f < nf; ++f) inv_std[f] = T{1} / std::sqrt(var[f] + state.eps);

  std::vector<Tensor<T>> outputs;
  outputs.reserve(inputs.size());
  if (cache) {
    cache->normalized.clear();
    cache->normalized.reserve(inputs.size());
  }
  for (const auto& x : inputs) {
    Tensor<T> xhat(x.shape());
    Tensor<T> y(x.shape());
    for_each_feature(x, [&](std::size_t f, std::size_t idx, T v) {
      xhat[idx] = (v - mean[f]) * inv_std[f];
      y[idx] = gamma[f] * xhat[idx] + beta[f];
    });
    outputs.push_back(std::move(y));
    if (cache) cache->normalized.push_back(std::move(xhat));
  }
  if (cache) {
    cache->inv_std = std::move(inv_std);
    cache->feature_axis = feature_axis;
    cache->mode = mode;
    cache->valid = true;
  }
  return outputs;
}

template <typename T>
Tensor<T> batchnorm(const Tensor<T>& input, std::size_t feature_axis,
                    const Tensor<T>& gamma, const Tensor<T>& beta,
                    BatchNormState<T>& state, Mode mode,
                    BatchNormCache<T>* cache = nullptr) {
  return std::move(batchnorm(std::span<const Tensor<T>>(&input, 1), feature_axis,
                             gamma, beta, state, mode, cache)
                       .front());
}

template <typename T>
std::vector<Tensor<T>> batchnorm_backward(std::span<const Tensor<T>> grad_out,
                                          const BatchNormCache<T>& cache,
                                          const Tensor<T>& gamma,
                                          std::span<T> grad_gamma,
                                          std::span<T> grad_beta) {
  if (!cache.valid) throw StateError("batchnorm_backward: no cached forward pass");
  if (grad_out.size() != cache.normalized.size()) {
    throw DimensionError("batchnorm_backward: batch size " +
                         std::to_string(grad_out.size()) + " != cached " +
                         std::to_string(cache.normalized.size()));
  }
  const auto layout =
      detail::feature_layout(cache.normalized.front(), cache.feature_axis);
  const std::size_t nf = layout.features;
  detail::require_span<T>(grad_gamma, nf, "batchnorm");
  detail::require_span<T>(grad_beta, nf, "batchnorm");

  std::vector<T> sum_dy(nf, T{0}), sum_dy_xhat(nf, T{0});
  for (std::size_t b = 0; b < grad_out.size(); ++b) {
    const auto& dy = grad_out[b];
    const auto& xhat = cache.normalized[b];
    detail::require_same_shape(dy, xhat, "batchnorm_backward grad_out");
    for (std::size_t o = 0; o < layout.outer; ++o)
      for (std::size_t f = 0; f < nf; ++f)
        for (std::size_t i = 0; i < layout.inner; ++i) {
          const std::size_t idx = (o * nf + f) * layout.inner + i;
          sum_dy[f] += dy[idx];
          sum_dy_xhat[f] += dy[idx] * xhat[idx];
        }
  }
  for (std::size_t f = 0; f < nf; ++f) {
    grad_gamma[f] += sum_dy_xhat[f];
    grad_beta[f] += sum_dy[f];
  }

  const T count =
      static_cast<T>(grad_out.size() * layout.outer * layout.inner);
  std::vector<Tensor<T>> grad_in;
  grad_in.reserve(grad_out.size());
  for (std::size_t b = 0; b < grad_out.size(); ++b) {
    const auto& dy = grad_out[b];
    const auto& xhat = cache.normalized[b];
    Tensor<T> dx(dy.shape());
    for (std::size_t o = 0; o < layout.outer; ++o)
      for (std::size_t f = 0; f < nf; ++f)
        for (std::size_t i = 0; i < layout.inner; ++i) {
          const std::size_t idx = (o * nf + f) * layout.inner + i;
          const T scale = gamma[f] * cache.inv_std[f];
          if (cache.mode == Mode::train) {
            dx[idx] = scale * (dy[idx] - sum_dy[f] / count -
                               xhat[idx] * sum_dy_xhat[f] / count);
          } else {
            dx[idx] = scale * dy[idx];
          }
        }
    grad_in.push_back(std::move(dx));
  }
  return grad_in;
}

// ---------------------------------------------------------------------------
// Non-overlapping 2-d max pooling over H x W x D.

template <typename T>
struct MaxPoolResult {
  Tensor<T> output;
  std::vector<std::uint32_t> argmax;  // flat input index per output element
};

template <typename T>
MaxPoolResult<T> maxpool2d(const Tensor<T>& input, std::size_t pool_h,
                           std::size_t pool_w) {
  require_rank(input, 3, "maxpool2d input");
  if (pool_h == 0 || pool_w == 0 || input.dim(0) % pool_h != 0 ||
      input.dim(1) % pool_w != 0) {
    throw ConfigError("maxpool2d: pool " + std::to_string(pool_h) + "x" +
                      std::to_string(pool_w) + " does not tile input " +
                      to_string(input.shape()));
  }
  const std::size_t h_in = input.dim(0), w_in = input.dim(1), depth = input.dim(2);
  const std::size_t h_out = h_in / pool_h, w_out = w_in / pool_w;
  MaxPoolResult<T> r{Tensor<T>({h_out, w_out, depth}), {}};
  r.argmax.resize(r.output.size());
  for (std::size_t oh = 0; oh < h_out; ++oh)
    for (std::size_t ow = 0; ow < w_out; ++ow)
      for (std::size_t d = 0; d < depth; ++d) {
        std::size_t best = (oh * pool_h * w_in + ow * pool_w) * depth + d;
        for (std::size_t i = 0; i < pool_h; ++i)
          for (std::size_t j = 0; j < pool_w; ++j) {
            const std::size_t idx =
                ((oh * pool_h + i) * w_in + ow * pool_w + j) * depth + d;
            if (input[idx] > input[best]) best = idx;  // first max wins ties
          }
        const std::size_t o = (oh * w_out + ow) * depth + d;
        r.output[o] = input[best];
        r.argmax[o] = static_cast<std::uint32_t>(best);
      }
  return r;
}

template <typename T>
Tensor<T> maxpool2d_backward(const Tensor<T>& grad_out,
                             std::span<const std::uint32_t> argmax,
                             const Shape& input_shape) {
  if (argmax.size() != grad_out.size()) {
    throw DimensionError("maxpool2d_backward: argmax/grad size mismatch");
  }
  Tensor<T> grad_in(input_shape);
  for (std::size_t o = 0; o < grad_out.size(); ++o) grad_in[argmax[o]] += grad_out[o];
  return grad_in;
}

// ---------------------------------------------------------------------------
// Inverted dropout: survivors scaled by 1/(1-p), so eval mode is identity.

template <typename T>
struct DropoutResult {
  Tensor<T> output;
  Tensor<T> mask;  // 0 or 1/(1-p); empty in eval mode
};

template <typename T>
DropoutResult<T> dropout(const Tensor<T>& input, double p, Prng& rng, Mode mode) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw ConfigError("dropout: rate must lie in [0, 1), got " + std::to_string(p));
  }
  if (mode == Mode::eval || p == 0.0) return {input, {}};
  DropoutResult<T> r{Tensor<T>(input.shape()), Tensor<T>(input.shape())};
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  for (std::size_t i = 0; i < input.size(); ++i) {
    const T m = rng.uniform() < p ? T{0} : keep_scale;
    r.mask[i] = m;
    r.output[i] = input[i] * m;
  }
  return r;
}

template <typename T>
Tensor<T> dropout_backward(const Tensor<T>& grad_out, const Tensor<T>& mask) {
  if (mask.empty()) return grad_out;
  detail::require_same_shape(grad_out, mask, "dropout_backward");
  Tensor<T> g(grad_out.shape());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = grad_out[i] * mask[i];
  return g;
}

// ---------------------------------------------------------------------------
// Row-wise softmax with max subtraction.

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits) {
  require_rank(logits, 2, "softmax_rows input");
  Tensor<T> out(logits.shape());
  const std::size_t n = logits.dim(1);
  for (std::size_t r = 0; r < logits.dim(0); ++r) {
    const auto in = logits.row(r);
    auto o = out.row(r);
    const T mx = *std::max_element(in.begin(), in.end());
    T sum{0};
    for (std::size_t k = 0; k < n; ++k) {
      o[k] = std::exp(in[k] - mx);
      sum += o[k];
    }
    for (std::size_t k = 0; k < n; ++k) o[k] /= sum;
  }
  return out;
}

template <typename T>
Tensor<T> log_softmax_rows(const Tensor<T>& logits) {
  require_rank(logits, 2, "log_softmax_rows input");
  Tensor<T> out(logits.shape());
  const std::size_t n = logits.dim(1);
  for (std::size_t r = 0; r < logits.dim(0); ++r) {
    const auto in = logits.row(r);
    const T mx = *std::max_element(in.begin(), in.end());
    T sum{0};
    for (std::size_t k = 0; k < n; ++k) sum += std::exp(in[k] - mx);
    const T lse = mx + std::log(sum);
    for (std::size_t k = 0; k < n; ++k) out.at(r, k) = in[k] - lse;
  }
  return out;
}

// Given y = softmax(z) and dL/dy, returns dL/dz.
template <typename T>
Tensor<T> softmax_rows_backward(const Tensor<T>& probs, const Tensor<T>& grad_probs) {
  detail::require_same_shape(probs, grad_probs, "softmax_rows_backward");
  Tensor<T> g(probs.shape());
  for (std::size_t r = 0; r < probs.dim(0); ++r) {
    const auto y = probs.row(r);
    const auto gy = grad_probs.row(r);
    const T inner = detail::dot(y.data(), gy.data(), y.size());
    auto gz = g.row(r);
    for (std::size_t k = 0; k < y.size(); ++k) gz[k] = y[k] * (gy[k] - inner);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Dense algebra and pointwise nonlinearities.

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank(a, 2, "matmul lhs");
  require_rank(b, 2, "matmul rhs");
  require_dim(b, 0, a.dim(1), "matmul rhs (inner axis)");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor<T> c({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p)
      detail::axpy(a.at(i, p), b.row(p).data(), c.row(i).data(), n);
  return c;
}

// dA = dC * B^T, dB = A^T * dC; either output may be null.
template <typename T>
void matmul_backward(const Tensor<T>& a, const Tensor<T>& b,
                     const Tensor<T>& grad_c, Tensor<T>* grad_a,
                     Tensor<T>* grad_b) {
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  require_dim(grad_c, 0, m, "matmul_backward grad");
  require_dim(grad_c, 1, n, "matmul_backward grad");
  if (grad_a) {
    detail::require_same_shape(*grad_a, a, "matmul_backward grad_a");
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p)
        grad_a->at(i, p) += detail::dot(grad_c.row(i).data(), b.row(p).data(), n);
  }
  if (grad_b) {
    detail::require_same_shape(*grad_b, b, "matmul_backward grad_b");
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p)
        detail::axpy(a.at(i, p), grad_c.row(i).data(), grad_b->row(p).data(), n);
  }
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "add");
  Tensor<T> c(a.shape());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = a[i] + b[i];
  return c;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "mul");
  Tensor<T> c(a.shape());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = a[i] * b[i];
  return c;
}

// d(a*b): returns {grad * b, grad * a}.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> mul_backward(const Tensor<T>& a, const Tensor<T>& b,
                                             const Tensor<T>& grad) {
  return {mul(grad, b), mul(grad, a)};
}

template <typename T>
inline T sigmoid(T x) {
  return T{1} / (T{1} + std::exp(-x));
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = sigmoid(x[i]);
  return y;
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::tanh(x[i]);
  return y;
}

// Both backward helpers take the forward *output*.
template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& y, const Tensor<T>& grad) {
  detail::require_same_shape(y, grad, "sigmoid_backward");
  Tensor<T> g(y.shape());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = grad[i] * y[i] * (T{1} - y[i]);
  return g;
}

template <typename T>
Tensor<T> tanh_backward(const Tensor<T>& y, const Tensor<T>& grad) {
  detail::require_same_shape(y, grad, "tanh_backward");
  Tensor<T> g(y.shape());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = grad[i] * (T{1} - y[i] * y[i]);
  return g;
}

}  // namespace eegctc

#endif  // EEGCTC_OPS_HPP_

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
#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "eegctc/grad_check.hpp"
#include "eegctc/ops.hpp"
#include "eegctc/prng.hpp"
#include "eegctc/tensor.hpp"

namespace eegctc {
namespace {

constexpr int kInstances = 20;
constexpr double kOpTolerance = 1e-4;
constexpr double kStep = 1e-6;

Tensor<double> randn(Prng& rng, Shape shape, double scale = 1.0) {
  Tensor<double> t(std::move(shape));
  for (auto& v : t.data()) v = rng.normal(0.0, scale);
  return t;
}

// Scalar probe: sum(w * y) with fixed random weights w.
double probe(const Tensor<double>& y, const Tensor<double>& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * w[i];
  return s;
}

void set_grad(Tensor<double>& t, std::span<const double> g) {
  t.enable_grad();
  ASSERT_EQ(g.size(), t.size());
  std::copy(g.begin(), g.end(), t.grad().begin());
}

double check(const std::function<double()>& loss, Tensor<double>& param) {
  return grad_check(loss, param, kStep).max_rel_error;
}

// ---------------------------------------------------------------------------

TEST(TensorTest, ShapeAndSize) {
  Tensor<double> t({2, 3, 4});
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(t.rank(), 3u);
  EXPECT_EQ(t.values().size(), shape_size(t.shape()));
  EXPECT_THROW(Tensor<double>({2, 0}), DimensionError);
  EXPECT_THROW(Tensor<double>({2, 2}, std::vector<double>(3)), DimensionError);
}

TEST(TensorTest, GradBufferMatchesShape) {
  Tensor<double> t({3, 5});
  EXPECT_FALSE(t.has_grad());
  EXPECT_THROW(t.grad(), StateError);
  t.enable_grad();
  EXPECT_EQ(t.grad().size(), t.size());
  t.drop_grad();
  EXPECT_FALSE(t.has_grad());
}

TEST(TensorTest, ReshapeFlattenRoundTripIsExact) {
  Prng rng(1);
  for (int i = 0; i < 20; ++i) {
    const auto t = randn(rng, {2 + rng.index(4), 3 + rng.index(4), 1 + rng.index(3)});
    const auto flat = t.flattened();
    EXPECT_EQ(flat.rank(), 1u);
    EXPECT_EQ(flat.reshaped(t.shape()), t);
    const auto re = t.reshaped({t.dim(0), t.dim(1) * t.dim(2)});
    EXPECT_EQ(re.reshaped(t.shape()), t);
  }
  EXPECT_THROW(Tensor<double>({2, 3}).reshaped({5}), DimensionError);
}

TEST(PrngTest, SameSeedSameStream) {
  Prng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 1000; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    differs |= x != c.next_u64();
  }
  EXPECT_TRUE(differs);
}

TEST(PrngTest, KnownOutputs) {
  // std::mt19937_64 is fully specified: its 10000th output for the default
  // seed 5489 is 9981545732273789042.
  Prng p(5489);
  std::uint64_t x = 0;
  for (int i = 0; i < 10000; ++i) x = p.next_u64();
  EXPECT_EQ(x, 9981545732273789042ULL);
}

TEST(PrngTest, DistributionsStayInRange) {
  Prng p(3);
  double sum = 0.0, sq = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = p.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    const auto k = p.uniform_int(-3, 3);
    ASSERT_GE(k, -3);
    ASSERT_LE(k, 3);
    const double z = p.normal();
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.02);
  EXPECT_NEAR(sq / n, 1.0, 0.02);
}

TEST(PrngTest, DeriveSeedSeparatesStreams) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 8; ++s)
    for (std::uint64_t i = 0; i < 100; ++i) seen.insert(derive_seed(7, s, i));
  EXPECT_EQ(seen.size(), 800u);
  EXPECT_EQ(derive_seed(7, 1, 2), derive_seed(7, 1, 2));
}

// ---------------------------------------------------------------------------

TEST(ChannelMix, ShapesAndHandExamples) {
  Prng rng(2);
  const auto x = randn(rng, {118, 50});
  const auto k = randn(rng, {20, 118});
  EXPECT_EQ(channel_mix_conv(x, k, Tensor<double>({20})).shape(), (Shape{20, 50}));

  Tensor<double> in({2, 1}, std::vector<double>{3.0, 5.0});
  Tensor<double> kk({1, 2}, std::vector<double>{1.0, 1.0});
  EXPECT_EQ(channel_mix_conv(in, kk, Tensor<double>({1}))[0], 8.0);

  Tensor<double> eye({4, 4});
  for (std::size_t i = 0; i < 4; ++i) eye.at(i, i) = 1.0;
  const auto y = randn(rng, {4, 9});
  EXPECT_EQ(channel_mix_conv(y, eye, Tensor<double>({4})), y);
}

TEST(ChannelMix, RejectsMismatch) {
  EXPECT_THROW(channel_mix_conv(Tensor<double>({3, 5}), Tensor<double>({2, 4}),
                                Tensor<double>({2})),
               DimensionError);
}

TEST(ChannelMix, GradCheck) {
  Prng rng(3);
  for (int n = 0; n < kInstances; ++n) {
    const std::size_t c = 1 + rng.index(5), t = 1 + rng.index(7), k = 1 + rng.index(4);
    auto x = randn(rng, {c, t}), w = randn(rng, {k, c}), b = randn(rng, {k});
    const auto probe_w = randn(rng, {k, t});
    Tensor<double> gx({c, t}), gw({k, c}), gb({k});
    channel_mix_conv_backward(x, w, probe_w, &gx, gw.data(), gb.data());
    auto loss = [&] { return probe(channel_mix_conv(x, w, b), probe_w); };
    set_grad(x, gx.values());
    set_grad(w, gw.values());
    set_grad(b, gb.values());
    EXPECT_LT(check(loss, x), kOpTolerance);
    EXPECT_LT(check(loss, w), kOpTolerance);
    EXPECT_LT(check(loss, b), kOpTolerance);
  }
}

// ---------------------------------------------------------------------------

// Direct nested-loop definition of zero-padded "same" cross-correlation.
Tensor<double> conv_reference(const Tensor<double>& x, const Tensor<double>& k,
                              const Tensor<double>& b) {
  const std::size_t h = x.dim(0), w = x.dim(1), d = x.dim(2);
  const std::size_t f = k.dim(0), kh = k.dim(1), kw = k.dim(2);
  const long ph = static_cast<long>(kh - 1) / 2, pw = static_cast<long>(kw - 1) / 2;
  Tensor<double> y({h, w, f});
  for (std::size_t oy = 0; oy < h; ++oy)
    for (std::size_t ox = 0; ox < w; ++ox)
      for (std::size_t of = 0; of < f; ++of) {
        double s = b[of];
        for (std::size_t i = 0; i < kh; ++i)
          for (std::size_t j = 0; j < kw; ++j) {
            const long iy = static_cast<long>(oy + i) - ph;
            const long ix = static_cast<long>(ox + j) - pw;
            if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(w))
              continue;
            for (std::size_t c = 0; c < d; ++c)
              s += k[((of * kh + i) * kw + j) * d + c] *
                   x.at(static_cast<std::size_t>(iy), static_cast<std::size_t>(ix), c);
          }
        y.at(oy, ox, of) = s;
      }
  return y;
}

TEST(Conv2d, TableShapes) {
  Prng rng(4);
  EXPECT_EQ(conv2d_same(randn(rng, {20, 50, 1}), randn(rng, {5, 3, 33, 1}),
                        Tensor<double>({5}))
                .shape(),
            (Shape{20, 50, 5}));
  EXPECT_EQ(conv2d_same(randn(rng, {10, 10, 5}), randn(rng, {5, 11, 3, 5}),
                        Tensor<double>({5}))
                .shape(),
            (Shape{10, 10, 5}));
}

TEST(Conv2d, ZeroKernelGivesBias) {
  Prng rng(5);
  Tensor<double> b({3}, std::vector<double>{1.5, -2.0, 0.25});
  const auto y = conv2d_same(randn(rng, {4, 6, 2}), Tensor<double>({3, 3, 5, 2}), b);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 6; ++j)
      for (std::size_t f = 0; f < 3; ++f) EXPECT_EQ(y.at(i, j, f), b[f]);
}

TEST(Conv2d, EvenKernelRejected) {
  EXPECT_THROW(conv2d_same(Tensor<double>({4, 4, 1}), Tensor<double>({1, 2, 3, 1}),
                           Tensor<double>({1})),
               ConfigError);
}

TEST(Conv2d, MatchesNestedLoopDefinition) {
  Prng rng(6);
  for (int n = 0; n < kInstances; ++n) {
    const std::size_t h = 1 + rng.index(12), w = 1 + rng.index(40), d = 1 + rng.index(3);
    const std::size_t f = 1 + rng.index(4), kh = 1 + 2 * rng.index(3), kw = 1 + 2 * rng.index(8);
    const auto x = randn(rng, {h, w, d}), k = randn(rng, {f, kh, kw, d}), b = randn(rng, {f});
    const auto got = conv2d_same(x, k, b), want = conv_reference(x, k, b);
    for (std::size_t i = 0; i < got.size(); ++i) ASSERT_NEAR(got[i], want[i], 1e-12);
  }
}

TEST(Conv2d, GradCheck) {
  Prng rng(7);
  for (int n = 0; n < kInstances; ++n) {
    const std::size_t h = 1 + rng.index(6), w = 1 + rng.index(12), d = 1 + rng.index(3);
    const std::size_t f = 1 + rng.index(3), kh = 1 + 2 * rng.index(3), kw = 1 + 2 * rng.index(5);
    auto x = randn(rng, {h, w, d}), k = randn(rng, {f, kh, kw, d}), b = randn(rng, {f});
    const auto pw = randn(rng, {h, w, f});
    Tensor<double> gx(x.shape()), gk(k.shape()), gb({f});
    conv2d_same_backward(x, k, pw, &gx, gk.data(), gb.data());
    auto loss = [&] { return probe(conv2d_same(x, k, b), pw); };
    set_grad(x, gx.values());
    set_grad(k, gk.values());
    set_grad(b, gb.values());
    EXPECT_LT(check(loss, x), kOpTolerance);
    EXPECT_LT(check(loss, k), kOpTolerance);
    EXPECT_LT(check(loss, b), kOpTolerance);
  }
}

// ---------------------------------------------------------------------------

TEST(BatchNorm, TrainModeStandardizes) {
  Prng rng(8);
  std::vector<Tensor<double>> batch;
  for (int i = 0; i < 6; ++i) batch.push_back(randn(rng, {4, 7, 3}, 3.0));
  for (auto& t : batch)
    for (auto& v : t.data()) v += 5.0;
  for (std::size_t axis = 0; axis < 3; ++axis) {
    const std::size_t nf = batch[0].dim(axis);
    BatchNormState<double> st(nf);
    const auto out = batchnorm<double>(batch, axis, Tensor<double>({nf}, 1.0),
                                       Tensor<double>({nf}), st, Mode::train);
    std::vector<double> sum(nf), sq(nf), cnt(nf);
    for (const auto& y : out)
      for (std::size_t i = 0; i < y.dim(0); ++i)
        for (std::size_t j = 0; j < y.dim(1); ++j)
          for (std::size_t k = 0; k < y.dim(2); ++k) {
            const std::size_t f = axis == 0 ? i : axis == 1 ? j : k;
            sum[f] += y.at(i, j, k);
            sq[f] += y.at(i, j, k) * y.at(i, j, k);
            cnt[f] += 1;
          }
    for (std::size_t f = 0; f < nf; ++f) {
      const double mean = sum[f] / cnt[f];
      EXPECT_LT(std::abs(mean), 1e-6);
      // eps = 1e-5 shrinks the variance by var / (var + eps).
      EXPECT_NEAR(sq[f] / cnt[f] - mean * mean, 1.0, 1e-5);
    }
  }
}

TEST(BatchNorm, ZeroGammaGivesBeta) {
  Prng rng(9);
  const auto x = randn(rng, {5, 3});
  BatchNormState<double> st(3);
  Tensor<double> beta({3}, std::vector<double>{1.0, -2.0, 3.5});
  for (Mode m : {Mode::train, Mode::eval}) {
    const auto y = batchnorm(x, 1, Tensor<double>({3}), beta, st, m);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t f = 0; f < 3; ++f) EXPECT_EQ(y.at(i, f), beta[f]);
  }
}

TEST(BatchNorm, EvalModeUsesRunningStatsDeterministically) {
  Prng rng(10);
  const auto x = randn(rng, {4, 6});
  BatchNormState<double> st(4);
  const Tensor<double> g({4}, 1.0), b({4});
  // Fresh state: mean 0, var 1, so eval output is x / sqrt(1 + eps).
  const auto y0 = batchnorm(x, 0, g, b, st, Mode::eval);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y0[i], x[i] / std::sqrt(1 + 1e-5), 1e-15);
  batchnorm(x, 0, g, b, st, Mode::train);
  const auto y1 = batchnorm(x, 0, g, b, st, Mode::eval);
  const auto y2 = batchnorm(x, 0, g, b, st, Mode::eval);
  EXPECT_EQ(y1, y2);
}

TEST(BatchNorm, RunningStatsFollowMovingAverage) {
  Tensor<double> x({2, 2}, std::vector<double>{1.0, 3.0, 2.0, 6.0});
  BatchNormState<double> st(2, 0.9);
  batchnorm(x, 0, Tensor<double>({2}, 1.0), Tensor<double>({2}), st, Mode::train);
  // Feature 0 holds {1, 3}: mean 2, biased var 1. Feature 1 holds {2, 6}: mean 4, var 4.
  EXPECT_NEAR(st.running_mean[0], 0.1 * 2.0, 1e-15);
  EXPECT_NEAR(st.running_mean[1], 0.1 * 4.0, 1e-15);
  EXPECT_NEAR(st.running_var[0], 0.9 + 0.1 * 1.0, 1e-15);
  EXPECT_NEAR(st.running_var[1], 0.9 + 0.1 * 4.0, 1e-15);
}

TEST(BatchNorm, GradCheckTrainAndEval) {
  Prng rng(11);
  for (int n = 0; n < kInstances; ++n) {
    const std::size_t members = 1 + rng.index(3);
    const Shape shape{2 + rng.index(3), 1 + rng.index(4), 1 + rng.index(3)};
    const std::size_t axis = rng.index(3), nf = shape[axis];
    const Mode mode = n % 2 ? Mode::eval : Mode::train;
    Tensor<double> x = randn(rng, {members * shape_size(shape)});
    auto gamma = randn(rng, {nf}), beta = randn(rng, {nf});
    std::vector<Tensor<double>> probes;
    for (std::size_t m = 0; m < members; ++m) probes.push_back(randn(rng, shape));
    BatchNormState<double> frozen(nf);
    for (std::size_t f = 0; f < nf; ++f) {
      frozen.running_mean[f] = rng.normal();
      frozen.running_var[f] = 0.5 + rng.uniform();
    }
    auto split = [&] {
      std::vector<Tensor<double>> batch;
      const std::size_t len = shape_size(shape);
      for (std::size_t m = 0; m < members; ++m) {
        std::vector<double> v(x.values().begin() + m * len, x.values().begin() + (m + 1) * len);
        batch.emplace_back(shape, std::move(v));
      }
      return batch;
    };
    auto loss = [&] {
      auto st = frozen;
      const auto out = batchnorm<double>(split(), axis, gamma, beta, st, mode);
      double s = 0.0;
      for (std::size_t m = 0; m < members; ++m) s += probe(out[m], probes[m]);
      return s;
    };
    auto st = frozen;
    BatchNormCache<double> cache;
    batchnorm<double>(split(), axis, gamma, beta, st, mode, &cache);
    Tensor<double> gg({nf}), gb({nf});
    const auto gx = batchnorm_backward<double>(probes, cache, gamma, gg.data(), gb.data());
    std::vector<double> flat;
    for (const auto& g : gx) flat.insert(flat.end(), g.values().begin(), g.values().end());
    set_grad(x, flat);
    set_grad(gamma, gg.values());
    set_grad(beta, gb.values());
    EXPECT_LT(check(loss, x), kOpTolerance) << "mode " << (mode == Mode::train);
    EXPECT_LT(check(loss, gamma), kOpTolerance);
    EXPECT_LT(check(loss, beta), kOpTolerance);
  }
}

TEST(BatchNorm, BackwardWithoutForwardIsStateError) {
  BatchNormCache<double> cache;
  std::vector<Tensor<double>> g{Tensor<double>({2})};
  Tensor<double> gg({2}), gb({2});
  EXPECT_THROW(batchnorm_backward<double>(g, cache, Tensor<double>({2}), gg.data(), gb.data()),
               StateError);
}

// ---------------------------------------------------------------------------

TEST(MaxPool, TableShapesAndConstant) {
  EXPECT_EQ(maxpool2d(Tensor<double>({20, 50, 5}), 2, 5).output.shape(), (Shape{10, 10, 5}));
  EXPECT_EQ(maxpool2d(Tensor<double>({10, 10, 5}), 2, 5).output.shape(), (Shape{5, 2, 5}));
  const auto r = maxpool2d(Tensor<double>({4, 10, 2}, 3.5), 2, 5);
  for (double v : r.output.values()) EXPECT_EQ(v, 3.5);
  EXPECT_THROW(maxpool2d(Tensor<double>({5, 10, 1}), 2, 5), ConfigError);
}

TEST(MaxPool, TiesRouteToFirstIndex) {
  const auto r = maxpool2d(Tensor<double>({2, 2, 1}, 1.0), 2, 2);
  EXPECT_EQ(r.argmax[0], 0u);
  const auto g = maxpool2d_backward(Tensor<double>({1, 1, 1}, 2.0),
                                    std::span<const std::uint32_t>(r.argmax), Shape{2, 2, 1});
  EXPECT_EQ(g.values()[0], 2.0);
  EXPECT_EQ(g.values()[3], 0.0);
}

TEST(MaxPool, GradientMassIsConserved) {
  Prng rng(12);
  for (int n = 0; n < kInstances; ++n) {
    const std::size_t ph = 1 + rng.index(3), pw = 1 + rng.index(5);
    const Shape s{ph * (1 + rng.index(4)), pw * (1 + rng.index(4)), 1 + rng.index(3)};
    const auto r = maxpool2d(randn(rng, s), ph, pw);
    const auto go = randn(rng, r.output.shape());
    const auto gi =
        maxpool2d_backward(go, std::span<const std::uint32_t>(r.argmax), s);
    const double a = std::accumulate(go.values().begin(), go.values().end(), 0.0);
    const double b = std::accumulate(gi.values().begin(), gi.values().end(), 0.0);
    EXPECT_NEAR(a, b, 1e-12);
  }
}

TEST(MaxPool, GradCheck) {
  Prng rng(13);
  for (int n = 0; n < kInstances; ++n) {
    const std::size_t ph = 1 + rng.index(3), pw = 1 + rng.index(5);
    const Shape s{ph * (1 + rng.index(3)), pw * (1 + rng.index(3)), 1 + rng.index(3)};
    auto x = randn(rng, s);
    const auto r = maxpool2d(x, ph, pw);
    const auto pwt = randn(rng, r.output.shape());
    const auto gx = maxpool2d_backward(pwt, std::span<const std::uint32_t>(r.argmax), s);
    set_grad(x, gx.values());
    EXPECT_LT(check([&] { return probe(maxpool2d(x, ph, pw).output, pwt); }, x),
              kOpTolerance);
  }
}

// ---------------------------------------------------------------------------

TEST(Dropout, IdentityCases) {
  Prng rng(14);
  const auto x = randn(rng, {7, 9});
  EXPECT_EQ(dropout(x, 0.0, rng, Mode::train).output, x);
  EXPECT_EQ(dropout(x, 0.5, rng, Mode::eval).output, x);
  EXPECT_THROW(dropout(x, 1.0, rng, Mode::train), ConfigError);
}

TEST(Dropout, InvertedScalingKeepsMean) {
  Prng rng(15);
  const std::size_t n = 100000;
  const auto r = dropout(Tensor<double>({n}, 1.0), 0.5, rng, Mode::train);
  const double mean = std::accumulate(r.output.values().begin(), r.output.values().end(), 0.0) / n;
  // Each element is 0 or 2 with probability 1/2: variance 1, sd of mean 1/sqrt(n).
  EXPECT_LT(std::abs(mean - 1.0), 3.0 / std::sqrt(static_cast<double>(n)));
}

TEST(Dropout, GradCheckWithFixedMask) {
  Prng rng(16);
  for (int n = 0; n < kInstances; ++n) {
    auto x = randn(rng, {1 + rng.index(5), 1 + rng.index(5)});
    const double p = 0.1 + 0.8 * rng.uniform();
    const std::uint64_t seed = rng.next_u64();
    const auto pw = randn(rng, x.shape());
    auto run = [&] {
      Prng local(seed);
      return dropout(x, p, local, Mode::train);
    };
    const auto gx = dropout_backward(pw, run().mask);
    set_grad(x, gx.values());
    EXPECT_LT(check([&] { return probe(run().output, pw); }, x), kOpTolerance);
  }
}

// ---------------------------------------------------------------------------

TEST(Softmax, ClosedFormValues) {
  Tensor<double> eq({1, 4}, 0.7);
  const auto ye = softmax_rows(eq);
  for (double v : ye.values()) EXPECT_NEAR(v, 0.25, 1e-15);
  Tensor<double> l({1, 4}, std::vector<double>{std::log(2.0), 0.0, 0.0, 0.0});
  const auto y = softmax_rows(l);
  EXPECT_NEAR(y[0], 0.4, 1e-15);
  for (int k = 1; k < 4; ++k) EXPECT_NEAR(y[k], 0.2, 1e-15);
}

TEST(Softmax, RowsSumToOneAndShiftInvariant) {
  Prng rng(17);
  for (int n = 0; n < 50; ++n) {
    auto x = randn(rng, {1 + rng.index(6), 2 + rng.index(5)}, 10.0);
    const auto y = softmax_rows(x);
    auto shifted = x;
    for (std::size_t t = 0; t < x.dim(0); ++t) {
      const double c = rng.normal(0.0, 100.0);
      for (auto& v : shifted.row(t)) v += c;
    }
    const auto ys = softmax_rows(shifted);
    for (std::size_t t = 0; t < x.dim(0); ++t) {
      double s = 0.0;
      for (double v : y.row(t)) {
        EXPECT_GT(v, 0.0);
        s += v;
      }
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], ys[i], 1e-12);
  }
}

TEST(Softmax, LargeLogitsStayFinite) {
  Tensor<double> x({1, 3}, std::vector<double>{1000.0, 999.0, -1000.0});
  EXPECT_TRUE(softmax_rows(x).all_finite());
  EXPECT_TRUE(log_softmax_rows(x).all_finite());
}

TEST(Softmax, GradCheck) {
  Prng rng(18);
  for (int n = 0; n < kInstances; ++n) {
    auto x = randn(rng, {1 + rng.index(5), 2 + rng.index(4)});
    const auto pw = randn(rng, x.shape());
    const auto gx = softmax_rows_backward(softmax_rows(x), pw);
    set_grad(x, gx.values());
    EXPECT_LT(check([&] { return probe(softmax_rows(x), pw); }, x), kOpTolerance);
  }
}

TEST(LogSoftmax, MatchesLogOfSoftmax) {
  Prng rng(19);
  const auto x = randn(rng, {4, 5});
  const auto a = log_softmax_rows(x), b = softmax_rows(x);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], std::log(b[i]), 1e-12);
}

// ---------------------------------------------------------------------------

TEST(Matmul, HandExampleAndGradCheck) {
  Tensor<double> a({2, 2}, std::vector<double>{1, 2, 3, 4});
  Tensor<double> b({2, 1}, std::vector<double>{5, 6});
  const auto c = matmul(a, b);
  EXPECT_EQ(c[0], 17.0);
  EXPECT_EQ(c[1], 39.0);
  EXPECT_THROW(matmul(a, Tensor<double>({3, 1})), DimensionError);

  Prng rng(20);
  for (int n = 0; n < kInstances; ++n) {
    const std::size_t m = 1 + rng.index(5), k = 1 + rng.index(5), p = 1 + rng.index(5);
    auto x = randn(rng, {m, k}), y = randn(rng, {k, p});
    const auto pw = randn(rng, {m, p});
    Tensor<double> gx(x.shape()), gy(y.shape());
    matmul_backward(x, y, pw, &gx, &gy);
    auto loss = [&] { return probe(matmul(x, y), pw); };
    set_grad(x, gx.values());
    set_grad(y, gy.values());
    EXPECT_LT(check(loss, x), kOpTolerance);
    EXPECT_LT(check(loss, y), kOpTolerance);
  }
}

TEST(Elementwise, AddMulGradCheck) {
  Prng rng(21);
  for (int n = 0; n < kInstances; ++n) {
    const Shape s{1 + rng.index(4), 1 + rng.index(4)};
    auto a = randn(rng, s), b = randn(rng, s);
    const auto pw = randn(rng, s);
    set_grad(a, pw.values());
    EXPECT_LT(check([&] { return probe(add(a, b), pw); }, a), kOpTolerance);
    const auto [ga, gb] = mul_backward(a, b, pw);
    set_grad(a, ga.values());
    set_grad(b, gb.values());
    auto loss = [&] { return probe(mul(a, b), pw); };
    EXPECT_LT(check(loss, a), kOpTolerance);
    EXPECT_LT(check(loss, b), kOpTolerance);
  }
  EXPECT_THROW(add(Tensor<double>({2}), Tensor<double>({3})), DimensionError);
}

TEST(Elementwise, SigmoidTanhGradCheck) {
  Prng rng(22);
  for (int n = 0; n < kInstances; ++n) {
    auto x = randn(rng, {1 + rng.index(4), 1 + rng.index(4)}, 2.0);
    const auto pw = randn(rng, x.shape());
    set_grad(x, sigmoid_backward(sigmoid(x), pw).values());
    EXPECT_LT(check([&] { return probe(sigmoid(x), pw); }, x), kOpTolerance);
    set_grad(x, tanh_backward(eegctc::tanh(x), pw).values());
    EXPECT_LT(check([&] { return probe(eegctc::tanh(x), pw); }, x), kOpTolerance);
  }
}

TEST(Elementwise, ForwardOpsPreserveFiniteness) {
  Prng rng(23);
  for (int n = 0; n < 50; ++n) {
    const auto x = randn(rng, {3, 4}, 50.0);
    EXPECT_TRUE(sigmoid(x).all_finite());
    EXPECT_TRUE(eegctc::tanh(x).all_finite());
    EXPECT_TRUE(softmax_rows(x).all_finite());
    EXPECT_TRUE(mul(x, x).all_finite());
    EXPECT_TRUE(matmul(x, randn(rng, {4, 2})).all_finite());
  }
}

// ---------------------------------------------------------------------------

TEST(GradCheckHarness, QuadraticIsExact) {
  Tensor<double> w({1}, 3.0);
  w.enable_grad();
  w.grad()[0] = 6.0;
  const auto r = grad_check([&] { return w[0] * w[0]; }, w, 1e-5);
  EXPECT_LT(r.max_rel_error, 1e-9);
  EXPECT_NEAR(r.numeric, 6.0, 1e-9);
  EXPECT_EQ(r.checked, 1u);
}

TEST(GradCheckHarness, VerdictStableAcrossSteps) {
  Prng rng(24);
  auto x = randn(rng, {3, 4});
  const auto pw = randn(rng, x.shape());
  set_grad(x, tanh_backward(eegctc::tanh(x), pw).values());
  auto loss = [&] { return probe(eegctc::tanh(x), pw); };
  const double e5 = grad_check(loss, x, 1e-5).max_rel_error;
  const double e6 = grad_check(loss, x, 1e-6).max_rel_error;
  EXPECT_LT(e5, 1e-4);
  EXPECT_LT(e6, 1e-4);
}

TEST(GradCheckHarness, DetectsWrongGradient) {
  Tensor<double> w({2}, 1.0);
  w.enable_grad();
  w.grad()[0] = 2.0;
  w.grad()[1] = 5.0;  // true derivative of w0^2 + w1^2 at 1 is 2
  const auto r = grad_check([&] { return w[0] * w[0] + w[1] * w[1]; }, w, 1e-6);
  EXPECT_EQ(r.worst_index, 1u);
  EXPECT_GT(r.max_rel_error, 0.5);
}

TEST(GradCheckHarness, NonFiniteLossIsReported) {
  Tensor<double> w({1}, 0.0);
  w.enable_grad();
  EXPECT_THROW(grad_check([&] { return std::log(w[0]); }, w, 1e-6), NumericError);
}

}  // namespace
}  // namespace eegctc

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

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "eegctc/ctc.hpp"
#include "eegctc/grad_check.hpp"
#include "eegctc/ops.hpp"
#include "eegctc/prng.hpp"

namespace eegctc {
namespace {

// Alphabet {a, b} with blank at index 2.
constexpr std::size_t kA = 0, kB = 1, kBlank = 2;

Tensor<double> random_logits(Prng& rng, std::size_t frames, std::size_t n,
                             double scale = 2.0) {
  Tensor<double> t({frames, n});
  for (auto& v : t.data()) v = rng.normal(0.0, scale);
  return t;
}

LabelSequence random_labels(Prng& rng, std::size_t n, std::size_t max_len) {
  LabelSequence l(rng.index(max_len + 1));
  for (auto& v : l) v = rng.index(n - 1);
  return l;
}

// Recursive enumeration of every label sequence of length <= max_len.
void all_sequences(std::size_t labels, std::size_t max_len, LabelSequence& cur,
                   std::vector<LabelSequence>& out) {
  out.push_back(cur);
  if (cur.size() == max_len) return;
  for (std::size_t k = 0; k < labels; ++k) {
    cur.push_back(k);
    all_sequences(labels, max_len, cur, out);
    cur.pop_back();
  }
}

TEST(Collapse, WorkedExamples) {
  EXPECT_EQ(collapse({kA, kBlank, kA, kB, kBlank}, kBlank), (LabelSequence{kA, kA, kB}));
  EXPECT_EQ(collapse({kBlank, kA, kA, kBlank, kBlank, kA, kB, kB}, kBlank),
            (LabelSequence{kA, kA, kB}));
}

TEST(Collapse, AllBlankIsEmpty) {
  EXPECT_TRUE(collapse({kBlank, kBlank, kBlank}, kBlank).empty());
  EXPECT_TRUE(collapse({}, kBlank).empty());
}

TEST(Collapse, BlankFreeRepeatFreeIsIdentity) {
  Prng rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    LabelSequence l;
    const std::size_t len = rng.index(10);
    for (std::size_t i = 0; i < len; ++i) {
      std::size_t k;
      do k = rng.index(3); while (!l.empty() && k == l.back());
      l.push_back(k);
    }
    EXPECT_EQ(collapse(l, 3), l);
  }
}

TEST(Collapse, BlankBetweenDistinctLabelsIsNeutral) {
  Prng rng(12);
  for (int trial = 0; trial < 2000; ++trial) {
    Path p(2 + rng.index(8));
    for (auto& v : p) v = rng.index(4);
    std::vector<std::size_t> spots;
    for (std::size_t i = 0; i + 1 < p.size(); ++i)
      if (p[i] != p[i + 1] && p[i] != 3 && p[i + 1] != 3) spots.push_back(i + 1);
    if (spots.empty()) continue;
    Path q = p;
    q.insert(q.begin() + static_cast<std::ptrdiff_t>(spots[rng.index(spots.size())]), 3);
    EXPECT_EQ(collapse(p, 3), collapse(q, 3));
  }
}

TEST(PathProb, UniformAndOneHot) {
  Tensor<double> uniform({2, 4}, 0.25);
  EXPECT_DOUBLE_EQ(path_prob(uniform, {0, 3}), 1.0 / 16.0);
  Tensor<double> onehot({3, 3});
  onehot.at(0, kA) = onehot.at(1, kBlank) = onehot.at(2, kB) = 1.0;
  EXPECT_EQ(path_prob(onehot, {kA, kBlank, kB}), 1.0);
  EXPECT_EQ(path_prob(onehot, {kA, kA, kB}), 0.0);
  EXPECT_THROW(path_prob(onehot, {kA, kB}), ArgumentError);
}

TEST(PathProb, SumsToOneOverAllPaths) {
  Prng rng(13);
  for (std::size_t frames = 1; frames <= 5; ++frames) {
    for (std::size_t n = 2; n <= 4; ++n) {
      const auto y = softmax_rows(random_logits(rng, frames, n));
      double total = 0.0;
      for_each_path(y, [&](const Path&, double p) { total += p; });
      EXPECT_NEAR(total, 1.0, 1e-10) << "T=" << frames << " n=" << n;
    }
  }
}

TEST(Bruteforce, HandEnumeratedCases) {
  Prng rng(14);
  const auto y = softmax_rows(random_logits(rng, 2, 3));
  EXPECT_NEAR(label_prob_bruteforce(y, {kA}),
              y.at(0, kA) * y.at(1, kA) + y.at(0, kA) * y.at(1, kBlank) +
                  y.at(0, kBlank) * y.at(1, kA),
              1e-15);
  const auto y1 = softmax_rows(random_logits(rng, 1, 3));
  EXPECT_DOUBLE_EQ(label_prob_bruteforce(y1, {kB}), y1.at(0, kB));
  // "a a" needs a blank between the two a's: three frames at least.
  EXPECT_EQ(label_prob_bruteforce(y, {kA, kA}), 0.0);
}

TEST(Bruteforce, RefusesHugeEnumerations) {
  Tensor<double> y({12, 4}, 0.25);  // 4^12 > 1e7
  EXPECT_THROW(label_prob_bruteforce(y, {0}), ResourceError);
}

TEST(CtcLoss, AgreesWithBruteforce) {
  Prng rng(15);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t frames = 1 + rng.index(6), n = 2 + rng.index(3);
    const auto logits = random_logits(rng, frames, n);
    const auto y = softmax_rows(logits);
    const auto l = random_labels(rng, n, 3);
    const double brute = label_prob_bruteforce(y, l);
    const auto r = ctc_loss(y, l);
    const double p = r.feasible ? std::exp(-r.loss) : 0.0;
    EXPECT_NEAR(p, brute, 1e-9);
    EXPECT_EQ(r.feasible, brute > 0.0);
    const auto r2 = ctc_loss_from_logits(logits, l);
    EXPECT_EQ(r2.feasible, r.feasible);
    if (r.feasible) {
      EXPECT_NEAR(r2.loss, r.loss, 1e-10);
    }
  }
}

TEST(CtcLoss, PartitionOverAllLabelSequences) {
  Prng rng(16);
  for (std::size_t frames = 1; frames <= 4; ++frames) {
    for (std::size_t n = 2; n <= 4; ++n) {
      const auto y = softmax_rows(random_logits(rng, frames, n));
      std::vector<LabelSequence> seqs;
      LabelSequence cur;
      all_sequences(n - 1, frames, cur, seqs);
      double total = 0.0, total_fb = 0.0;
      for (const auto& l : seqs) {
        total += label_prob_bruteforce(y, l);
        const auto r = ctc_loss(y, l);
        if (r.feasible) total_fb += std::exp(r.log_prob);
      }
      EXPECT_NEAR(total, 1.0, 1e-9);
      EXPECT_NEAR(total_fb, 1.0, 1e-9);
    }
  }
}

TEST(CtcLoss, OneHotSingleFrameHasZeroLoss) {
  Tensor<double> y({1, 3});
  y.at(0, kA) = 1.0;
  EXPECT_EQ(ctc_loss(y, {kA}).loss, 0.0);
}

TEST(CtcLoss, InfeasibleAlignmentIsFlagged) {
  Prng rng(17);
  const auto y = softmax_rows(random_logits(rng, 2, 3));
  const auto r = ctc_loss(y, {kA, kA});
  EXPECT_FALSE(r.feasible);
  EXPECT_TRUE(std::isinf(r.loss));
  const auto r2 = ctc_loss(y, {kA, kB, kA});
  EXPECT_FALSE(r2.feasible);
}

TEST(CtcLoss, RejectsBlankInLabels) {
  Tensor<double> y({3, 3}, 1.0 / 3.0);
  EXPECT_THROW(ctc_loss(y, {kBlank}), ArgumentError);
  EXPECT_THROW(ctc_loss(y, {7}), ArgumentError);
}

TEST(CtcLoss, GradientMatchesFiniteDifferences) {
  Prng rng(18);
  int checked = 0;
  while (checked < 30) {
    const std::size_t frames = 1 + rng.index(7), n = 2 + rng.index(4);
    auto logits = random_logits(rng, frames, n, 1.0);
    const auto l = random_labels(rng, n, 3);
    const auto r = ctc_loss_from_logits(logits, l);
    if (!r.feasible) continue;
    logits.enable_grad();
    std::copy(r.grad_logits.data().begin(), r.grad_logits.data().end(),
              logits.grad().begin());
    const auto gc = grad_check([&] { return ctc_loss_from_logits(logits, l).loss; },
                               logits, 1e-6);
    EXPECT_LT(gc.max_rel_error, 1e-4) << "T=" << frames << " n=" << n;
    ++checked;
  }
}

TEST(CtcLoss, GradientRowsSumToZero) {
  Prng rng(19);
  const auto logits = random_logits(rng, 6, 4);
  const auto r = ctc_loss_from_logits(logits, {0, 1, 0});
  ASSERT_TRUE(r.feasible);
  for (std::size_t t = 0; t < 6; ++t) {
    const auto row = r.grad_logits.row(t);
    EXPECT_NEAR(std::accumulate(row.begin(), row.end(), 0.0), 0.0, 1e-12);
  }
}

TEST(CtcLoss, CovariantUnderLabelPermutation) {
  Prng rng(20);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t frames = 2 + rng.index(8), n = 4;
    const auto y = softmax_rows(random_logits(rng, frames, n));
    const auto l = random_labels(rng, n, 4);
    std::vector<std::size_t> perm{0, 1, 2};
    for (std::size_t i = 2; i > 0; --i) std::swap(perm[i], perm[rng.index(i + 1)]);
    Tensor<double> yp({frames, n});
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t k = 0; k < 3; ++k) yp.at(t, perm[k]) = y.at(t, k);
      yp.at(t, 3) = y.at(t, 3);
    }
    LabelSequence lp;
    for (auto k : l) lp.push_back(perm[k]);
    const auto a = ctc_loss(y, l), b = ctc_loss(yp, lp);
    ASSERT_EQ(a.feasible, b.feasible);
    if (a.feasible) {
      EXPECT_NEAR(a.loss, b.loss, 1e-12);
    }
  }
}

TEST(CtcLoss, StableForTinyProbabilities) {
  // Every step of the only alignment has probability 1e-300 or so; the
  // linear-space product would underflow, log space must not.
  const std::size_t frames = 40;
  Tensor<double> logits({frames, 3});
  for (std::size_t t = 0; t < frames; ++t) {
    logits.at(t, kA) = -690.0;  // softmax ~ 1e-300
    logits.at(t, kB) = 0.0;
    logits.at(t, kBlank) = 0.0;
  }
  LabelSequence l(frames / 2, kA);
  for (std::size_t i = 1; i < l.size(); i += 2) l[i] = kB;
  const auto r = ctc_loss_from_logits(logits, l);
  EXPECT_TRUE(r.feasible);
  EXPECT_TRUE(std::isfinite(r.loss));
  EXPECT_TRUE(r.grad_logits.all_finite());
}

TEST(GreedyDecode, OneHotPathCollapses) {
  const Path path{kA, kBlank, kA, kB, kBlank};
  Tensor<double> y({path.size(), 3});
  for (std::size_t t = 0; t < path.size(); ++t) y.at(t, path[t]) = 1.0;
  EXPECT_EQ(greedy_decode(y), (LabelSequence{kA, kA, kB}));
  EXPECT_EQ(greedy_decode(y), collapse(path, kBlank));
}

TEST(GreedyDecode, UniformTiesBreakToFirstLabel) {
  Tensor<double> y({5, 4}, 0.25);
  EXPECT_EQ(greedy_decode(y), (LabelSequence{0}));
}

TEST(GreedyDecode, RandomOneHotMatchesCollapse) {
  Prng rng(21);
  for (int trial = 0; trial < 500; ++trial) {
    Path path(1 + rng.index(10));
    for (auto& v : path) v = rng.index(4);
    Tensor<double> y({path.size(), 4});
    for (std::size_t t = 0; t < path.size(); ++t) y.at(t, path[t]) = 1.0;
    EXPECT_EQ(greedy_decode(y), collapse(path, 3));
  }
}

TEST(AlphabetTest, DefaultLayout) {
  Alphabet a;
  EXPECT_EQ(a.size(), 4u);
  EXPECT_EQ(a.blank(), 3u);
  EXPECT_EQ(a.name(0), "a");
  EXPECT_EQ(a.name(2), "rest");
  EXPECT_EQ(a.parse("a u rest"), (LabelSequence{0, 1, 2}));
  EXPECT_EQ(a.format({0, 1, 2}), "a u rest");
  EXPECT_THROW(a.parse("a x"), ArgumentError);
}

TEST(AlphabetTest, RejectsDuplicates) {
  EXPECT_THROW(Alphabet({"a", "a"}), ConfigError);
  EXPECT_THROW(Alphabet(std::vector<std::string>{}), ConfigError);
}

}  // namespace
}  // namespace eegctc

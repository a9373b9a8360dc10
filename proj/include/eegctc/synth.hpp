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
// Synthetic sentence-level signals built from per-class banks of fixed-size
// segments: draw a label sequence, stretch each label over a random number
// of segments, pick a random bank segment per stretched element, concatenate
// along time and smooth with a centered moving average.
#ifndef EEGCTC_SYNTH_HPP_
#define EEGCTC_SYNTH_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "eegctc/binary_io.hpp"
#include "eegctc/ctc.hpp"
#include "eegctc/errors.hpp"
#include "eegctc/prng.hpp"
#include "eegctc/tensor.hpp"

namespace eegctc {

struct SynthConfig {
  std::vector<std::string> labels{"a", "u", "rest"};
  std::size_t min_label_length = 2;
  std::size_t max_label_length = 8;
  std::size_t min_repeat = 1;
  std::size_t max_repeat = 4;
  std::size_t smooth_window = 5;
  std::size_t channels = 8;
  std::size_t segment_length = 50;
  std::size_t bank_size = 30;  // segments per class
  // Surrogate bank: one oscillation frequency (cycles per segment) per class.
  std::vector<double> frequencies{3.0, 7.0, 11.0};
  double amplitude = 1.0;
  double amplitude_jitter = 0.2;  // per class-and-channel gain in [1-j, 1+j]
  double noise_sigma = 0.3;
  bool random_phase = true;

  std::size_t class_count() const { return labels.size(); }

  void validate() const {
    if (labels.empty()) throw ConfigError("synth: no labels");
    if (min_label_length < 1 || min_label_length > max_label_length) {
      throw ConfigError("synth: need 1 <= min_label_length <= max_label_length");
    }
    if (min_repeat < 1 || min_repeat > max_repeat) {
      throw ConfigError("synth: need 1 <= min_repeat <= max_repeat");
    }
    if (smooth_window < 1 || smooth_window % 2 == 0) {
      throw ConfigError("synth: smooth_window must be odd and >= 1");
    }
    if (channels == 0 || segment_length == 0 || bank_size == 0) {
      throw ConfigError("synth: channels, segment_length and bank_size must be positive");
    }
    if (labels.size() < 2 && max_label_length > 1) {
      throw ConfigError("synth: adjacent labels must differ, which needs >= 2 classes");
    }
    if (!(noise_sigma >= 0.0) || !(amplitude_jitter >= 0.0)) {
      throw ConfigError("synth: noise_sigma and amplitude_jitter must be >= 0");
    }
  }
};

struct SegmentBank {
  std::vector<std::string> labels;
  std::vector<std::vector<Tensor<double>>> segments;  // [class][i], each C x S
  std::size_t channels = 0;
  std::size_t segment_length = 0;

  std::size_t class_count() const { return labels.size(); }

  // Throws ValidationError / InconsistentShapeError on a broken bank.
  void validate() const {
    if (labels.empty()) throw ValidationError("segment bank: empty class list");
    if (segments.size() != labels.size()) {
      throw ValidationError("segment bank: " + std::to_string(labels.size()) +
                            " labels but " + std::to_string(segments.size()) +
                            " segment lists");
    }
    if (channels == 0 || segment_length == 0) {
      throw InconsistentShapeError("segment bank: zero channel or segment extent");
    }
    for (std::size_t c = 0; c < segments.size(); ++c) {
      if (segments[c].empty()) {
        throw ValidationError("segment bank: class '" + labels[c] + "' has no segments");
      }
      for (const auto& seg : segments[c]) {
        if (seg.shape() != Shape{channels, segment_length}) {
          throw InconsistentShapeError("segment bank: class '" + labels[c] +
                                       "' holds a " + to_string(seg.shape()) +
                                       " segment, expected " +
                                       to_string(Shape{channels, segment_length}));
        }
      }
    }
  }

  friend bool operator==(const SegmentBank&, const SegmentBank&) = default;
};

struct SyntheticSample {
  Tensor<double> signal;  // C x (S * M)
  LabelSequence label;    // unextended
  std::vector<std::size_t> extended;  // M entries; empty when loaded from file
  std::uint64_t seed = 0;
};

// Class-conditioned sinusoid + Gaussian noise bank. Values are rounded to
// single precision so that a save/load round trip is exact.
inline SegmentBank make_surrogate_bank(const SynthConfig& cfg, Prng& rng) {
  cfg.validate();
  if (cfg.frequencies.size() != cfg.class_count()) {
    throw ConfigError("surrogate bank: " + std::to_string(cfg.frequencies.size()) +
                      " frequencies for " + std::to_string(cfg.class_count()) +
                      " classes");
  }
  for (std::size_t i = 0; i < cfg.frequencies.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (cfg.frequencies[i] == cfg.frequencies[j]) {
        throw ConfigError("surrogate bank: class frequencies must be distinct");
      }

  SegmentBank bank;
  bank.labels = cfg.labels;
  bank.channels = cfg.channels;
  bank.segment_length = cfg.segment_length;
  bank.segments.resize(cfg.class_count());
  const double s_len = static_cast<double>(cfg.segment_length);
  for (std::size_t k = 0; k < cfg.class_count(); ++k) {
    std::vector<double> gain(cfg.channels);
    for (auto& g : gain) {
      g = cfg.amplitude * (1.0 + cfg.amplitude_jitter * rng.uniform(-1.0, 1.0));
    }
    for (std::size_t i = 0; i < cfg.bank_size; ++i) {
      const double phase =
          cfg.random_phase ? rng.uniform(0.0, 2.0 * std::numbers::pi) : 0.0;
      Tensor<double> seg({cfg.channels, cfg.segment_length});
      for (std::size_t c = 0; c < cfg.channels; ++c) {
        for (std::size_t t = 0; t < cfg.segment_length; ++t) {
          const double wave = std::sin(2.0 * std::numbers::pi * cfg.frequencies[k] *
                                           static_cast<double>(t) / s_len +
                                       phase);
          const double noise = cfg.noise_sigma > 0.0 ? cfg.noise_sigma * rng.normal() : 0.0;
          seg.at(c, t) = static_cast<float>(gain[c] * wave + noise);
        }
      }
      bank.segments[k].push_back(std::move(seg));
    }
  }
  return bank;
}

// Length uniform in [min, max]; first element uniform, every later element
// uniform over the classes that differ from its predecessor.
inline LabelSequence gen_label_sequence(const SynthConfig& cfg, Prng& rng) {
  const auto length = static_cast<std::size_t>(rng.uniform_int(
      static_cast<std::int64_t>(cfg.min_label_length),
      static_cast<std::int64_t>(cfg.max_label_length)));
  const std::size_t k = cfg.class_count();
  LabelSequence seq;
  seq.reserve(length);
  for (std::size_t i = 0; i < length; ++i) {
    if (i == 0) {
      seq.push_back(rng.index(k));
    } else {
      std::size_t pick = rng.index(k - 1);
      if (pick >= seq.back()) ++pick;
      seq.push_back(pick);
    }
  }
  return seq;
}

inline std::vector<std::size_t> extend_labels(const LabelSequence& labels,
                                              const SynthConfig& cfg, Prng& rng) {
  std::vector<std::size_t> out;
  for (const auto l : labels) {
    const auto reps = rng.uniform_int(static_cast<std::int64_t>(cfg.min_repeat),
                                      static_cast<std::int64_t>(cfg.max_repeat));
    out.insert(out.end(), static_cast<std::size_t>(reps), l);
  }
  return out;
}

// Centered moving average along time, per channel; the window shrinks at
// the edges.
inline Tensor<double> smooth_rows(const Tensor<double>& signal, std::size_t window) {
  if (window <= 1) return signal;
  const std::size_t half = window / 2, len = signal.dim(1);
  Tensor<double> out(signal.shape());
  for (std::size_t c = 0; c < signal.dim(0); ++c) {
    const auto in = signal.row(c);
    auto o = out.row(c);
    for (std::size_t t = 0; t < len; ++t) {
      const std::size_t lo = t >= half ? t - half : 0;
      const std::size_t hi = std::min(len - 1, t + half);
      double sum = 0.0;
      for (std::size_t u = lo; u <= hi; ++u) sum += in[u];
      o[t] = sum / static_cast<double>(hi - lo + 1);
    }
  }
  return out;
}

inline Tensor<double> assemble_signal(const std::vector<std::size_t>& extended,
                                      const SegmentBank& bank, const SynthConfig& cfg,
                                      Prng& rng) {
  if (extended.empty()) throw ArgumentError("assemble_signal: empty extended sequence");
  const std::size_t s = bank.segment_length;
  Tensor<double> signal({bank.channels, s * extended.size()});
  for (std::size_t m = 0; m < extended.size(); ++m) {
    const std::size_t cls = extended[m];
    if (cls >= bank.class_count() || bank.segments[cls].empty()) {
      throw ConfigError("assemble_signal: bank has no segments for class " +
                        std::to_string(cls));
    }
    const auto& seg = bank.segments[cls][rng.index(bank.segments[cls].size())];
    for (std::size_t c = 0; c < bank.channels; ++c) {
      std::copy(seg.row(c).begin(), seg.row(c).end(), signal.row(c).begin() + m * s);
    }
  }
  return smooth_rows(signal, cfg.smooth_window);
}

inline SyntheticSample synth_sample(const SynthConfig& cfg, const SegmentBank& bank,
                                    std::uint64_t seed) {
  if (bank.class_count() < cfg.class_count()) {
    throw ConfigError("synth_sample: bank covers " + std::to_string(bank.class_count()) +
                      " classes, config needs " + std::to_string(cfg.class_count()));
  }
  Prng rng(seed);
  SyntheticSample sample;
  sample.seed = seed;
  sample.label = gen_label_sequence(cfg, rng);
  sample.extended = extend_labels(sample.label, cfg, rng);
  sample.signal = assemble_signal(sample.extended, bank, cfg, rng);
  return sample;
}

// Sample i uses derive_seed(master, stream, i), so generation order and
// worker count never change the result.
inline std::vector<SyntheticSample> make_dataset(const SynthConfig& cfg,
                                                 const SegmentBank& bank,
                                                 std::uint64_t master_seed,
                                                 std::uint64_t stream, std::size_t count) {
  std::vector<SyntheticSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(synth_sample(cfg, bank, derive_seed(master_seed, stream, i)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Containers (little-endian). Bank: "EEGB" v1, C, S, class count, then per
// class a label string, segment count and C x S float32 values per segment.
// Samples: "EEGS" v1, C, S, class count + label strings, sample count, then
// per sample label count + indices, M, and C x (S*M) float32 values.

inline constexpr std::uint32_t kContainerVersion = 1;

inline std::vector<std::uint8_t> encode_bank(const SegmentBank& bank) {
  bank.validate();
  io::Writer w;
  w.magic("EEGB");
  w.u32(kContainerVersion);
  w.u32(static_cast<std::uint32_t>(bank.channels));
  w.u32(static_cast<std::uint32_t>(bank.segment_length));
  w.u32(static_cast<std::uint32_t>(bank.class_count()));
  for (std::size_t k = 0; k < bank.class_count(); ++k) {
    w.str(bank.labels[k]);
    w.u32(static_cast<std::uint32_t>(bank.segments[k].size()));
    for (const auto& seg : bank.segments[k])
      for (const double v : seg.data()) w.f32(static_cast<float>(v));
  }
  return w.buffer();
}

inline SegmentBank decode_bank(std::vector<std::uint8_t> bytes, std::string source) {
  io::Reader r(std::move(bytes), std::move(source));
  r.magic("EEGB");
  const auto version = r.u32("version");
  if (version != kContainerVersion) {
    throw MalformedHeaderError(r.source() + ": unsupported bank version " +
                               std::to_string(version));
  }
  SegmentBank bank;
  bank.channels = r.u32("channel count");
  bank.segment_length = r.u32("segment length");
  const auto classes = r.u32("class count");
  if (classes == 0) throw ValidationError(r.source() + ": empty class list");
  if (bank.channels == 0 || bank.segment_length == 0) {
    throw InconsistentShapeError(r.source() + ": zero channel or segment extent");
  }
  const std::size_t seg_values = bank.channels * bank.segment_length;
  for (std::uint32_t k = 0; k < classes; ++k) {
    bank.labels.push_back(r.str("class label"));
    const auto count = r.u32("segment count");
    r.need(static_cast<std::size_t>(count) * seg_values * 4, "segment payload");
    std::vector<Tensor<double>> segs;
    segs.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
      Tensor<double> seg({bank.channels, bank.segment_length});
      for (auto& v : seg.data()) v = r.f32("segment value");
      segs.push_back(std::move(seg));
    }
    bank.segments.push_back(std::move(segs));
  }
  if (r.remaining() != 0) {
    throw InconsistentShapeError(r.source() + ": " + std::to_string(r.remaining()) +
                                 " trailing bytes after declared segments");
  }
  bank.validate();
  return bank;
}

inline void save_bank(const SegmentBank& bank, const std::filesystem::path& path) {
  io::write_file(path, encode_bank(bank));
}

inline SegmentBank load_bank(const std::filesystem::path& path) {
  return decode_bank(io::read_file(path), path.string());
}

struct SampleSet {
  std::vector<std::string> labels;
  std::size_t channels = 0;
  std::size_t segment_length = 0;
  std::vector<SyntheticSample> samples;
};

inline std::vector<std::uint8_t> encode_samples(const SampleSet& set) {
  io::Writer w;
  w.magic("EEGS");
  w.u32(kContainerVersion);
  w.u32(static_cast<std::uint32_t>(set.channels));
  w.u32(static_cast<std::uint32_t>(set.segment_length));
  w.u32(static_cast<std::uint32_t>(set.labels.size()));
  for (const auto& l : set.labels) w.str(l);
  w.u32(static_cast<std::uint32_t>(set.samples.size()));
  for (const auto& s : set.samples) {
    if (s.signal.rank() != 2 || s.signal.dim(0) != set.channels ||
        s.signal.dim(1) % set.segment_length != 0) {
      throw DimensionError("encode_samples: signal " + to_string(s.signal.shape()) +
                           " is not C x (S*M)");
    }
    w.u32(static_cast<std::uint32_t>(s.label.size()));
    for (const auto l : s.label) w.u32(static_cast<std::uint32_t>(l));
    w.u32(static_cast<std::uint32_t>(s.signal.dim(1) / set.segment_length));
    for (const double v : s.signal.data()) w.f32(static_cast<float>(v));
  }
  return w.buffer();
}

inline SampleSet decode_samples(std::vector<std::uint8_t> bytes, std::string source) {
  io::Reader r(std::move(bytes), std::move(source));
  r.magic("EEGS");
  const auto version = r.u32("version");
  if (version != kContainerVersion) {
    throw MalformedHeaderError(r.source() + ": unsupported sample file version " +
                               std::to_string(version));
  }
  SampleSet set;
  set.channels = r.u32("channel count");
  set.segment_length = r.u32("segment length");
  const auto classes = r.u32("class count");
  if (classes == 0) throw ValidationError(r.source() + ": empty class list");
  if (set.channels == 0 || set.segment_length == 0) {
    throw InconsistentShapeError(r.source() + ": zero channel or segment extent");
  }
  for (std::uint32_t k = 0; k < classes; ++k) set.labels.push_back(r.str("class label"));
  const auto count = r.u32("sample count");
  for (std::uint32_t i = 0; i < count; ++i) {
    SyntheticSample s;
    const auto len = r.u32("label count");
    r.need(static_cast<std::size_t>(len) * 4, "label indices");
    for (std::uint32_t j = 0; j < len; ++j) {
      const auto l = r.u32("label index");
      if (l >= classes) {
        throw ValidationError(r.source() + ": label index " + std::to_string(l) +
                              " out of range for " + std::to_string(classes) +
                              " classes");
      }
      s.label.push_back(l);
    }
    const auto segments = r.u32("segment count");
    if (segments == 0) throw InconsistentShapeError(r.source() + ": sample with no segments");
    const std::size_t steps = static_cast<std::size_t>(segments) * set.segment_length;
    r.need(set.channels * steps * 4, "signal payload");
    s.signal = Tensor<double>({set.channels, steps});
    for (auto& v : s.signal.data()) v = r.f32("signal value");
    set.samples.push_back(std::move(s));
  }
  if (r.remaining() != 0) {
    throw InconsistentShapeError(r.source() + ": " + std::to_string(r.remaining()) +
                                 " trailing bytes after declared samples");
  }
  return set;
}

inline void save_samples(const SampleSet& set, const std::filesystem::path& path) {
  io::write_file(path, encode_samples(set));
}

inline SampleSet load_samples(const std::filesystem::path& path) {
  return decode_samples(io::read_file(path), path.string());
}

}  // namespace eegctc

#endif  // EEGCTC_SYNTH_HPP_

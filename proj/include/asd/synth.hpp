// SPDX-License-Identifier: Apache-2.0
#pragma once

// Synthetic machine sounds for desk-scale experiments.
// Normal clips: a harmonic tone (fundamental + decaying harmonics, slight per-clip
// jitter) in white noise. Anomalous clips: the same machine detuned, or with
// impulsive clicks injected.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>

#include "asd/audio_io.hpp"
#include "asd/eval.hpp"
#include "asd/rng.hpp"

namespace asd {

enum class SyntheticKind { normal, detuned, clicks };

struct SyntheticParams {
  int sample_rate_hz = 16000;
  double duration_s = 10.0;
  int channels = 1;
  double fundamental_hz = 200.0;
  int harmonics = 8;
  double tone_amplitude = 0.3;
  double noise_stddev = 0.02;
  double fundamental_jitter = 0.01;   // relative, normal clips
  double detune_min = 0.08;           // relative fundamental shift of detuned clips
  double detune_max = 0.15;
  double clicks_per_second = 3.0;
  double click_amplitude = 0.5;
};

inline AudioClip synthesize_clip(SyntheticKind kind, std::uint64_t seed, const SyntheticParams& prm = {}) {
  Rng rng(seed);
  const auto n = static_cast<Eigen::Index>(std::llround(prm.duration_s * prm.sample_rate_hz));
  double f0 = prm.fundamental_hz * (1.0 + rng.uniform(-prm.fundamental_jitter, prm.fundamental_jitter));
  if (kind == SyntheticKind::detuned) {
    const double shift = rng.uniform(prm.detune_min, prm.detune_max);
    f0 = prm.fundamental_hz * (rng.bernoulli(0.5) ? 1.0 + shift : 1.0 - shift);
  }

  std::vector<double> amp(static_cast<std::size_t>(prm.harmonics)), phase(amp.size());
  double norm = 0.0;
  for (std::size_t h = 0; h < amp.size(); ++h) {
    amp[h] = (1.0 / static_cast<double>(h + 1)) * (1.0 + rng.uniform(-0.1, 0.1));
    phase[h] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    norm += amp[h];
  }

  VectorXd mono(n);
  const double dt = 1.0 / prm.sample_rate_hz;
  for (Eigen::Index t = 0; t < n; ++t) {
    double s = 0.0;
    for (std::size_t h = 0; h < amp.size(); ++h)
      s += amp[h] * std::sin(2.0 * std::numbers::pi * f0 * static_cast<double>(h + 1) * static_cast<double>(t) * dt + phase[h]);
    mono(t) = prm.tone_amplitude * s / norm + rng.normal(0.0, prm.noise_stddev);
  }

  if (kind == SyntheticKind::clicks) {
    const auto n_clicks = static_cast<int>(std::llround(prm.clicks_per_second * prm.duration_s));
    const auto click_len = static_cast<Eigen::Index>(0.004 * prm.sample_rate_hz);
    for (int c = 0; c < n_clicks; ++c) {
      const auto start = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(std::max<Eigen::Index>(n - click_len, 1))));
      for (Eigen::Index i = 0; i < click_len && start + i < n; ++i)
        mono(start + i) += prm.click_amplitude * std::exp(-static_cast<double>(i) / (0.2 * static_cast<double>(click_len))) *
                           rng.normal();
    }
  }

  AudioClip clip;
  clip.sample_rate_hz = prm.sample_rate_hz;
  clip.samples.resize(prm.channels, n);
  for (int ch = 0; ch < prm.channels; ++ch) {
    const double gain = prm.channels == 1 ? 1.0 : 1.0 + rng.uniform(-0.05, 0.05);
    for (Eigen::Index t = 0; t < n; ++t)
      clip.samples(ch, t) = static_cast<float>(std::clamp(gain * mono(t), -1.0, 32767.0 / 32768.0));
  }
  return clip;
}

/// Writes `n_normal` + `n_anomalous` PCM16 clips and `manifest.csv` under `dir`.
/// Anomalies alternate between detuned and clicking machines.
inline Manifest write_synthetic_dataset(const std::filesystem::path& dir, std::size_t n_normal,
                                        std::size_t n_anomalous, std::uint64_t seed,
                                        const SyntheticParams& prm = {}) {
  std::filesystem::create_directories(dir / "audio");
  Manifest m;
  auto emit = [&](const std::string& id, SyntheticKind kind, Label label, std::uint64_t clip_seed) {
    const auto rel = std::filesystem::path("audio") / (id + ".wav");
    write_wav(dir / rel, synthesize_clip(kind, clip_seed, prm));
    m.records.push_back({id, rel.string(), "fan", "id_00", label});
  };
  Rng seeds(seed);
  for (std::size_t i = 0; i < n_normal; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "normal_%05zu", i);
    emit(id, SyntheticKind::normal, Label::normal, seeds.next());
  }
  for (std::size_t i = 0; i < n_anomalous; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "anomaly_%05zu", i);
    emit(id, i % 2 == 0 ? SyntheticKind::detuned : SyntheticKind::clicks, Label::anomalous, seeds.next());
  }
  write_file(dir / "manifest.csv", encode_manifest(m));
  return m;
}

}  // namespace asd

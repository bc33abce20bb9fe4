// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "asd/dsp.hpp"
#include "asd/rng.hpp"

using namespace asd;

namespace {

VectorXd tone(Eigen::Index n, double hz, double sr, double amp = 1.0) {
  VectorXd x(n);
  for (Eigen::Index t = 0; t < n; ++t) x(t) = amp * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(t) / sr);
  return x;
}

VectorXd cosine(Eigen::Index n, double hz, double sr) {
  VectorXd x(n);
  for (Eigen::Index t = 0; t < n; ++t) x(t) = std::cos(2.0 * std::numbers::pi * hz * static_cast<double>(t) / sr);
  return x;
}

std::span<const double> view(const VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

// Naive DFT for cross-checking the FFT.
std::vector<std::complex<double>> dft(const std::vector<double>& x) {
  const auto n = x.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t t = 0; t < n; ++t)
      out[k] += x[t] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * t) / static_cast<double>(n));
  return out;
}

}  // namespace

TEST(Fft, MatchesNaiveDft) {
  Rng rng(3);
  for (std::size_t n : {1u, 2u, 8u, 64u, 256u}) {
    std::vector<double> x(n);
    for (auto& v : x) v = rng.uniform(-1.0, 1.0);
    const auto fast = FftPlan(n).forward_real(x);
    const auto slow = dft(x);
    ASSERT_EQ(fast.size(), n / 2 + 1);
    for (std::size_t k = 0; k < fast.size(); ++k) EXPECT_LT(std::abs(fast[k] - slow[k]), 1e-9) << n << " " << k;
  }
}

TEST(Fft, RejectsNonPowerOfTwo) { EXPECT_THROW(FftPlan(12), Error); }

TEST(Stft, TenSecondsAtHop512Gives513By313) {
  const VectorXd x = VectorXd::Zero(160000);
  const auto s = stft(view(x), {.n_fft = 1024, .hop_length = 512});
  EXPECT_EQ(s.rows(), 513);
  EXPECT_EQ(s.cols(), 313);
}

TEST(Stft, ZeroSignalGivesZeroMatrix) {
  const VectorXd x = VectorXd::Zero(5000);
  EXPECT_EQ(stft(view(x), {}).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Stft, BinCentredToneHasPeakAtItsBinInEveryFrame) {
  const double sr = 16000;
  for (Eigen::Index k : {5, 40, 200, 400}) {
    // A cosine whose last sample sits on a symmetry point survives reflect padding unbroken.
    const VectorXd x = cosine(20481, static_cast<double>(k) * sr / 1024.0, sr);
    const MatrixXd mag = stft(view(x), {}).cwiseAbs();
    for (Eigen::Index f = 0; f < mag.cols(); ++f) {
      Eigen::Index arg;
      mag.col(f).maxCoeff(&arg);
      ASSERT_EQ(arg, k) << "frame " << f;
    }
  }
}

TEST(Stft, EmptySignalIsDomainError) {
  try {
    stft(std::span<const double>{}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::domain);
  }
}

TEST(Stft, FrameCountFormulaHoldsForRandomLengths) {
  Rng rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    const auto len = 1 + static_cast<Eigen::Index>(rng.below(6000));
    const std::size_t hop = std::size_t{1} << (5 + rng.below(5));  // 32..512
    const StftConfig cfg{.n_fft = 512, .hop_length = hop};
    const VectorXd x = VectorXd::Zero(len);
    if (len <= 256) continue;  // reflect padding needs len > n_fft/2
    EXPECT_EQ(stft(view(x), cfg).cols(), 1 + len / static_cast<Eigen::Index>(hop));
    EXPECT_EQ(stft_frame_count(static_cast<std::size_t>(len), cfg), static_cast<std::size_t>(1 + len / static_cast<Eigen::Index>(hop)));
  }
}

TEST(PowerSpectrogram, SquaredMagnitude) {
  MatrixXcd m(1, 2);
  m << std::complex<double>(3, 4), std::complex<double>(0, 0);
  const auto p = power_spectrogram(m);
  EXPECT_EQ(p(0, 0), 25.0);
  EXPECT_EQ(p(0, 1), 0.0);
}

TEST(PowerSpectrogram, ParsevalPerFrame) {
  // Windowed frame energy equals the full-spectrum energy / n_fft.
  const std::size_t n = 1024;
  const VectorXd x = tone(4096, 1234.5, 16000.0);
  const StftConfig cfg{.n_fft = n, .hop_length = 512, .center = false};
  const auto power = power_spectrogram(stft(view(x), cfg));
  const auto w = hann_window(n);
  for (Eigen::Index f = 0; f < power.cols(); ++f) {
    double time_energy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = x(f * 512 + static_cast<Eigen::Index>(i)) * w[i];
      time_energy += v * v;
    }
    double spec_energy = power(0, f) + power(static_cast<Eigen::Index>(n / 2), f);
    for (std::size_t k = 1; k < n / 2; ++k) spec_energy += 2.0 * power(static_cast<Eigen::Index>(k), f);
    EXPECT_NEAR(spec_energy / static_cast<double>(n), time_energy, 1e-6 * time_energy);
  }
}

TEST(HannWindow, Periodic) {
  const auto w = hann_window(8);
  EXPECT_DOUBLE_EQ(w[0], 0.0);
  EXPECT_NEAR(w[4], 1.0, 1e-15);
  EXPECT_NEAR(w[2], 0.5, 1e-15);
  EXPECT_NEAR(w[6], 0.5, 1e-15);
}

TEST(MelScale, SlaneyBreakpointsAndInverse) {
  EXPECT_DOUBLE_EQ(hz_to_mel(600.0, MelScale::slaney), 9.0);
  EXPECT_DOUBLE_EQ(hz_to_mel(1000.0, MelScale::slaney), 15.0);
  EXPECT_NEAR(hz_to_mel(6400.0, MelScale::slaney), 42.0, 1e-12);
  EXPECT_NEAR(hz_to_mel(700.0, MelScale::htk), 2595.0 * std::log10(2.0), 1e-9);
  for (double hz : {0.0, 55.0, 999.0, 1000.0, 3000.0, 8000.0})
    for (auto s : {MelScale::slaney, MelScale::htk}) EXPECT_NEAR(mel_to_hz(hz_to_mel(hz, s), s), hz, 1e-9);
}

TEST(MelFilterbank, Shape64By513) {
  const auto fb = mel_filterbank(16000, 1024, {.n_mels = 64, .f_min = 0, .f_max = 8000.0});
  EXPECT_EQ(fb.rows(), 64);
  EXPECT_EQ(fb.cols(), 513);
}

TEST(MelFilterbank, RowsNonEmptyAndUnimodal) {
  const auto fb = mel_filterbank(16000, 1024, {.n_mels = 64});
  for (Eigen::Index m = 0; m < fb.rows(); ++m) {
    const auto row = fb.row(m);
    ASSERT_GT(row.maxCoeff(), 0.0) << m;
    int local_max = 0;
    bool rising = true;
    for (Eigen::Index k = 1; k < row.size(); ++k) {
      if (rising && row(k) < row(k - 1)) rising = false, ++local_max;
      else if (!rising && row(k) > row(k - 1)) FAIL() << "row " << m << " rises again at bin " << k;
    }
    EXPECT_LE(local_max, 1);
  }
}

TEST(MelFilterbank, UnnormalizedTrianglePeaksAtOne) {
  const auto fb = mel_filterbank_detail(16000, 1024, {.n_mels = 64, .normalization = MelNorm::none});
  for (std::size_t m = 0; m < 64; ++m) {
    EXPECT_DOUBLE_EQ(fb.triangle(m, fb.edges_hz[m + 1]), 1.0);
    EXPECT_LE(fb.weights.row(static_cast<Eigen::Index>(m)).maxCoeff(), 1.0);
    EXPECT_GT(fb.weights.row(static_cast<Eigen::Index>(m)).maxCoeff(), 0.0);
  }
}

TEST(MelFilterbank, ApexFrequenciesStrictlyIncrease) {
  const auto fb = mel_filterbank_detail(16000, 1024, {.n_mels = 128});
  for (std::size_t m = 1; m < 128; ++m) EXPECT_GT(fb.edges_hz[m + 1], fb.edges_hz[m]);
}

TEST(MelFilterbank, SlaneyAreaScaling) {
  const auto plain = mel_filterbank_detail(16000, 1024, {.n_mels = 64, .normalization = MelNorm::none});
  const auto area = mel_filterbank_detail(16000, 1024, {.n_mels = 64});
  for (Eigen::Index m = 0; m < 64; ++m) {
    const auto i = static_cast<std::size_t>(m);
    const double scale = 2.0 / (plain.edges_hz[i + 2] - plain.edges_hz[i]);
    EXPECT_LT((area.weights.row(m) - scale * plain.weights.row(m)).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(MelFilterbank, EmptyFilterIsConfigError) {
  try {
    mel_filterbank(16000, 64, {.n_mels = 128});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::config);
  }
}

TEST(LogMel, ZeroPowerHitsFloor) {
  const auto fb = mel_filterbank(16000, 1024, {.n_mels = 64});
  const auto db = log_mel_db(MatrixXd::Zero(513, 7), fb);
  EXPECT_EQ(db.minCoeff(), -100.0f);
  EXPECT_EQ(db.maxCoeff(), -100.0f);
}

TEST(LogMel, ShapeMismatchIsShapeError) {
  try {
    log_mel_db(MatrixXd::Zero(512, 2), MatrixXd::Zero(64, 513));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::shape);
  }
}

TEST(LogMel, MonotoneInPowerScale) {
  Rng rng(5);
  const auto fb = mel_filterbank(16000, 1024, {.n_mels = 64});
  MatrixXd p(513, 6);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = rng.uniform() * std::pow(10.0, rng.uniform(-14, 2));
  const auto base = log_mel_db(p, fb);
  for (double c : {1.0001, 2.0, 1e3}) {
    const auto scaled = log_mel_db(p * c, fb);
    EXPECT_GE((scaled - base).minCoeff(), 0.0f);
  }
}

TEST(Profiles, AeGives64By313) {
  const auto spec = compute_log_mel(tone(160000, 440.0, 16000.0, 0.5), profile_defaults(Profile::ae));
  EXPECT_EQ(spec.n_mels(), 64);
  EXPECT_EQ(spec.n_frames(), 313);
  EXPECT_EQ(spec.normalization, SpectrogramNorm::none);
}

TEST(Profiles, CnnGives128By1251MinMax) {
  const auto spec = compute_log_mel(tone(160000, 440.0, 16000.0, 0.5), profile_defaults(Profile::cnn));
  EXPECT_EQ(spec.n_mels(), 128);
  EXPECT_EQ(spec.n_frames(), 1251);
  EXPECT_FLOAT_EQ(spec.data.minCoeff(), 0.0f);
  EXPECT_FLOAT_EQ(spec.data.maxCoeff(), 1.0f);
}

TEST(Profiles, AstGives128By1000) {
  const auto spec = compute_log_mel(tone(160000, 440.0, 16000.0, 0.5), profile_defaults(Profile::ast));
  EXPECT_EQ(spec.n_mels(), 128);
  EXPECT_EQ(spec.n_frames(), 1000);
  EXPECT_EQ(spec.data(0, 999), -100.0f);  // padded tail
}

TEST(Profiles, NameRoundTripAndUnknownRejected) {
  for (auto p : {Profile::ae, Profile::cnn, Profile::ast}) EXPECT_EQ(parse_profile(to_string(p)), p);
  EXPECT_THROW(parse_profile("vit"), Error);
}

TEST(Normalize, ConstantSpectrogramBecomesZeros) {
  Spectrogram s;
  s.data = RowMatrixF::Constant(4, 5, -42.0f);
  auto a = s;
  normalize_minmax(a);
  EXPECT_EQ(a.data.cwiseAbs().maxCoeff(), 0.0f);
  normalize_standardize(s);
  EXPECT_EQ(s.data.cwiseAbs().maxCoeff(), 0.0f);
}

TEST(FrameWindows, AeSpectrogramGives309By320) {
  Spectrogram s;
  s.data = RowMatrixF::Random(64, 313);
  const auto w = frame_windows(s, 5);
  EXPECT_EQ(w.size(), 309);
  EXPECT_EQ(w.width(), 320);
  EXPECT_EQ(RowMatrixF(w.data.row(0).head(64)), RowMatrixF(s.data.col(0).transpose()));
}

TEST(FrameWindows, ContextOneIsIdentity) {
  Spectrogram s;
  s.data = RowMatrixF::Random(3, 7);
  const auto w = frame_windows(s, 1);
  EXPECT_EQ(w.size(), 7);
  EXPECT_EQ(RowMatrixF(w.data.transpose()), s.data);
}

TEST(FrameWindows, HandEnumeratedContextTwo) {
  Spectrogram s;
  s.data.resize(1, 3);
  s.data << 1, 2, 3;
  const auto w = frame_windows(s, 2);
  RowMatrixF expected(2, 2);
  expected << 1, 2, 2, 3;
  EXPECT_EQ(w.data, expected);
}

TEST(FrameWindows, TooFewFramesAndZeroContext) {
  Spectrogram s;
  s.data = RowMatrixF::Zero(2, 3);
  try {
    frame_windows(s, 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::insufficient_data);
  }
  try {
    frame_windows(s, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::config);
  }
}

TEST(SpectrogramFile, RoundTrip) {
  auto spec = compute_log_mel(tone(20000, 300.0, 16000.0), profile_defaults(Profile::ae));
  const auto meta = spectrogram_metadata(spec);
  const auto back = decode_spectrogram(encode_spectrogram(spec), meta);
  EXPECT_EQ(back.data, spec.data);
  // The sidecar stores resolved values, so defaults come back explicit.
  EXPECT_EQ(back.mel.n_mels, spec.mel.n_mels);
  EXPECT_EQ(back.mel.upper_hz(16000), 8000.0);
  EXPECT_EQ(back.stft.n_fft, spec.stft.n_fft);
  EXPECT_EQ(back.stft.hop_length, spec.stft.hop_length);
  EXPECT_EQ(back.stft.window_length(), spec.stft.window_length());
  EXPECT_EQ(back.stft.center, spec.stft.center);
  EXPECT_EQ(back.sample_rate_hz, 16000);
  auto bytes = encode_spectrogram(spec);
  bytes.resize(bytes.size() - 1);
  EXPECT_THROW(decode_spectrogram(bytes, meta), Error);
}

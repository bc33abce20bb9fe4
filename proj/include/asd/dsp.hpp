// SPDX-License-Identifier: Apache-2.0
#pragma once

// STFT, mel filterbank, log-mel spectrogram and sliding-window framing.
// All arithmetic is done in double precision; spectrograms are stored as float.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "asd/bytes.hpp"
#include "asd/error.hpp"
#include "asd/fft.hpp"
#include "asd/kv.hpp"
#include "asd/types.hpp"

namespace asd {

struct StftConfig {
  std::size_t n_fft = 1024;
  std::size_t hop_length = 512;
  std::size_t win_length = 0;  // 0 means n_fft; shorter windows are zero-padded to the frame centre
  bool center = true;          // reflect-pad by n_fft/2 on both sides

  std::size_t window_length() const noexcept { return win_length == 0 ? n_fft : win_length; }

  void validate() const {
    if (n_fft == 0 || !std::has_single_bit(n_fft)) fail(ErrorCode::config, "n_fft must be a power of two");
    if (hop_length == 0 || hop_length > n_fft) fail(ErrorCode::config, "hop_length must satisfy 0 < hop <= n_fft");
    if (window_length() > n_fft) fail(ErrorCode::config, "win_length must not exceed n_fft");
  }

  bool operator==(const StftConfig&) const = default;
};

enum class MelScale { slaney, htk };
enum class MelNorm { slaney_area, none };

struct MelConfig {
  std::size_t n_mels = 64;
  double f_min = 0.0;
  std::optional<double> f_max;  // defaults to Nyquist
  MelScale scale = MelScale::slaney;
  MelNorm normalization = MelNorm::slaney_area;

  double upper_hz(int sample_rate_hz) const { return f_max.value_or(sample_rate_hz / 2.0); }

  void validate(int sample_rate_hz) const {
    if (sample_rate_hz <= 0) fail(ErrorCode::config, "sample rate must be positive");
    if (n_mels < 1) fail(ErrorCode::config, "n_mels must be >= 1");
    const double hi = upper_hz(sample_rate_hz);
    if (!(f_min >= 0.0 && f_min < hi && hi <= sample_rate_hz / 2.0))
      fail(ErrorCode::config, "mel band must satisfy 0 <= f_min < f_max <= sample_rate/2");
  }

  bool operator==(const MelConfig&) const = default;
};

enum class SpectrogramNorm { none, minmax, standardize };

struct Spectrogram {
  RowMatrixF data;  // [n_mels x n_frames], dB
  MelConfig mel;
  StftConfig stft;
  int sample_rate_hz = 0;
  SpectrogramNorm normalization = SpectrogramNorm::none;

  Eigen::Index n_mels() const noexcept { return data.rows(); }
  Eigen::Index n_frames() const noexcept { return data.cols(); }
};

struct WindowBatch {
  RowMatrixF data;  // [n_windows x (n_mels * context)], frame-major within a row
  std::size_t context = 0;

  Eigen::Index size() const noexcept { return data.rows(); }
  Eigen::Index width() const noexcept { return data.cols(); }
};

inline constexpr double kPowerFloor = 1e-10;

// ---------------------------------------------------------------- mel scale

inline double hz_to_mel(double hz, MelScale scale) {
  if (scale == MelScale::htk) return 2595.0 * std::log10(1.0 + hz / 700.0);
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  constexpr double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  if (hz >= min_log_hz) return min_log_mel + std::log(hz / min_log_hz) / logstep;
  return hz / f_sp;
}

inline double mel_to_hz(double mel, MelScale scale) {
  if (scale == MelScale::htk) return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  constexpr double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  if (mel >= min_log_mel) return min_log_hz * std::exp(logstep * (mel - min_log_mel));
  return f_sp * mel;
}

// ---------------------------------------------------------------- window / stft

/// Periodic Hann window of length `n`.
inline std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  return w;
}

/// Analysis window zero-padded to n_fft with the taper centred in the frame.
inline std::vector<double> padded_window(const StftConfig& cfg) {
  const auto taper = hann_window(cfg.window_length());
  std::vector<double> w(cfg.n_fft, 0.0);
  const std::size_t offset = (cfg.n_fft - taper.size()) / 2;
  std::copy(taper.begin(), taper.end(), w.begin() + static_cast<std::ptrdiff_t>(offset));
  return w;
}

inline std::size_t stft_frame_count(std::size_t n_samples, const StftConfig& cfg) {
  if (cfg.center) return 1 + n_samples / cfg.hop_length;
  if (n_samples < cfg.n_fft) return 0;
  return 1 + (n_samples - cfg.n_fft) / cfg.hop_length;
}

namespace detail {

// numpy-style "reflect" index (edge sample not repeated), valid for any offset.
inline std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  std::ptrdiff_t m = i % period;
  if (m < 0) m += period;
  if (m >= static_cast<std::ptrdiff_t>(n)) m = period - m;
  return static_cast<std::size_t>(m);
}

}  // namespace detail

/// Short-time Fourier transform; result is [(n_fft/2 + 1) x n_frames].
inline MatrixXcd stft(std::span<const double> signal, const StftConfig& cfg) {
  cfg.validate();
  if (signal.empty()) fail(ErrorCode::domain, "stft: empty signal");
  const std::size_t n_frames = stft_frame_count(signal.size(), cfg);
  if (n_frames == 0) fail(ErrorCode::domain, "stft: signal shorter than n_fft with center=false");

  const FftPlan plan(cfg.n_fft);
  const auto window = padded_window(cfg);
  const std::size_t n_bins = cfg.n_fft / 2 + 1;
  const auto pad = cfg.center ? static_cast<std::ptrdiff_t>(cfg.n_fft / 2) : 0;

  MatrixXcd out(static_cast<Eigen::Index>(n_bins), static_cast<Eigen::Index>(n_frames));
  std::vector<std::complex<double>> frame(cfg.n_fft);
  for (std::size_t t = 0; t < n_frames; ++t) {
    const auto start = static_cast<std::ptrdiff_t>(t * cfg.hop_length) - pad;
    for (std::size_t i = 0; i < cfg.n_fft; ++i) {
      const std::size_t idx = detail::reflect_index(start + static_cast<std::ptrdiff_t>(i), signal.size());
      frame[i] = signal[idx] * window[i];
    }
    plan.forward(frame);
    for (std::size_t k = 0; k < n_bins; ++k) out(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t)) = frame[k];
  }
  return out;
}

inline MatrixXd power_spectrogram(const MatrixXcd& stft_out) { return stft_out.cwiseAbs2(); }

// ---------------------------------------------------------------- filterbank

struct MelFilterbank {
  MatrixXd weights;                // [n_mels x (n_fft/2 + 1)]
  std::vector<double> edges_hz;    // n_mels + 2 band edges; row m spans edges[m]..edges[m+2], apex edges[m+1]
  std::vector<double> bin_freqs;   // centre frequency of each FFT bin

  /// Continuous triangle response of filter `row` at `hz`, before area normalization.
  double triangle(std::size_t row, double hz) const {
    const double lo = edges_hz[row], mid = edges_hz[row + 1], hi = edges_hz[row + 2];
    const double rising = (hz - lo) / (mid - lo);
    const double falling = (hi - hz) / (hi - mid);
    return std::max(0.0, std::min(rising, falling));
  }
};

inline MelFilterbank mel_filterbank_detail(int sample_rate_hz, std::size_t n_fft, const MelConfig& cfg) {
  cfg.validate(sample_rate_hz);
  if (n_fft == 0 || !std::has_single_bit(n_fft)) fail(ErrorCode::config, "n_fft must be a power of two");
  const std::size_t n_bins = n_fft / 2 + 1;

  MelFilterbank fb;
  fb.bin_freqs.resize(n_bins);
  for (std::size_t k = 0; k < n_bins; ++k)
    fb.bin_freqs[k] = static_cast<double>(k) * sample_rate_hz / static_cast<double>(n_fft);

  const double mel_lo = hz_to_mel(cfg.f_min, cfg.scale);
  const double mel_hi = hz_to_mel(cfg.upper_hz(sample_rate_hz), cfg.scale);
  fb.edges_hz.resize(cfg.n_mels + 2);
  for (std::size_t i = 0; i < fb.edges_hz.size(); ++i) {
    const double mel = mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / static_cast<double>(cfg.n_mels + 1);
    fb.edges_hz[i] = mel_to_hz(mel, cfg.scale);
  }

  fb.weights = MatrixXd::Zero(static_cast<Eigen::Index>(cfg.n_mels), static_cast<Eigen::Index>(n_bins));
  for (std::size_t m = 0; m < cfg.n_mels; ++m) {
    const double scale =
        cfg.normalization == MelNorm::slaney_area ? 2.0 / (fb.edges_hz[m + 2] - fb.edges_hz[m]) : 1.0;
    bool any = false;
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double w = fb.triangle(m, fb.bin_freqs[k]);
      if (w > 0.0) any = true;
      fb.weights(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k)) = w * scale;
    }
    if (!any)
      fail(ErrorCode::config, "mel filter " + std::to_string(m) + " has no FFT bin in its support; reduce n_mels (" +
                                  std::to_string(cfg.n_mels) + ") or raise n_fft (" + std::to_string(n_fft) + ")");
  }
  return fb;
}

inline MatrixXd mel_filterbank(int sample_rate_hz, std::size_t n_fft, const MelConfig& cfg) {
  return mel_filterbank_detail(sample_rate_hz, n_fft, cfg).weights;
}

// ---------------------------------------------------------------- log-mel

/// 10 * log10(max(filterbank * power, 1e-10)); no peak reference, no top-dB clipping.
inline RowMatrixF log_mel_db(const MatrixXd& power_spec, const MatrixXd& filterbank) {
  if (filterbank.cols() != power_spec.rows())
    fail(ErrorCode::shape, "log_mel: filterbank has " + std::to_string(filterbank.cols()) +
                               " columns but power spectrogram has " + std::to_string(power_spec.rows()) + " bins");
  const MatrixXd mel = filterbank * power_spec;
  return mel.unaryExpr([](double v) { return 10.0 * std::log10(std::max(v, kPowerFloor)); }).cast<float>();
}

inline Spectrogram log_mel(const MatrixXd& power_spec, const MatrixXd& filterbank, const MelConfig& mel = {},
                           const StftConfig& stft_cfg = {}, int sample_rate_hz = 0) {
  Spectrogram spec;
  spec.data = log_mel_db(power_spec, filterbank);
  spec.mel = mel;
  spec.stft = stft_cfg;
  spec.sample_rate_hz = sample_rate_hz;
  return spec;
}

/// Per-clip rescaling to [0, 1]. A constant spectrogram maps to zeros.
inline void normalize_minmax(Spectrogram& spec) {
  const float lo = spec.data.minCoeff();
  const float hi = spec.data.maxCoeff();
  if (hi > lo)
    spec.data = (spec.data.array() - lo) / (hi - lo);
  else
    spec.data.setZero();
  spec.normalization = SpectrogramNorm::minmax;
}

/// Per-clip zero mean / unit variance.
inline void normalize_standardize(Spectrogram& spec) {
  const double mean = spec.data.cast<double>().mean();
  const double var = (spec.data.cast<double>().array() - mean).square().mean();
  const double sd = std::sqrt(var);
  if (sd > 0.0)
    spec.data = ((spec.data.cast<double>().array() - mean) / sd).cast<float>();
  else
    spec.data.setZero();
  spec.normalization = SpectrogramNorm::standardize;
}

/// Pads (with the dB floor) or truncates the time axis to exactly `frames` columns.
inline void fit_frames(Spectrogram& spec, Eigen::Index frames) {
  if (spec.n_frames() == frames) return;
  RowMatrixF resized(spec.n_mels(), frames);
  resized.setConstant(static_cast<float>(10.0 * std::log10(kPowerFloor)));
  const Eigen::Index keep = std::min(frames, spec.n_frames());
  resized.leftCols(keep) = spec.data.leftCols(keep);
  spec.data = std::move(resized);
}

// ---------------------------------------------------------------- framing

inline WindowBatch frame_windows(const Spectrogram& spec, std::size_t context) {
  if (context < 1) fail(ErrorCode::config, "frame_windows: context must be >= 1");
  const auto ctx = static_cast<Eigen::Index>(context);
  if (spec.n_frames() < ctx)
    fail(ErrorCode::insufficient_data, "frame_windows: " + std::to_string(spec.n_frames()) +
                                           " frames is fewer than context " + std::to_string(context));
  const Eigen::Index n_mels = spec.n_mels();
  const Eigen::Index n_windows = spec.n_frames() - ctx + 1;
  WindowBatch batch;
  batch.context = context;
  batch.data.resize(n_windows, n_mels * ctx);
  for (Eigen::Index i = 0; i < n_windows; ++i)
    for (Eigen::Index j = 0; j < ctx; ++j)
      batch.data.row(i).segment(j * n_mels, n_mels) = spec.data.col(i + j).transpose();
  return batch;
}

// ---------------------------------------------------------------- profiles

enum class Profile { ae, cnn, ast };

inline std::string_view to_string(Profile p) {
  switch (p) {
    case Profile::ae: return "ae";
    case Profile::cnn: return "cnn";
    case Profile::ast: return "ast";
  }
  return "?";
}

inline Profile parse_profile(std::string_view name) {
  if (name == "ae") return Profile::ae;
  if (name == "cnn") return Profile::cnn;
  if (name == "ast") return Profile::ast;
  fail(ErrorCode::config, "unknown preprocessing profile '" + std::string(name) + "' (expected ae|cnn|ast)");
}

struct PreprocessProfile {
  Profile id = Profile::ae;
  int sample_rate_hz = 16000;
  StftConfig stft;
  MelConfig mel;
  std::size_t context = 5;
  std::optional<Eigen::Index> target_frames;
  SpectrogramNorm normalization = SpectrogramNorm::none;
};

/// Preprocessing parameter sets for the three model paths.
///   ae:  n_fft 1024, hop 512, 64 mels, 5-frame context  -> 64 x 313 for 10 s at 16 kHz
///   cnn: n_fft 1024, hop 128, 128 mels, min-max scaled   -> 128 x 1251
///   ast: 25 ms Hann in a 512-point FFT, hop 160, 128 mels, uncentred, fitted to 1000 frames
inline PreprocessProfile profile_defaults(Profile profile) {
  PreprocessProfile p;
  p.id = profile;
  switch (profile) {
    case Profile::ae:
      p.stft = {.n_fft = 1024, .hop_length = 512, .win_length = 0, .center = true};
      p.mel.n_mels = 64;
      break;
    case Profile::cnn:
      p.stft = {.n_fft = 1024, .hop_length = 128, .win_length = 0, .center = true};
      p.mel.n_mels = 128;
      p.normalization = SpectrogramNorm::minmax;
      break;
    case Profile::ast:
      p.stft = {.n_fft = 512, .hop_length = 160, .win_length = 400, .center = false};
      p.mel.n_mels = 128;
      p.target_frames = 1000;
      break;
  }
  return p;
}

inline Spectrogram compute_log_mel(std::span<const double> signal, const PreprocessProfile& profile) {
  const auto power = power_spectrogram(stft(signal, profile.stft));
  const auto fb = mel_filterbank(profile.sample_rate_hz, profile.stft.n_fft, profile.mel);
  Spectrogram spec = log_mel(power, fb, profile.mel, profile.stft, profile.sample_rate_hz);
  if (profile.target_frames) fit_frames(spec, *profile.target_frames);
  switch (profile.normalization) {
    case SpectrogramNorm::none: break;
    case SpectrogramNorm::minmax: normalize_minmax(spec); break;
    case SpectrogramNorm::standardize: normalize_standardize(spec); break;
  }
  return spec;
}

inline Spectrogram compute_log_mel(const VectorXd& signal, const PreprocessProfile& profile) {
  return compute_log_mel(std::span<const double>(signal.data(), static_cast<std::size_t>(signal.size())), profile);
}

// ---------------------------------------------------------------- persistence

inline constexpr std::string_view kSpectrogramMagic = "ASDSPEC1";

inline std::string_view to_string(SpectrogramNorm n) {
  switch (n) {
    case SpectrogramNorm::none: return "none";
    case SpectrogramNorm::minmax: return "minmax";
    case SpectrogramNorm::standardize: return "standardize";
  }
  return "?";
}

inline SpectrogramNorm parse_spectrogram_norm(std::string_view s) {
  if (s == "none") return SpectrogramNorm::none;
  if (s == "minmax") return SpectrogramNorm::minmax;
  if (s == "standardize") return SpectrogramNorm::standardize;
  fail(ErrorCode::format, "unknown spectrogram normalization '" + std::string(s) + "'");
}

inline Metadata spectrogram_metadata(const Spectrogram& spec) {
  Metadata m;
  m.set("kind", "spectrogram");
  m.set("rows", static_cast<std::int64_t>(spec.n_mels()));
  m.set("cols", static_cast<std::int64_t>(spec.n_frames()));
  m.set("sample_rate_hz", spec.sample_rate_hz);
  m.set("n_fft", static_cast<std::int64_t>(spec.stft.n_fft));
  m.set("hop_length", static_cast<std::int64_t>(spec.stft.hop_length));
  m.set("win_length", static_cast<std::int64_t>(spec.stft.window_length()));
  m.set("center", spec.stft.center);
  m.set("n_mels", static_cast<std::int64_t>(spec.mel.n_mels));
  m.set("f_min", spec.mel.f_min);
  m.set("f_max", spec.mel.upper_hz(spec.sample_rate_hz > 0 ? spec.sample_rate_hz : 16000));
  m.set("mel_scale", spec.mel.scale == MelScale::slaney ? "slaney" : "htk");
  m.set("mel_norm", spec.mel.normalization == MelNorm::slaney_area ? "slaney" : "none");
  m.set("normalization", std::string(to_string(spec.normalization)));
  return m;
}

/// Binary body: magic, u32 rows, u32 cols, row-major float32.
inline std::string encode_spectrogram(const Spectrogram& spec) {
  ByteWriter w;
  w.put_bytes(kSpectrogramMagic);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(spec.n_mels()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(spec.n_frames()));
  w.put_span(std::span<const float>(spec.data.data(), static_cast<std::size_t>(spec.data.size())));
  return std::move(w).bytes();
}

inline Spectrogram decode_spectrogram(std::string_view bytes, const Metadata& meta) {
  ByteReader r(bytes, "spectrogram");
  r.expect_magic(kSpectrogramMagic);
  const auto rows = r.get<std::uint32_t>();
  const auto cols = r.get<std::uint32_t>();
  Spectrogram spec;
  spec.data.resize(rows, cols);
  r.get_span(std::span<float>(spec.data.data(), static_cast<std::size_t>(spec.data.size())));
  if (r.remaining() != 0) fail(ErrorCode::format, "spectrogram: trailing bytes");
  if (meta.contains("rows") && (meta.get_int("rows") != rows || meta.get_int("cols") != cols))
    fail(ErrorCode::format, "spectrogram: sidecar dims disagree with container");
  if (meta.contains("sample_rate_hz")) {
    spec.sample_rate_hz = static_cast<int>(meta.get_int("sample_rate_hz"));
    spec.stft.n_fft = static_cast<std::size_t>(meta.get_int("n_fft"));
    spec.stft.hop_length = static_cast<std::size_t>(meta.get_int("hop_length"));
    spec.stft.win_length = static_cast<std::size_t>(meta.get_int("win_length"));
    spec.stft.center = meta.get_bool("center");
    spec.mel.n_mels = static_cast<std::size_t>(meta.get_int("n_mels"));
    spec.mel.f_min = meta.get_double("f_min");
    spec.mel.f_max = meta.get_double("f_max");
    spec.mel.scale = meta.get("mel_scale") == "htk" ? MelScale::htk : MelScale::slaney;
    spec.mel.normalization = meta.get("mel_norm") == "none" ? MelNorm::none : MelNorm::slaney_area;
    spec.normalization = parse_spectrogram_norm(meta.get_or("normalization", "none"));
  }
  return spec;
}

/// Writes `<path>` (binary) and `<path>.meta` (sidecar).
inline void write_spectrogram(const std::filesystem::path& path, const Spectrogram& spec) {
  write_file(path, encode_spectrogram(spec));
  write_file(path.string() + ".meta", spectrogram_metadata(spec).serialize());
}

inline Spectrogram read_spectrogram(const std::filesystem::path& path) {
  const auto meta_path = std::filesystem::path(path.string() + ".meta");
  const Metadata meta = std::filesystem::exists(meta_path) ? Metadata::parse(read_file(meta_path)) : Metadata{};
  return decode_spectrogram(read_file(path), meta);
}

}  // namespace asd

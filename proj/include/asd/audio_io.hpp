// SPDX-License-Identifier: Apache-2.0
#pragma once

// RIFF/WAVE decoding (PCM16 and float32) and channel averaging.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "asd/bytes.hpp"
#include "asd/error.hpp"
#include "asd/types.hpp"

namespace asd {

struct AudioClip {
  RowMatrixF samples;  // [channels x n_samples], amplitudes in [-1, 1]
  int sample_rate_hz = 0;
  std::string source_path;

  Eigen::Index channels() const noexcept { return samples.rows(); }
  Eigen::Index frames() const noexcept { return samples.cols(); }
};

enum class WavEncoding { pcm16, float32 };

namespace detail {

constexpr std::uint16_t kWavePcm = 0x0001;
constexpr std::uint16_t kWaveFloat = 0x0003;
constexpr std::uint16_t kWaveExtensible = 0xFFFE;

struct WavFormat {
  std::uint16_t tag = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t block_align = 0;
  std::uint16_t bits = 0;
};

inline WavFormat parse_fmt_chunk(std::string_view body) {
  if (body.size() < 16) fail(ErrorCode::format, "wav: fmt chunk shorter than 16 bytes");
  ByteReader r(body, "wav fmt");
  WavFormat f;
  f.tag = r.get<std::uint16_t>();
  f.channels = r.get<std::uint16_t>();
  f.sample_rate = r.get<std::uint32_t>();
  r.get<std::uint32_t>();  // byte rate
  f.block_align = r.get<std::uint16_t>();
  f.bits = r.get<std::uint16_t>();
  if (f.tag == kWaveExtensible) {
    // cbSize, valid bits, channel mask, then the sub-format GUID whose first two bytes hold the tag.
    if (body.size() < 40) fail(ErrorCode::format, "wav: truncated WAVE_FORMAT_EXTENSIBLE header");
    r.get<std::uint16_t>();
    r.get<std::uint16_t>();
    r.get<std::uint32_t>();
    f.tag = r.get<std::uint16_t>();
  }
  return f;
}

}  // namespace detail

/// Decodes a RIFF/WAVE byte buffer. Unknown chunks are skipped.
inline AudioClip decode_wav(std::string_view bytes, std::string source_path = {}) {
  if (bytes.size() < 12 || bytes.substr(0, 4) != "RIFF" || bytes.substr(8, 4) != "WAVE")
    fail(ErrorCode::format, "wav: missing RIFF/WAVE header");

  std::optional<detail::WavFormat> format;
  std::optional<std::string_view> data;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const auto id = bytes.substr(pos, 4);
    std::uint32_t size;
    std::memcpy(&size, bytes.data() + pos + 4, 4);
    const std::size_t body = pos + 8;
    const std::size_t available = bytes.size() - body;
    if (id == "data") {
      if (size > available) fail(ErrorCode::truncated, "wav: data chunk declares " + std::to_string(size) +
                                                           " bytes, only " + std::to_string(available) + " present");
      data = bytes.substr(body, size);
    } else {
      if (size > available) fail(ErrorCode::format, "wav: chunk '" + std::string(id) + "' overruns file");
      if (id == "fmt ") format = detail::parse_fmt_chunk(bytes.substr(body, size));
    }
    pos = body + size + (size & 1u);
  }
  if (!format) fail(ErrorCode::format, "wav: no fmt chunk");
  if (!data) fail(ErrorCode::format, "wav: no data chunk");
  if (format->channels == 0) fail(ErrorCode::format, "wav: zero channels");
  if (format->sample_rate == 0) fail(ErrorCode::format, "wav: zero sample rate");

  const bool pcm16 = format->tag == detail::kWavePcm && format->bits == 16;
  const bool f32 = format->tag == detail::kWaveFloat && format->bits == 32;
  if (!pcm16 && !f32)
    fail(ErrorCode::unsupported_codec, "wav: unsupported encoding (format tag " + std::to_string(format->tag) +
                                           ", " + std::to_string(format->bits) + " bits)");

  const std::size_t bytes_per_sample = format->bits / 8;
  const std::size_t frame_bytes = bytes_per_sample * format->channels;
  if (format->block_align != frame_bytes) fail(ErrorCode::format, "wav: block_align inconsistent with channels/bits");
  if (data->size() % frame_bytes != 0) fail(ErrorCode::truncated, "wav: data chunk ends mid-frame");

  const std::size_t n_frames = data->size() / frame_bytes;
  AudioClip clip;
  clip.sample_rate_hz = static_cast<int>(format->sample_rate);
  clip.source_path = std::move(source_path);
  clip.samples.resize(format->channels, static_cast<Eigen::Index>(n_frames));

  const char* p = data->data();
  for (std::size_t t = 0; t < n_frames; ++t) {
    for (std::size_t c = 0; c < format->channels; ++c, p += bytes_per_sample) {
      float value;
      if (pcm16) {
        std::int16_t s;
        std::memcpy(&s, p, 2);
        value = static_cast<float>(s) / 32768.0f;
      } else {
        std::memcpy(&value, p, 4);
      }
      clip.samples(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t)) = value;
    }
  }
  return clip;
}

inline AudioClip read_wav(const std::filesystem::path& path) { return decode_wav(read_file(path), path.string()); }

/// Encodes a clip as a canonical 44-byte-header WAV. PCM16 quantizes by round(x * 32768),
/// clamped to the int16 range, so decode(encode(x)) is within 1/32768 of x.
inline std::string encode_wav(const AudioClip& clip, WavEncoding encoding = WavEncoding::pcm16) {
  if (clip.channels() < 1 || clip.sample_rate_hz <= 0) fail(ErrorCode::format, "wav: invalid clip to encode");
  const std::uint16_t channels = static_cast<std::uint16_t>(clip.channels());
  const std::uint16_t bits = encoding == WavEncoding::pcm16 ? 16 : 32;
  const std::uint16_t block_align = channels * bits / 8;
  const auto data_bytes = static_cast<std::uint32_t>(block_align * clip.frames());

  ByteWriter w;
  w.put_bytes("RIFF");
  w.put<std::uint32_t>(36 + data_bytes);
  w.put_bytes("WAVE");
  w.put_bytes("fmt ");
  w.put<std::uint32_t>(16);
  w.put<std::uint16_t>(encoding == WavEncoding::pcm16 ? detail::kWavePcm : detail::kWaveFloat);
  w.put<std::uint16_t>(channels);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(clip.sample_rate_hz));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(clip.sample_rate_hz) * block_align);
  w.put<std::uint16_t>(block_align);
  w.put<std::uint16_t>(bits);
  w.put_bytes("data");
  w.put<std::uint32_t>(data_bytes);
  for (Eigen::Index t = 0; t < clip.frames(); ++t) {
    for (Eigen::Index c = 0; c < clip.channels(); ++c) {
      const float x = clip.samples(c, t);
      if (encoding == WavEncoding::pcm16) {
        const double q = std::clamp(std::round(static_cast<double>(x) * 32768.0), -32768.0, 32767.0);
        w.put<std::int16_t>(static_cast<std::int16_t>(q));
      } else {
        w.put<float>(x);
      }
    }
  }
  return std::move(w).bytes();
}

inline void write_wav(const std::filesystem::path& path, const AudioClip& clip,
                      WavEncoding encoding = WavEncoding::pcm16) {
  write_file(path, encode_wav(clip, encoding));
}

/// Element-wise mean across channels.
inline VectorXd downmix(const AudioClip& clip) {
  if (clip.channels() < 1) fail(ErrorCode::shape, "downmix: clip has no channels");
  return clip.samples.cast<double>().colwise().mean().transpose();
}

/// Rejects clips whose rate differs from the pipeline rate; no resampling is performed.
inline void require_sample_rate(const AudioClip& clip, int expected_hz) {
  if (clip.sample_rate_hz != expected_hz)
    fail(ErrorCode::sample_rate_mismatch, "clip " + clip.source_path + " has sample rate " +
                                              std::to_string(clip.sample_rate_hz) + " Hz, pipeline expects " +
                                              std::to_string(expected_hz) + " Hz");
}

}  // namespace asd

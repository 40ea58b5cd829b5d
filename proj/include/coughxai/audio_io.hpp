#pragma once

// WAV decoding, anti-aliased integer decimation and fixed-length chunking.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "coughxai/errors.hpp"
#include "coughxai/grid.hpp"

namespace coughxai {

/// Mono signal with samples in [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  int sample_rate_hz = 0;
};

namespace detail {

inline std::uint16_t read_u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

inline std::uint32_t read_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

inline bool tag_is(std::span<const std::uint8_t> b, std::size_t at, const char* tag) {
  return std::memcmp(b.data() + at, tag, 4) == 0;
}

}  // namespace detail

/// Decodes a RIFF/WAVE container holding 16-bit PCM with one or two channels.
/// Stereo is averaged to mono. Samples are scaled by 1/32768.
inline AudioClip decode_wav(std::span<const std::uint8_t> bytes) {
  using detail::read_u16;
  using detail::read_u32;
  if (bytes.size() < 12 || !detail::tag_is(bytes, 0, "RIFF") || !detail::tag_is(bytes, 8, "WAVE")) {
    throw FormatError("not a RIFF/WAVE container");
  }

  bool have_fmt = false;
  std::uint16_t channels = 0;
  std::uint32_t rate = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t chunk_size = read_u32(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (detail::tag_is(bytes, pos, "fmt ")) {
      if (chunk_size < 16 || body + chunk_size > bytes.size()) throw FormatError("truncated fmt chunk");
      const std::uint16_t format = read_u16(bytes, body);
      channels = read_u16(bytes, body + 2);
      rate = read_u32(bytes, body + 4);
      const std::uint16_t block_align = read_u16(bytes, body + 12);
      const std::uint16_t bits = read_u16(bytes, body + 14);
      if (format != 1) {
        throw UnsupportedFormatError("unsupported WAV encoding (format tag " + std::to_string(format) +
                                     "); only PCM is decoded");
      }
      if (bits != 16) {
        throw UnsupportedFormatError("unsupported bit depth " + std::to_string(bits) + "; only 16-bit PCM");
      }
      if (channels != 1 && channels != 2) {
        throw UnsupportedFormatError("unsupported channel count " + std::to_string(channels));
      }
      if (rate == 0) throw FormatError("WAV declares a zero sample rate");
      if (block_align != channels * 2) throw FormatError("inconsistent WAV block alignment");
      have_fmt = true;
    } else if (detail::tag_is(bytes, pos, "data")) {
      if (!have_fmt) throw FormatError("data chunk precedes fmt chunk");
      if (body + chunk_size > bytes.size()) throw FormatError("truncated data chunk");
      const std::size_t frame_bytes = 2u * channels;
      if (chunk_size % frame_bytes != 0) throw FormatError("data chunk is not a whole number of frames");
      const std::size_t frames = chunk_size / frame_bytes;
      AudioClip clip;
      clip.sample_rate_hz = static_cast<int>(rate);
      clip.samples.resize(frames);
      for (std::size_t i = 0; i < frames; ++i) {
        double acc = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
          const auto raw = static_cast<std::int16_t>(read_u16(bytes, body + (i * channels + c) * 2));
          acc += static_cast<double>(raw) / 32768.0;
        }
        clip.samples[i] = acc / channels;
      }
      return clip;
    }
    pos = body + chunk_size + (chunk_size & 1u);
  }
  throw FormatError(have_fmt ? "WAV has no data chunk" : "WAV has no fmt chunk");
}

/// Encodes interleaved 16-bit PCM into a canonical 44-byte-header WAV.
inline std::vector<std::uint8_t> encode_wav_pcm16(std::span<const std::int16_t> interleaved, int channels,
                                                  int sample_rate_hz) {
  if (channels < 1 || channels > 2) throw ArgumentError("channels must be 1 or 2");
  if (sample_rate_hz <= 0) throw ArgumentError("sample rate must be positive");
  if (interleaved.size() % static_cast<std::size_t>(channels) != 0) {
    throw ArgumentError("sample count is not a multiple of the channel count");
  }
  const auto data_bytes = static_cast<std::uint32_t>(interleaved.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  auto put_tag = [&](const char* t) { out.insert(out.end(), t, t + 4); };
  put_tag("RIFF");
  detail::put_u32(out, 36 + data_bytes);
  put_tag("WAVE");
  put_tag("fmt ");
  detail::put_u32(out, 16);
  detail::put_u16(out, 1);
  detail::put_u16(out, static_cast<std::uint16_t>(channels));
  detail::put_u32(out, static_cast<std::uint32_t>(sample_rate_hz));
  detail::put_u32(out, static_cast<std::uint32_t>(sample_rate_hz * channels * 2));
  detail::put_u16(out, static_cast<std::uint16_t>(channels * 2));
  detail::put_u16(out, 16);
  put_tag("data");
  detail::put_u32(out, data_bytes);
  for (std::int16_t s : interleaved) detail::put_u16(out, static_cast<std::uint16_t>(s));
  return out;
}

/// Quantizes [-1, 1] samples to 16-bit PCM (round to nearest, clipped).
inline std::vector<std::int16_t> quantize_pcm16(std::span<const double> samples) {
  std::vector<std::int16_t> pcm(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double v = std::nearbyint(samples[i] * 32768.0);
    pcm[i] = static_cast<std::int16_t>(std::clamp(v, -32768.0, 32767.0));
  }
  return pcm;
}

inline std::vector<std::uint8_t> encode_wav(const AudioClip& clip) {
  const auto pcm = quantize_pcm16(clip.samples);
  return encode_wav_pcm16(pcm, 1, clip.sample_rate_hz);
}

inline AudioClip read_wav_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open WAV file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_wav(bytes);
  } catch (const UnsupportedFormatError& e) {
    throw UnsupportedFormatError(path.string() + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline void write_wav_file(const std::filesystem::path& path, const AudioClip& clip) {
  const auto bytes = encode_wav(clip);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write WAV file " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

/// Anti-alias filter parameters used before keeping every factor-th sample.
struct DecimationConfig {
  int factor = kDecimationFactor;
  int taps = 64;
  /// Passband edge as a fraction of the output Nyquist frequency.
  double cutoff_ratio = 0.8;
};

/// Hamming-windowed sinc low-pass. `cutoff` is in cycles per input sample
/// (0 < cutoff < 0.5). Taps are normalized to unity DC gain.
inline std::vector<double> design_lowpass(int taps, double cutoff) {
  if (taps < 1) throw ArgumentError("filter needs at least one tap");
  if (!(cutoff > 0.0 && cutoff < 0.5)) throw ArgumentError("cutoff must lie in (0, 0.5) cycles/sample");
  std::vector<double> h(static_cast<std::size_t>(taps));
  const double centre = (taps - 1) / 2.0;
  for (int i = 0; i < taps; ++i) {
    const double t = i - centre;
    const double arg = 2.0 * cutoff * t;
    const double sinc = arg == 0.0 ? 1.0 : std::sin(std::numbers::pi * arg) / (std::numbers::pi * arg);
    const double window = taps == 1 ? 1.0 : 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (taps - 1));
    h[static_cast<std::size_t>(i)] = 2.0 * cutoff * sinc * window;
  }
  double sum = 0.0;
  for (double v : h) sum += v;
  for (double& v : h) v /= sum;
  return h;
}

inline std::vector<double> decimation_filter(const DecimationConfig& cfg) {
  if (cfg.factor < 1) throw ArgumentError("decimation factor must be >= 1");
  if (!(cfg.cutoff_ratio > 0.0 && cfg.cutoff_ratio <= 1.0)) throw ArgumentError("cutoff ratio must lie in (0, 1]");
  return design_lowpass(cfg.taps, cfg.cutoff_ratio * 0.5 / cfg.factor);
}

/// Low-pass filters (zero-padded causal convolution) then keeps samples 0, f, 2f, ...
/// Output length is ceil(n / factor); output rate is rate / factor.
inline AudioClip decimate(const AudioClip& clip, const DecimationConfig& cfg) {
  if (cfg.factor < 1) throw ArgumentError("decimation factor must be >= 1");
  if (clip.samples.empty()) throw ArgumentError("cannot decimate an empty clip");
  if (clip.sample_rate_hz <= 0 || clip.sample_rate_hz % cfg.factor != 0) {
    throw ArgumentError("sample rate " + std::to_string(clip.sample_rate_hz) + " Hz is not divisible by " +
                        std::to_string(cfg.factor));
  }
  AudioClip out;
  out.sample_rate_hz = clip.sample_rate_hz / cfg.factor;
  if (cfg.factor == 1) {
    out.samples = clip.samples;
    return out;
  }
  const auto h = decimation_filter(cfg);
  const std::size_t n = clip.samples.size();
  const auto f = static_cast<std::size_t>(cfg.factor);
  out.samples.resize((n + f - 1) / f);
  for (std::size_t m = 0; m < out.samples.size(); ++m) {
    const std::size_t t = m * f;
    double acc = 0.0;
    const std::size_t jmax = std::min(h.size() - 1, t);
    for (std::size_t j = 0; j <= jmax; ++j) acc += h[j] * clip.samples[t - j];
    out.samples[m] = acc;
  }
  return out;
}

inline AudioClip decimate(const AudioClip& clip, int factor) {
  DecimationConfig cfg;
  cfg.factor = factor;
  return decimate(clip, cfg);
}

/// Consecutive non-overlapping chunks; a trailing remainder shorter than a chunk is dropped.
inline std::vector<std::vector<double>> segment_chunks(std::span<const double> samples, std::size_t chunk_len) {
  if (chunk_len == 0) throw ArgumentError("chunk length must be positive");
  std::vector<std::vector<double>> chunks;
  const std::size_t count = samples.size() / chunk_len;
  chunks.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto first = samples.begin() + static_cast<std::ptrdiff_t>(i * chunk_len);
    chunks.emplace_back(first, first + static_cast<std::ptrdiff_t>(chunk_len));
  }
  return chunks;
}

}  // namespace coughxai

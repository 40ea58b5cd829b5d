#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "coughxai/audio_io.hpp"
#include "oracles/oracles.hpp"

using namespace coughxai;

namespace {

std::vector<std::uint8_t> mono_wav(std::vector<std::int16_t> pcm, int rate = 44100) {
  return encode_wav_pcm16(pcm, 1, rate);
}

double rms(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

TEST(DecodeWav, ScalesPcmBy32768) {
  const auto clip = decode_wav(mono_wav({0, 16384, -16384, 32767}, 8000));
  ASSERT_EQ(clip.samples.size(), 4u);
  EXPECT_EQ(clip.sample_rate_hz, 8000);
  EXPECT_EQ(clip.samples[0], 0.0);
  EXPECT_EQ(clip.samples[1], 0.5);
  EXPECT_EQ(clip.samples[2], -0.5);
  EXPECT_EQ(clip.samples[3], 32767.0 / 32768.0);
}

TEST(DecodeWav, TruncatedDataChunkIsFormatError) {
  auto bytes = mono_wav({1, 2, 3, 4, 5, 6});
  bytes.resize(bytes.size() - 3);
  EXPECT_THROW(decode_wav(bytes), FormatError);
}

TEST(DecodeWav, MissingRiffIsFormatError) {
  auto bytes = mono_wav({1, 2});
  bytes[0] = 'X';
  EXPECT_THROW(decode_wav(bytes), FormatError);
  EXPECT_THROW(decode_wav(std::vector<std::uint8_t>{}), FormatError);
}

TEST(DecodeWav, FloatEncodingIsUnsupported) {
  auto bytes = mono_wav({1, 2});
  bytes[20] = 3;  // format tag: IEEE float
  EXPECT_THROW(decode_wav(bytes), UnsupportedFormatError);
}

TEST(DecodeWav, EightBitIsUnsupported) {
  auto bytes = mono_wav({1, 2});
  bytes[34] = 8;
  EXPECT_THROW(decode_wav(bytes), UnsupportedFormatError);
}

TEST(DecodeWav, StereoIsAveraged) {
  std::vector<std::int16_t> pcm;
  const auto a = static_cast<std::int16_t>(std::lround(0.2 * 32768)), b = static_cast<std::int16_t>(std::lround(0.4 * 32768));
  for (int i = 0; i < 10; ++i) {
    pcm.push_back(a);
    pcm.push_back(b);
  }
  const auto clip = decode_wav(encode_wav_pcm16(pcm, 2, 44100));
  ASSERT_EQ(clip.samples.size(), 10u);
  for (double v : clip.samples) EXPECT_NEAR(v, 0.3, 1e-4);
  EXPECT_EQ(clip.samples[0], (a + b) / 2.0 / 32768.0);
}

TEST(DecodeWav, RoundTripIsExact) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::int16_t> pcm(1 + rng() % 500);
    for (auto& v : pcm) v = static_cast<std::int16_t>(static_cast<int>(rng() % 65536) - 32768);
    const auto clip = decode_wav(mono_wav(pcm));
    ASSERT_EQ(clip.samples.size(), pcm.size());
    for (std::size_t i = 0; i < pcm.size(); ++i) EXPECT_EQ(clip.samples[i], pcm[i] / 32768.0);
    const auto again = decode_wav(encode_wav(clip));
    EXPECT_EQ(again.samples, clip.samples);
    for (double v : clip.samples) {
      EXPECT_GE(v, -1.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Decimate, DcGainIsUnity) {
  const AudioClip clip{std::vector<double>(44100, 0.5), 44100};
  const auto out = decimate(clip, 5);
  EXPECT_EQ(out.sample_rate_hz, 8820);
  ASSERT_EQ(out.samples.size(), 8820u);
  const std::size_t warmup = 64 / 5 + 1;
  for (std::size_t i = warmup; i < out.samples.size(); ++i) ASSERT_NEAR(out.samples[i], 0.5, 1e-6) << i;
}

TEST(Decimate, LengthIsCeilOfInputOverFactor) {
  for (std::size_t n : {1u, 4u, 5u, 6u, 44101u}) {
    const AudioClip clip{std::vector<double>(n, 0.1), 44100};
    EXPECT_EQ(decimate(clip, 5).samples.size(), (n + 4) / 5) << n;
  }
}

TEST(Decimate, RejectsBadArguments) {
  const AudioClip clip{std::vector<double>(10, 0.1), 44100};
  EXPECT_THROW(decimate(clip, 0), ArgumentError);
  EXPECT_THROW(decimate(AudioClip{std::vector<double>(10, 0.1), 44101}, 5), ArgumentError);
  EXPECT_THROW(decimate(AudioClip{{}, 44100}, 5), ArgumentError);
}

TEST(Decimate, FactorOneIsIdentity) {
  const AudioClip clip{{0.1, -0.2, 0.3}, 8000};
  const auto out = decimate(clip, 1);
  EXPECT_EQ(out.samples, clip.samples);
  EXPECT_EQ(out.sample_rate_hz, 8000);
}

TEST(Decimate, FilterTapsSumToOne) {
  const auto taps = decimation_filter(DecimationConfig{});
  ASSERT_EQ(taps.size(), 64u);
  double s = 0.0;
  for (double t : taps) s += t;
  EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(Decimate, StopBandToneIsAttenuatedBy40dB) {
  const double f = 6000.0, fs = 44100.0;
  std::vector<double> x(44100);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.5 * std::sin(2.0 * std::numbers::pi * f * static_cast<double>(i) / fs);
  const auto out = decimate(AudioClip{x, 44100}, 5);
  const std::span<const double> interior(out.samples.data() + 20, out.samples.size() - 20);
  const double atten_db = 20.0 * std::log10(rms(interior) / rms(x));
  EXPECT_LE(atten_db, -40.0);

  // independent DTFT of the taps at the tone frequency predicts the measured gain
  const auto taps = decimation_filter(DecimationConfig{});
  std::complex<double> h = 0.0;
  for (std::size_t n = 0; n < taps.size(); ++n) {
    h += taps[n] * std::polar(1.0, -2.0 * std::numbers::pi * f / fs * static_cast<double>(n));
  }
  EXPECT_LE(20.0 * std::log10(std::abs(h)), -40.0);
  EXPECT_NEAR(rms(interior) / rms(x), std::abs(h), 0.05 * std::abs(h) + 1e-6);
}

TEST(Decimate, PassBandToneKeepsItsLevel) {
  const double f = 1000.0, fs = 44100.0;
  std::vector<double> x(44100);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(2.0 * std::numbers::pi * f * static_cast<double>(i) / fs);
  const auto out = decimate(AudioClip{x, 44100}, 5);
  const std::span<const double> interior(out.samples.data() + 20, out.samples.size() - 20);
  EXPECT_NEAR(rms(interior), std::sqrt(0.5), 0.02);
}

TEST(SegmentChunks, DropsTrailingRemainder) {
  std::vector<double> x(17801);
  EXPECT_EQ(segment_chunks(x, 8900).size(), 2u);
  EXPECT_TRUE(segment_chunks(std::vector<double>(8899), 8900).empty());
}

TEST(SegmentChunks, ChunksConcatenateToInputPrefix) {
  std::vector<double> x(26700);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i);
  const auto chunks = segment_chunks(x, 8900);
  ASSERT_EQ(chunks.size(), 3u);
  for (std::size_t c = 0; c < 3; ++c) {
    ASSERT_EQ(chunks[c].size(), 8900u);
    EXPECT_EQ(chunks[c].front(), 8900.0 * static_cast<double>(c));
  }
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> y(rng() % 1000);
    for (auto& v : y) v = oracle::uniform(rng);
    const std::size_t len = 1 + rng() % 50;
    std::vector<double> joined;
    for (const auto& c : segment_chunks(y, len)) joined.insert(joined.end(), c.begin(), c.end());
    ASSERT_LE(joined.size(), y.size());
    EXPECT_LT(y.size() - joined.size(), len);
    EXPECT_TRUE(std::equal(joined.begin(), joined.end(), y.begin()));
  }
}

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "coughxai/features.hpp"
#include "oracles/oracles.hpp"

using namespace coughxai;

namespace {

/// Three bins at fs = 5 Hz, so the frequency axis is {0, 1, 2} Hz.
SpectrogramMatrix toy(std::vector<std::vector<double>> frames) {
  Grid g(frames.front().size(), frames.size());
  for (std::size_t n = 0; n < frames.size(); ++n) {
    for (std::size_t k = 0; k < frames[n].size(); ++k) g(k, n) = frames[n][k];
  }
  return make_spectrogram(std::move(g), 5.0);
}

Grid random_grid(std::mt19937_64& rng, std::size_t rows, std::size_t cols, bool zero_frames) {
  Grid g(rows, cols);
  for (double& v : g.data()) v = std::pow(oracle::uniform(rng), 3.0);
  if (zero_frames) {
    for (std::size_t k = 0; k < rows; ++k) g(k, cols / 2) = 0.0;
  }
  return g;
}

}  // namespace

TEST(ToySpectrogram, FrequencyAxis) {
  const auto s = toy({{1, 1, 1}});
  EXPECT_EQ(s.frequency(0), 0.0);
  EXPECT_EQ(s.frequency(1), 1.0);
  EXPECT_EQ(s.frequency(2), 2.0);
}

TEST(Features, FlatSpectrum) {
  const auto s = toy({{1, 1, 1}, {1, 1, 1}, {1, 1, 1}});
  const auto f = extract_features(s);
  EXPECT_NEAR(f.ac, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(f.sp_f, 1.0, 1e-12);
  EXPECT_EQ(f.sp_fx, 0.0);
  EXPECT_NEAR(f.sp_re, std::log(3.0), 1e-12);
  EXPECT_NEAR(f.sp_cf, 1.0, 1e-15);
  EXPECT_NEAR(f.sp_bw, 2.0 / 3.0, 1e-15);
  EXPECT_EQ(f.sp_r, 2.0);
}

TEST(Features, FlatFullSizeSpectrumEntropyIsLogOfBinCount) {
  const auto f = extract_features(make_spectrogram(Grid(45, 100, 0.3)));
  EXPECT_NEAR(f.sp_re, std::log(45.0), 1e-12);
  EXPECT_NEAR(f.ac, 44.0 / 45.0, 1e-14);
  EXPECT_NEAR(f.sp_f, 1.0, 1e-12);
}

TEST(Features, SingleBinSpike) {
  const auto s = toy({{0, 1, 0}, {0, 2, 0}});
  const auto f = extract_features(s);
  EXPECT_EQ(f.sp_re, 0.0);
  EXPECT_EQ(f.sp_bw, 0.0);
  EXPECT_EQ(f.ac, 1.0);
  EXPECT_NEAR(f.sp_cf, 3.0, 1e-15);
  EXPECT_EQ(f.sp_r, 1.0);
}

TEST(Features, RolloffIncludesTheBoundaryBin) {
  EXPECT_EQ(spectral_rolloff(toy({{0.85, 0.15, 0.0}})), 0.0);
  EXPECT_EQ(spectral_rolloff(toy({{0.8, 0.2, 0.0}})), 1.0);
  EXPECT_EQ(spectral_rolloff(toy({{0.0, 0.0, 1.0}})), 2.0);
}

TEST(Features, FlatnessOfUnequalFrame) {
  EXPECT_NEAR(spectral_flatness(toy({{1, 1, 4}})), std::cbrt(4.0) / 2.0, 1e-9);
}

TEST(Features, FluxTelescopes) {
  const auto s = toy({{1, 0, 0}, {3, 1, 0}, {0, 0, 2}, {5, 5, 5}});
  EXPECT_NEAR(spectral_flux(s), (15.0 - 1.0) / 3.0, 1e-15);
  EXPECT_LT(spectral_flux(toy({{5, 5, 5}, {1, 0, 0}})), 0.0);
}

TEST(Features, ZeroFramesAreSkipped) {
  const auto with_zero = toy({{1, 1, 4}, {0, 0, 0}, {1, 1, 4}});
  const auto without = toy({{1, 1, 4}, {1, 1, 4}});
  const auto a = extract_features(with_zero), b = extract_features(without);
  EXPECT_EQ(a.ac, b.ac);
  EXPECT_EQ(a.sp_bw, b.sp_bw);
  EXPECT_EQ(a.sp_cf, b.sp_cf);
  EXPECT_EQ(a.sp_re, b.sp_re);
  EXPECT_EQ(a.sp_r, b.sp_r);
}

TEST(Features, MatchesOracleOnRandomInputs) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t rows = trial < 10 ? 45 : 2 + rng() % 20, cols = trial < 10 ? 100 : 2 + rng() % 30;
    const auto g = random_grid(rng, rows, cols, trial % 3 == 0);
    const auto s = make_spectrogram(g);
    const auto got = extract_features(s).values();
    oracle::FeatureParams prm;
    const auto want = oracle::features(oracle::to_matrix(g), prm);
    for (std::size_t i = 0; i < 7; ++i) {
      EXPECT_NEAR(got[i], want[i], 1e-9 * (1.0 + std::abs(want[i]))) << SpectralFeatures::names[i] << " trial " << trial;
    }
  }
}

TEST(Features, MatchesOracleWithOtherParameters) {
  std::mt19937_64 rng(32);
  FeatureConfig cfg;
  cfg.renyi_q = 2.5;
  cfg.rolloff_fraction = 0.6;
  oracle::FeatureParams prm;
  prm.q = 2.5;
  prm.rolloff = 0.6;
  for (int trial = 0; trial < 10; ++trial) {
    const auto g = random_grid(rng, 45, 100, false);
    const auto got = extract_features(make_spectrogram(g), cfg).values();
    const auto want = oracle::features(oracle::to_matrix(g), prm);
    for (std::size_t i = 0; i < 7; ++i) EXPECT_NEAR(got[i], want[i], 1e-9 * (1.0 + std::abs(want[i])));
  }
}

TEST(Features, ScaleInvariance) {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 10; ++trial) {
    // kept away from zero so the flatness log offset stays negligible
    Grid g(45, 100);
    for (double& v : g.data()) v = 0.5 + oracle::uniform(rng);
    for (double c : {1e-3, 7.0, 1e4}) {
      Grid scaled = g;
      for (double& v : scaled.data()) v *= c;
      const auto a = extract_features(make_spectrogram(g)), b = extract_features(make_spectrogram(scaled));
      EXPECT_NEAR(b.ac, a.ac, 1e-12);
      EXPECT_NEAR(b.sp_bw, a.sp_bw, 1e-9 * a.sp_bw);
      EXPECT_NEAR(b.sp_cf, a.sp_cf, 1e-9 * a.sp_cf);
      EXPECT_NEAR(b.sp_re, a.sp_re, 1e-9);
      EXPECT_EQ(b.sp_r, a.sp_r);
      EXPECT_NEAR(b.sp_f, a.sp_f, 1e-9 * a.sp_f);
      EXPECT_NEAR(b.sp_fx, c * a.sp_fx, 1e-9 * (std::abs(c * a.sp_fx) + c));
    }
  }
}

TEST(Features, Ranges) {
  std::mt19937_64 rng(34);
  for (int trial = 0; trial < 30; ++trial) {
    const auto s = make_spectrogram(random_grid(rng, 45, 100, trial % 2 == 0));
    const auto f = extract_features(s);
    EXPECT_GE(f.ac, 0.0);
    EXPECT_LE(f.ac, 1.0);
    EXPECT_GT(f.sp_f, 0.0);
    EXPECT_LE(f.sp_f, 1.0);
    EXPECT_GE(f.sp_re, 0.0);
    EXPECT_LE(f.sp_re, std::log(45.0) + 1e-12);
    EXPECT_GE(f.sp_r, 0.0);
    EXPECT_LE(f.sp_r, s.frequency(44));
    EXPECT_GE(f.sp_bw, 0.0);
    EXPECT_GE(f.sp_cf, (s.frequency(44) + 1.0) / 45.0 - 1e-9);
  }
}

TEST(Features, FramePermutationChangesOnlyFlux) {
  std::mt19937_64 rng(35);
  const auto g = random_grid(rng, 45, 100, false);
  Grid reversed(45, 100);
  for (std::size_t k = 0; k < 45; ++k) {
    for (std::size_t n = 0; n < 100; ++n) reversed(k, n) = g(k, 99 - n);
  }
  const auto a = extract_features(make_spectrogram(g)), b = extract_features(make_spectrogram(reversed));
  EXPECT_NEAR(b.ac, a.ac, 1e-12);
  EXPECT_NEAR(b.sp_bw, a.sp_bw, 1e-9 * a.sp_bw);
  EXPECT_NEAR(b.sp_cf, a.sp_cf, 1e-9 * a.sp_cf);
  EXPECT_NEAR(b.sp_f, a.sp_f, 1e-12);
  EXPECT_NEAR(b.sp_re, a.sp_re, 1e-12);
  EXPECT_NEAR(b.sp_r, a.sp_r, 1e-9 * a.sp_r);
  EXPECT_NEAR(b.sp_fx, -a.sp_fx, 1e-9 * (1.0 + std::abs(a.sp_fx)));
}

TEST(Features, DegenerateInputs) {
  EXPECT_THROW(extract_features(make_spectrogram(Grid(45, 100))), DegenerateInputError);
  FeatureConfig strict;
  strict.zero_frame_policy = ZeroFramePolicy::Error;
  EXPECT_THROW(extract_features(toy({{1, 1, 1}, {0, 0, 0}}), strict), DegenerateInputError);
  EXPECT_NO_THROW(extract_features(toy({{1, 1, 1}, {0, 0, 0}})));
  EXPECT_THROW(extract_features(toy({{1, -1, 1}, {1, 1, 1}})), ArgumentError);
  EXPECT_THROW(extract_features(toy({{1, NAN, 1}, {1, 1, 1}})), ArgumentError);
  auto logscaled = toy({{1, 1, 1}, {1, 1, 1}});
  logscaled.scale = Scale::LogNormalized;
  EXPECT_THROW(extract_features(logscaled), ArgumentError);
  EXPECT_THROW(spectral_flux(toy({{1, 1, 1}})), ArgumentError);
}

TEST(Features, ConfigValidation) {
  FeatureConfig c;
  c.renyi_q = 1.0;
  EXPECT_THROW(c.validate(), ArgumentError);
  c = {};
  c.rolloff_fraction = 1.0;
  EXPECT_THROW(c.validate(), ArgumentError);
  c = {};
  c.eps = -1.0;
  EXPECT_THROW(c.validate(), ArgumentError);
}

TEST(Features, LiteralRenyiForm) {
  FeatureConfig cfg;
  cfg.renyi_mode = RenyiMode::Literal;
  const auto s = toy({{std::exp(1.0), 0.0, 0.0}, {0.0, std::exp(2.0), 0.0}});
  // (log P)^q / (1 - q) per frame with q = 4
  EXPECT_NEAR(renyi_entropy(s, cfg), (1.0 + 16.0) / 2.0 / -3.0, 1e-12);
}

TEST(Features, FeatureIndexLookup) {
  EXPECT_EQ(feature_index("ac"), 0u);
  EXPECT_EQ(feature_index("sp_r"), 6u);
  EXPECT_THROW(feature_index("nope"), ArgumentError);
}

TEST(PairwiseSum, MatchesPlainSum) {
  std::vector<double> v(1001);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
  EXPECT_EQ(pairwise_sum(v), 500500.0);
  EXPECT_EQ(pairwise_sum(std::vector<double>{}), 0.0);
}

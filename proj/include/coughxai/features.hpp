#pragma once

// Frame-averaged spectral features of a (weighted) power spectrogram.
//
// Per frame n with total power P[n] = sum_k S[k,n]:
//   AC    sum_{k>=1} S / P
//   SpC   sum_k f[k] S / P                       (centroid, Hz)
//   SpBW  sum_k (f[k] - SpC)^2 S / P             (Hz^2)
//   SpCF  max_k S / (C P),  C = 1 / (max f - min f + 1)
//   SpF   exp(mean_k log(S + eps)) / mean_k (S + eps)
//   SpRE  1/(1-q) log sum_k (S/P)^q
//   SpR   f[k85], k85 = min k with cumulative power >= 0.85 P
// and SpFx = 1/(N-1) sum_{n>=1} sum_k (S[k,n] - S[k,n-1]) over all frames.
// Frames with P = 0 are skipped (or rejected, per ZeroFramePolicy).

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string_view>
#include <vector>

#include "coughxai/errors.hpp"
#include "coughxai/grid.hpp"

namespace coughxai {

enum class ZeroFramePolicy { SkipFrame, Error };
enum class RenyiMode { Normalized, Literal };

struct FeatureConfig {
  double renyi_q = 4.0;
  double rolloff_fraction = 0.85;
  double eps = 1e-12;
  ZeroFramePolicy zero_frame_policy = ZeroFramePolicy::SkipFrame;
  RenyiMode renyi_mode = RenyiMode::Normalized;

  void validate() const {
    if (!(renyi_q > 0.0) || renyi_q == 1.0 || !std::isfinite(renyi_q)) {
      throw ArgumentError("renyi_q must be positive and different from 1");
    }
    if (!(rolloff_fraction > 0.0 && rolloff_fraction < 1.0)) throw ArgumentError("rolloff fraction must lie in (0,1)");
    if (!(eps >= 0.0)) throw ArgumentError("eps must be nonnegative");
  }
};

struct SpectralFeatures {
  double ac = 0.0;
  double sp_bw = 0.0;
  double sp_cf = 0.0;
  double sp_f = 0.0;
  double sp_fx = 0.0;
  double sp_re = 0.0;
  double sp_r = 0.0;

  static constexpr std::array<std::string_view, 7> names{"ac", "sp_bw", "sp_cf", "sp_f", "sp_fx", "sp_re", "sp_r"};

  std::array<double, 7> values() const { return {ac, sp_bw, sp_cf, sp_f, sp_fx, sp_re, sp_r}; }

  double get(std::size_t i) const { return values().at(i); }

  friend bool operator==(const SpectralFeatures&, const SpectralFeatures&) = default;
};

inline std::size_t feature_index(std::string_view name) {
  for (std::size_t i = 0; i < SpectralFeatures::names.size(); ++i) {
    if (SpectralFeatures::names[i] == name) return i;
  }
  throw ArgumentError("unknown feature '" + std::string(name) + "'");
}

/// Pairwise (cascade) summation with a fixed split so results do not depend on
/// how the terms were produced.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

namespace detail {

inline double frame_power(const SpectrogramMatrix& s, std::size_t n) {
  double p = 0.0;
  for (std::size_t k = 0; k < s.values.rows(); ++k) p += s.values(k, n);
  return p;
}

inline void check_nonnegative(const SpectrogramMatrix& s) {
  if (s.values.empty()) throw ArgumentError("empty spectrogram");
  for (double v : s.values.data()) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ArgumentError("spectrogram values must be finite and nonnegative");
  }
}

/// Averages per_frame(n, P[n]) over frames with positive power.
template <class F>
double frame_average(const SpectrogramMatrix& s, ZeroFramePolicy policy, F&& per_frame) {
  check_nonnegative(s);
  std::vector<double> terms;
  terms.reserve(s.values.cols());
  for (std::size_t n = 0; n < s.values.cols(); ++n) {
    const double p = frame_power(s, n);
    if (p > 0.0) {
      terms.push_back(per_frame(n, p));
    } else if (policy == ZeroFramePolicy::Error) {
      throw DegenerateInputError("frame " + std::to_string(n) + " has zero total power");
    }
  }
  if (terms.empty()) throw DegenerateInputError("every frame has zero total power");
  return pairwise_sum(terms) / static_cast<double>(terms.size());
}

inline double centroid(const SpectrogramMatrix& s, std::size_t n, double power) {
  double acc = 0.0;
  for (std::size_t k = 0; k < s.values.rows(); ++k) acc += s.frequency(k) * (s.values(k, n) / power);
  return acc;
}

}  // namespace detail

inline double relative_ac_power(const SpectrogramMatrix& s, ZeroFramePolicy policy = ZeroFramePolicy::SkipFrame) {
  return detail::frame_average(s, policy, [&](std::size_t n, double p) {
    double ac = 0.0;
    for (std::size_t k = 1; k < s.values.rows(); ++k) ac += s.values(k, n);
    return std::clamp(ac / p, 0.0, 1.0);
  });
}

/// Power-weighted mean frequency of frame n (Hz).
inline double spectral_centroid_frame(const SpectrogramMatrix& s, std::size_t n) {
  if (n >= s.values.cols()) throw ArgumentError("frame index out of range");
  detail::check_nonnegative(s);
  const double p = detail::frame_power(s, n);
  if (!(p > 0.0)) throw DegenerateInputError("frame " + std::to_string(n) + " has zero total power");
  return detail::centroid(s, n, p);
}

inline double spectral_bandwidth(const SpectrogramMatrix& s, ZeroFramePolicy policy = ZeroFramePolicy::SkipFrame) {
  return detail::frame_average(s, policy, [&](std::size_t n, double p) {
    const double c = detail::centroid(s, n, p);
    double acc = 0.0;
    for (std::size_t k = 0; k < s.values.rows(); ++k) {
      const double d = s.frequency(k) - c;
      acc += d * d * (s.values(k, n) / p);
    }
    return acc;
  });
}

inline double spectral_crest(const SpectrogramMatrix& s, ZeroFramePolicy policy = ZeroFramePolicy::SkipFrame) {
  const double span_hz = s.frequency(s.k_max()) - s.frequency(0);
  const double c = 1.0 / (span_hz + 1.0);
  return detail::frame_average(s, policy, [&](std::size_t n, double p) {
    double mx = 0.0;
    for (std::size_t k = 0; k < s.values.rows(); ++k) mx = std::max(mx, s.values(k, n));
    return mx / (c * p);
  });
}

inline double spectral_flatness(const SpectrogramMatrix& s, double eps = 1e-12,
                                ZeroFramePolicy policy = ZeroFramePolicy::SkipFrame) {
  const double bins = static_cast<double>(s.values.rows());
  return detail::frame_average(s, policy, [&](std::size_t n, double) {
    double log_sum = 0.0, lin_sum = 0.0;
    for (std::size_t k = 0; k < s.values.rows(); ++k) {
      const double v = s.values(k, n) + eps;
      log_sum += std::log(v);
      lin_sum += v;
    }
    return std::min(1.0, std::exp(log_sum / bins) / (lin_sum / bins));
  });
}

/// Signed frame-to-frame power change averaged over the N-1 transitions.
inline double spectral_flux(const SpectrogramMatrix& s) {
  detail::check_nonnegative(s);
  const std::size_t frames = s.values.cols();
  if (frames < 2) throw ArgumentError("spectral flux needs at least two frames");
  std::vector<double> terms(frames - 1);
  for (std::size_t n = 1; n < frames; ++n) {
    double acc = 0.0;
    for (std::size_t k = 0; k < s.values.rows(); ++k) acc += s.values(k, n) - s.values(k, n - 1);
    terms[n - 1] = acc;
  }
  return pairwise_sum(terms) / static_cast<double>(frames - 1);
}

inline double renyi_entropy(const SpectrogramMatrix& s, const FeatureConfig& cfg = {}) {
  cfg.validate();
  const double q = cfg.renyi_q;
  return detail::frame_average(s, cfg.zero_frame_policy, [&](std::size_t n, double p) {
    if (cfg.renyi_mode == RenyiMode::Literal) {
      // exponent applied to log of the unnormalized frame power
      return std::pow(std::log(p), q) / (1.0 - q);
    }
    double acc = 0.0;
    for (std::size_t k = 0; k < s.values.rows(); ++k) acc += std::pow(s.values(k, n) / p, q);
    return std::max(0.0, std::log(acc) / (1.0 - q));
  });
}

inline double spectral_rolloff(const SpectrogramMatrix& s, const FeatureConfig& cfg = {}) {
  cfg.validate();
  return detail::frame_average(s, cfg.zero_frame_policy, [&](std::size_t n, double p) {
    const double target = cfg.rolloff_fraction * p;
    double cum = 0.0;
    for (std::size_t k = 0; k < s.values.rows(); ++k) {
      cum += s.values(k, n);
      if (cum >= target) return s.frequency(k);
    }
    return s.frequency(s.k_max());
  });
}

inline SpectralFeatures extract_features(const SpectrogramMatrix& s, const FeatureConfig& cfg = {}) {
  cfg.validate();
  if (s.scale != Scale::Linear) throw ArgumentError("features expect a linear spectrogram");
  SpectralFeatures f;
  f.ac = relative_ac_power(s, cfg.zero_frame_policy);
  f.sp_bw = spectral_bandwidth(s, cfg.zero_frame_policy);
  f.sp_cf = spectral_crest(s, cfg.zero_frame_policy);
  f.sp_f = spectral_flatness(s, cfg.eps, cfg.zero_frame_policy);
  f.sp_fx = spectral_flux(s);
  f.sp_re = renyi_entropy(s, cfg);
  f.sp_r = spectral_rolloff(s, cfg);
  return f;
}

}  // namespace coughxai

#pragma once

// Short-time power spectra: Hanning-windowed, non-overlapping, odd-length frames.
//
// A frame of M = 2K+1 samples yields K+1 one-sided bins:
//   P[0] = |X[0]|^2 / U,  P[k] = 2 |X[k]|^2 / U  (k = 1..K),  U = sum_m w[m]^2.
// An odd-length DFT has no Nyquist bin, so every non-DC bin is doubled.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "coughxai/errors.hpp"
#include "coughxai/grid.hpp"

namespace coughxai {

/// Hanning window without zero end points: w[m] = 0.5 (1 - cos(2 pi (m+1) / (M+1))).
inline std::vector<double> hanning_window(std::size_t length) {
  std::vector<double> w(length);
  for (std::size_t m = 0; m < length; ++m) {
    w[m] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(m + 1) /
                                 static_cast<double>(length + 1)));
  }
  return w;
}

/// Precomputed window and twiddle table for one odd frame length.
class PsdEstimator {
 public:
  explicit PsdEstimator(std::size_t frame_length = kFrameLength) : length_(frame_length) {
    if (frame_length < 1 || frame_length % 2 == 0) {
      throw ArgumentError("PSD frame length must be odd, got " + std::to_string(frame_length));
    }
    window_ = hanning_window(length_);
    for (double w : window_) window_energy_ += w * w;
    cos_.resize(length_);
    sin_.resize(length_);
    for (std::size_t i = 0; i < length_; ++i) {
      const double phase = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(length_);
      cos_[i] = std::cos(phase);
      sin_[i] = std::sin(phase);
    }
  }

  std::size_t frame_length() const noexcept { return length_; }
  std::size_t bins() const noexcept { return length_ / 2 + 1; }
  std::span<const double> window() const noexcept { return window_; }
  double window_energy() const noexcept { return window_energy_; }

  /// Writes bins() values into `out`.
  void compute(std::span<const double> frame, std::span<double> out) const {
    if (frame.size() != length_) {
      throw ArgumentError("frame has " + std::to_string(frame.size()) + " samples, expected " +
                          std::to_string(length_));
    }
    if (out.size() != bins()) throw ArgumentError("PSD output span has the wrong size");
    std::vector<double> xw(length_);
    for (std::size_t m = 0; m < length_; ++m) xw[m] = frame[m] * window_[m];
    for (std::size_t k = 0; k < bins(); ++k) {
      double re = 0.0;
      double im = 0.0;
      std::size_t idx = 0;
      for (std::size_t m = 0; m < length_; ++m) {
        re += xw[m] * cos_[idx];
        im -= xw[m] * sin_[idx];
        idx += k;
        if (idx >= length_) idx -= length_;
      }
      const double power = (re * re + im * im) / window_energy_;
      out[k] = k == 0 ? power : 2.0 * power;
    }
  }

  std::vector<double> compute(std::span<const double> frame) const {
    std::vector<double> out(bins());
    compute(frame, out);
    return out;
  }

 private:
  std::size_t length_;
  std::vector<double> window_;
  double window_energy_ = 0.0;
  std::vector<double> cos_;
  std::vector<double> sin_;
};

inline const PsdEstimator& default_psd_estimator() {
  static const PsdEstimator estimator(kFrameLength);
  return estimator;
}

/// One-sided PSD of an 89-sample frame (45 bins).
inline std::vector<double> frame_psd(std::span<const double> frame) {
  return default_psd_estimator().compute(frame);
}

/// Column n holds the PSD of samples [n*M, (n+1)*M). No overlap.
inline SpectrogramMatrix compute_spectrogram(std::span<const double> chunk, const PsdEstimator& estimator,
                                             std::size_t n_frames, double sample_rate_hz) {
  const std::size_t m = estimator.frame_length();
  if (n_frames == 0 || chunk.size() != m * n_frames) {
    throw ArgumentError("chunk has " + std::to_string(chunk.size()) + " samples, expected " +
                        std::to_string(m * n_frames));
  }
  SpectrogramMatrix s{Grid(estimator.bins(), n_frames), sample_rate_hz, Scale::Linear};
  std::vector<double> column(estimator.bins());
  for (std::size_t n = 0; n < n_frames; ++n) {
    estimator.compute(chunk.subspan(n * m, m), column);
    for (std::size_t k = 0; k < column.size(); ++k) s.values(k, n) = column[k];
  }
  return s;
}

/// The pipeline's 45x100 spectrogram from an 8900-sample chunk at 8820 Hz.
inline SpectrogramMatrix compute_spectrogram(std::span<const double> chunk,
                                             double sample_rate_hz = kDecimatedSampleRate) {
  return compute_spectrogram(chunk, default_psd_estimator(), kFrames, sample_rate_hz);
}

inline constexpr double kLogFloor = 1e-12;

/// 10 log10(S + 1e-12), then min-max rescaled to [0, 1]. A flat result maps to all zeros.
inline SpectrogramMatrix log_normalize(const SpectrogramMatrix& s) {
  if (s.scale != Scale::Linear) throw ArgumentError("log_normalize expects a linear spectrogram");
  SpectrogramMatrix out{s.values, s.sample_rate_hz, Scale::LogNormalized};
  auto v = out.values.data();
  if (v.empty()) return out;
  for (double& x : v) {
    if (x < 0.0) throw ArgumentError("spectrogram power must be nonnegative");
    x = 10.0 * std::log10(x + kLogFloor);
  }
  const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (hi == lo) {
    std::fill(v.begin(), v.end(), 0.0);
    return out;
  }
  const double range = hi - lo;
  for (double& x : v) x = std::clamp((x - lo) / range, 0.0, 1.0);
  return out;
}

}  // namespace coughxai

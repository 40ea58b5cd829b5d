#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "coughxai/errors.hpp"

namespace coughxai {

// Pipeline geometry: 89-sample frames (2K+1 with K = 44), 100 frames per chunk.
inline constexpr std::size_t kMaxBin = 44;
inline constexpr std::size_t kBins = kMaxBin + 1;
inline constexpr std::size_t kFrames = 100;
inline constexpr std::size_t kFrameLength = 2 * kMaxBin + 1;
inline constexpr std::size_t kChunkLength = kFrameLength * kFrames;
inline constexpr int kRawSampleRate = 44100;
inline constexpr int kDecimationFactor = 5;
inline constexpr double kDecimatedSampleRate = 8820.0;

/// Dense row-major matrix of doubles. Rows index frequency, columns index time.
class Grid {
 public:
  Grid() = default;
  Grid(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Grid(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw ArgumentError("grid data size does not match " + std::to_string(rows_) + "x" +
                          std::to_string(cols_));
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  bool same_shape(const Grid& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class Scale { Linear, LogNormalized, Map };

inline std::string_view to_string(Scale s) {
  switch (s) {
    case Scale::Linear: return "linear";
    case Scale::LogNormalized: return "lognorm";
    case Scale::Map: return "map";
  }
  return "linear";
}

inline Scale parse_scale(std::string_view s) {
  if (s == "linear") return Scale::Linear;
  if (s == "lognorm") return Scale::LogNormalized;
  if (s == "map") return Scale::Map;
  throw FormatError("unknown scale tag '" + std::string(s) + "'");
}

/// Power spectrogram S[k, n] (or its log-normalized CNN input form).
/// Row k has frequency k * fs / (2K + 1).
struct SpectrogramMatrix {
  Grid values;
  double sample_rate_hz = kDecimatedSampleRate;
  Scale scale = Scale::Linear;

  std::size_t k_max() const noexcept { return values.rows() == 0 ? 0 : values.rows() - 1; }
  std::size_t n_frames() const noexcept { return values.cols(); }

  double frequency(std::size_t k) const noexcept {
    return static_cast<double>(k) * sample_rate_hz / static_cast<double>(2 * k_max() + 1);
  }

  std::vector<double> frequency_axis() const {
    std::vector<double> f(values.rows());
    for (std::size_t k = 0; k < f.size(); ++k) f[k] = frequency(k);
    return f;
  }

  friend bool operator==(const SpectrogramMatrix&, const SpectrogramMatrix&) = default;
};

/// Occlusion importance M[k, n] in [0, 1], same geometry as its source spectrogram.
struct OcclusionMap {
  Grid values;

  friend bool operator==(const OcclusionMap&, const OcclusionMap&) = default;
};

inline SpectrogramMatrix make_spectrogram(Grid values, double fs = kDecimatedSampleRate,
                                          Scale scale = Scale::Linear) {
  return SpectrogramMatrix{std::move(values), fs, scale};
}

}  // namespace coughxai

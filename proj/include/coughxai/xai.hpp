#pragma once

// Occlusion sensitivity maps and map-weighted spectrograms.

#include <algorithm>
#include <cmath>
#include <exception>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "coughxai/cnn.hpp"
#include "coughxai/errors.hpp"
#include "coughxai/grid.hpp"

namespace coughxai {

enum class Baseline { Zero, MapMin };

/// Patch geometry in cells: rows are frequency bins, columns are frames.
struct OcclusionConfig {
  std::size_t patch_h = 5;
  std::size_t patch_w = 10;
  std::size_t stride_h = 5;
  std::size_t stride_w = 10;
  Baseline baseline = Baseline::Zero;

  void validate(std::size_t rows, std::size_t cols) const {
    if (patch_h < 1 || patch_h > rows || patch_w < 1 || patch_w > cols) {
      throw ArgumentError("occlusion patch " + std::to_string(patch_h) + "x" + std::to_string(patch_w) +
                          " does not fit a " + std::to_string(rows) + "x" + std::to_string(cols) + " input");
    }
    if (stride_h < 1 || stride_w < 1) throw ArgumentError("occlusion strides must be >= 1");
  }

  /// Patch start offsets along one axis.
  static std::vector<std::size_t> starts(std::size_t length, std::size_t patch, std::size_t stride) {
    std::vector<std::size_t> s;
    for (std::size_t p = 0; p + patch <= length; p += stride) s.push_back(p);
    return s;
  }
};

/// Raw probability drops on the coarse patch grid.
struct OcclusionGrid {
  Grid importance;  // rows = row_starts.size(), cols = col_starts.size()
  std::vector<std::size_t> row_starts;
  std::vector<std::size_t> col_starts;
};

/// For every patch position: fill the patch with the baseline, rescore, and
/// record max(0, p_orig - p_occluded). Positions are split across `threads`
/// workers; each cell is written by exactly one worker, so the result does not
/// depend on the thread count.
template <Scorer S>
OcclusionGrid occlusion_importance(const S& scorer, const SpectrogramMatrix& input, const OcclusionConfig& cfg,
                                   unsigned threads = 1) {
  if (input.scale != Scale::LogNormalized) throw ArgumentError("occlusion expects a log-normalized spectrogram");
  const std::size_t rows = input.values.rows(), cols = input.values.cols();
  cfg.validate(rows, cols);

  OcclusionGrid out;
  out.row_starts = OcclusionConfig::starts(rows, cfg.patch_h, cfg.stride_h);
  out.col_starts = OcclusionConfig::starts(cols, cfg.patch_w, cfg.stride_w);
  out.importance = Grid(out.row_starts.size(), out.col_starts.size());

  const double fill = cfg.baseline == Baseline::Zero
                          ? 0.0
                          : *std::min_element(input.values.data().begin(), input.values.data().end());
  const double p_orig = ClassScore(scorer(input)).p_cough;
  const std::size_t positions = out.importance.size();

  auto work = [&](std::size_t begin, std::size_t end) {
    SpectrogramMatrix occluded = input;
    for (std::size_t idx = begin; idx < end; ++idx) {
      const std::size_t gi = idx / out.col_starts.size();
      const std::size_t gj = idx % out.col_starts.size();
      const std::size_t r0 = out.row_starts[gi], c0 = out.col_starts[gj];
      for (std::size_t r = r0; r < r0 + cfg.patch_h; ++r) {
        for (std::size_t c = c0; c < c0 + cfg.patch_w; ++c) occluded.values(r, c) = fill;
      }
      const double p = ClassScore(scorer(occluded)).p_cough;
      out.importance(gi, gj) = std::max(0.0, p_orig - p);
      for (std::size_t r = r0; r < r0 + cfg.patch_h; ++r) {
        for (std::size_t c = c0; c < c0 + cfg.patch_w; ++c) occluded.values(r, c) = input.values(r, c);
      }
    }
  };

  const std::size_t workers = std::clamp<std::size_t>(threads, 1, positions);
  if (workers == 1) {
    work(0, positions);
    return out;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t begin = positions * w / workers, end = positions * (w + 1) / workers;
      pool.emplace_back([&, w, begin, end] {
        try {
          work(begin, end);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

namespace detail {

// Interpolation weights from output positions onto patch centres (clamped at the ends).
struct AxisInterp {
  std::size_t lo = 0, hi = 0;
  double t = 0.0;
};

inline std::vector<AxisInterp> axis_weights(std::size_t length, std::span<const std::size_t> starts,
                                            std::size_t patch) {
  std::vector<double> centres(starts.size());
  for (std::size_t i = 0; i < starts.size(); ++i) {
    centres[i] = static_cast<double>(starts[i]) + (static_cast<double>(patch) - 1.0) / 2.0;
  }
  std::vector<AxisInterp> w(length);
  for (std::size_t p = 0; p < length; ++p) {
    const double x = static_cast<double>(p);
    if (x <= centres.front()) {
      w[p] = {0, 0, 0.0};
    } else if (x >= centres.back()) {
      w[p] = {centres.size() - 1, centres.size() - 1, 0.0};
    } else {
      const auto it = std::upper_bound(centres.begin(), centres.end(), x);
      const std::size_t hi = static_cast<std::size_t>(it - centres.begin());
      const std::size_t lo = hi - 1;
      w[p] = {lo, hi, (x - centres[lo]) / (centres[hi] - centres[lo])};
    }
  }
  return w;
}

}  // namespace detail

/// Bilinear resize of the coarse grid to rows x cols, anchoring grid cells at patch centres.
inline Grid resize_importance(const OcclusionGrid& g, std::size_t rows, std::size_t cols, const OcclusionConfig& cfg) {
  const auto wr = detail::axis_weights(rows, g.row_starts, cfg.patch_h);
  const auto wc = detail::axis_weights(cols, g.col_starts, cfg.patch_w);
  Grid out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const auto& a = wr[r];
      const auto& b = wc[c];
      const double top = (1.0 - b.t) * g.importance(a.lo, b.lo) + b.t * g.importance(a.lo, b.hi);
      const double bottom = (1.0 - b.t) * g.importance(a.hi, b.lo) + b.t * g.importance(a.hi, b.hi);
      out(r, c) = (1.0 - a.t) * top + a.t * bottom;
    }
  }
  return out;
}

/// Min-max rescale to [0, 1]; a flat grid becomes all zeros.
inline Grid normalize_min_max(Grid g) {
  auto v = g.data();
  if (v.empty()) return g;
  const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  const double lo = *lo_it, hi = *hi_it;
  if (hi == lo) {
    std::fill(v.begin(), v.end(), 0.0);
    return g;
  }
  for (double& x : v) x = std::clamp((x - lo) / (hi - lo), 0.0, 1.0);
  return g;
}

template <Scorer S>
OcclusionMap occlusion_map(const S& scorer, const SpectrogramMatrix& input, const OcclusionConfig& cfg,
                           unsigned threads = 1) {
  const auto coarse = occlusion_importance(scorer, input, cfg, threads);
  return OcclusionMap{normalize_min_max(resize_importance(coarse, input.values.rows(), input.values.cols(), cfg))};
}

/// Pixelwise mean of equally sized maps.
inline OcclusionMap average_maps(std::span<const OcclusionMap> maps) {
  if (maps.empty()) throw ArgumentError("cannot average an empty set of maps");
  Grid acc(maps.front().values.rows(), maps.front().values.cols());
  for (const auto& m : maps) {
    if (!m.values.same_shape(acc)) throw ArgumentError("occlusion maps differ in size");
    for (std::size_t i = 0; i < acc.size(); ++i) acc.data()[i] += m.values.data()[i];
  }
  const double n = static_cast<double>(maps.size());
  for (double& v : acc.data()) v = std::clamp(v / n, 0.0, 1.0);
  return OcclusionMap{std::move(acc)};
}

enum class AverageDomain { Linear, Log };

/// Pixelwise mean in the linear power domain (or geometric mean with AverageDomain::Log).
inline SpectrogramMatrix average_spectrograms(std::span<const SpectrogramMatrix> specs,
                                              AverageDomain domain = AverageDomain::Linear) {
  if (specs.empty()) throw ArgumentError("cannot average an empty set of spectrograms");
  const auto& first = specs.front();
  SpectrogramMatrix out{Grid(first.values.rows(), first.values.cols()), first.sample_rate_hz, Scale::Linear};
  for (const auto& s : specs) {
    if (s.scale != Scale::Linear) throw ArgumentError("spectrogram averaging expects linear spectrograms");
    if (!s.values.same_shape(out.values)) throw ArgumentError("spectrograms differ in size");
    for (std::size_t i = 0; i < out.values.size(); ++i) {
      const double v = s.values.data()[i];
      out.values.data()[i] += domain == AverageDomain::Linear ? v : std::log(v + 1e-12);
    }
  }
  const double n = static_cast<double>(specs.size());
  for (double& v : out.values.data()) {
    v = domain == AverageDomain::Linear ? v / n : std::max(0.0, std::exp(v / n) - 1e-12);
  }
  return out;
}

enum class WeightMode { MapValue, Indicator };

/// S[k,n] = S0[k,n] * M[k,n] (MapValue) or S0[k,n] (Indicator) where M[k,n] > th, else 0.
inline SpectrogramMatrix weight_spectrogram(const SpectrogramMatrix& s0, const OcclusionMap& m, double th,
                                            WeightMode mode = WeightMode::MapValue) {
  if (!s0.values.same_shape(m.values)) throw ArgumentError("spectrogram and map differ in size");
  if (!(th >= 0.0 && th <= 1.0)) throw ArgumentError("threshold must lie in [0, 1]");
  if (s0.scale != Scale::Linear) throw ArgumentError("weighting expects a linear spectrogram");
  SpectrogramMatrix out{Grid(s0.values.rows(), s0.values.cols()), s0.sample_rate_hz, Scale::Linear};
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const double mv = m.values.data()[i];
    if (mv > th) out.values.data()[i] = mode == WeightMode::MapValue ? s0.values.data()[i] * mv : s0.values.data()[i];
  }
  return out;
}

/// A patient's cough pattern: averaged spectrogram and averaged occlusion map.
struct PatientProfile {
  std::string patient_id;
  SpectrogramMatrix avg_spectrogram;
  OcclusionMap avg_map;
  std::size_t n_windows = 0;
};

}  // namespace coughxai

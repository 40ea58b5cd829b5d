#pragma once

// Forward-only CNN for cough / non-cough scoring of 45x100 log-normalized
// spectrograms, plus the CNNW weight-file codec.
//
// CNNW (little-endian):
//   "CNNW" | u32 version = 1 | u8 padding mode (0 = same) | u32 layer count
//   per layer: u8 kind, then u32 fields
//     Conv2D    (0): out_channels, kernel_h, kernel_w, activation
//     MaxPool2D (1): pool, stride
//     Dropout   (2): rate (IEEE-754 float32 bit pattern)
//     Flatten   (3): -
//     Dense     (4): out_units, activation
//     Softmax   (5): -
//   then float32 tensors in layer order: Conv kernel [out][in][h][w] followed
//   by its bias [out]; Dense matrix [out][in] row-major followed by its bias.
//
// Activations are laid out channel-major [c][y][x]; Flatten keeps that order.
// Output unit 0 of the final softmax is the cough class.

#include <algorithm>
#include <bit>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "coughxai/errors.hpp"
#include "coughxai/grid.hpp"

namespace coughxai {

enum class LayerKind : std::uint8_t { Conv2D = 0, MaxPool2D = 1, Dropout = 2, Flatten = 3, Dense = 4, Softmax = 5 };
enum class Activation : std::uint32_t { None = 0, ReLU = 1 };

inline const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::Conv2D: return "Conv2D";
    case LayerKind::MaxPool2D: return "MaxPool2D";
    case LayerKind::Dropout: return "Dropout";
    case LayerKind::Flatten: return "Flatten";
    case LayerKind::Dense: return "Dense";
    case LayerKind::Softmax: return "Softmax";
  }
  return "?";
}

struct LayerDescriptor {
  LayerKind kind = LayerKind::Flatten;
  std::uint32_t units = 0;  // Conv2D out_channels or Dense out_units
  std::uint32_t kernel_h = 2;
  std::uint32_t kernel_w = 2;
  std::uint32_t pool = 2;
  std::uint32_t stride = 2;
  float dropout_rate = 0.0f;  // ignored at inference
  Activation activation = Activation::None;

  static LayerDescriptor conv(std::uint32_t out_channels, Activation act = Activation::ReLU) {
    LayerDescriptor d;
    d.kind = LayerKind::Conv2D;
    d.units = out_channels;
    d.activation = act;
    return d;
  }
  static LayerDescriptor max_pool(std::uint32_t pool = 2, std::uint32_t stride = 2) {
    LayerDescriptor d;
    d.kind = LayerKind::MaxPool2D;
    d.pool = pool;
    d.stride = stride;
    return d;
  }
  static LayerDescriptor dropout(float rate) {
    LayerDescriptor d;
    d.kind = LayerKind::Dropout;
    d.dropout_rate = rate;
    return d;
  }
  static LayerDescriptor flatten() { return LayerDescriptor{}; }
  static LayerDescriptor dense(std::uint32_t out_units, Activation act = Activation::None) {
    LayerDescriptor d;
    d.kind = LayerKind::Dense;
    d.units = out_units;
    d.activation = act;
    return d;
  }
  static LayerDescriptor softmax() {
    LayerDescriptor d;
    d.kind = LayerKind::Softmax;
    return d;
  }

  bool has_weights() const noexcept { return kind == LayerKind::Conv2D || kind == LayerKind::Dense; }

  friend bool operator==(const LayerDescriptor&, const LayerDescriptor&) = default;
};

struct LayerWeights {
  std::vector<float> kernel;
  std::vector<float> bias;

  friend bool operator==(const LayerWeights&, const LayerWeights&) = default;
};

struct TensorShape {
  std::size_t channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;
  bool flat = false;

  std::size_t size() const noexcept { return channels * height * width; }
};

struct ClassScore {
  double p_cough = 0.5;
  double p_noncough = 0.5;
};

/// Conv(c0) Pool Drop Conv(c1) Pool Drop Conv(c2) Drop Conv(c3) Pool Flatten Dense(d, ReLU) Dense(2) Softmax
inline std::vector<LayerDescriptor> cough_layer_stack(std::uint32_t c0, std::uint32_t c1, std::uint32_t c2,
                                                      std::uint32_t c3, std::uint32_t dense_units,
                                                      float dropout_rate = 0.25f) {
  using L = LayerDescriptor;
  return {L::conv(c0),        L::max_pool(), L::dropout(dropout_rate), L::conv(c1),
          L::max_pool(),      L::dropout(dropout_rate),                L::conv(c2),
          L::dropout(dropout_rate),                                    L::conv(c3),
          L::max_pool(),      L::flatten(),  L::dense(dense_units, Activation::ReLU),
          L::dense(2),        L::softmax()};
}

/// The detector's full stack: 32, 64, 128, 256 filters and a 512-unit hidden layer.
inline std::vector<LayerDescriptor> default_layer_stack() { return cough_layer_stack(32, 64, 128, 256, 512); }

namespace detail {

inline std::string layer_label(std::size_t index, const LayerDescriptor& d) {
  return "layer " + std::to_string(index) + " (" + to_string(d.kind) + ")";
}

}  // namespace detail

/// Runs shape inference; returns the output shape of every layer.
/// Throws ValidationError naming the first offending layer.
inline std::vector<TensorShape> infer_shapes(std::span<const LayerDescriptor> layers, std::size_t input_h,
                                             std::size_t input_w) {
  if (layers.empty()) throw ValidationError("model has no layers");
  std::vector<TensorShape> shapes;
  shapes.reserve(layers.size());
  TensorShape cur{1, input_h, input_w, false};
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& d = layers[i];
    const auto fail = [&](const std::string& why) {
      throw ValidationError(detail::layer_label(i, d) + ": " + why);
    };
    if (d.kind == LayerKind::Softmax && i + 1 != layers.size()) fail("softmax must be the final layer");
    switch (d.kind) {
      case LayerKind::Conv2D:
        if (cur.flat) fail("convolution after Flatten");
        if (d.units == 0 || d.kernel_h == 0 || d.kernel_w == 0) fail("zero-sized convolution");
        if (d.activation != Activation::None && d.activation != Activation::ReLU) fail("unknown activation");
        cur.channels = d.units;
        break;
      case LayerKind::MaxPool2D:
        if (cur.flat) fail("pooling after Flatten");
        if (d.pool == 0 || d.stride == 0) fail("zero-sized pooling");
        if (cur.height < d.pool || cur.width < d.pool) {
          fail("pool " + std::to_string(d.pool) + " exceeds input " + std::to_string(cur.height) + "x" +
               std::to_string(cur.width));
        }
        cur.height = (cur.height - d.pool) / d.stride + 1;
        cur.width = (cur.width - d.pool) / d.stride + 1;
        break;
      case LayerKind::Dropout:
        if (!(d.dropout_rate >= 0.0f && d.dropout_rate < 1.0f)) fail("dropout rate must lie in [0, 1)");
        break;
      case LayerKind::Flatten:
        if (cur.flat) fail("second Flatten");
        cur = TensorShape{cur.size(), 1, 1, true};
        break;
      case LayerKind::Dense:
        if (!cur.flat) fail("dense layer before Flatten");
        if (d.units == 0) fail("dense layer with zero units");
        if (d.activation != Activation::None && d.activation != Activation::ReLU) fail("unknown activation");
        cur.channels = d.units;
        break;
      case LayerKind::Softmax:
        if (!cur.flat) fail("softmax before Flatten");
        break;
      default:
        fail("unknown layer kind");
    }
    shapes.push_back(cur);
  }
  const auto& last = layers.back();
  if (last.kind != LayerKind::Softmax) throw ValidationError("final layer must be Softmax");
  std::size_t prev = layers.size() - 1;
  while (prev > 0 && layers[prev - 1].kind == LayerKind::Dropout) --prev;
  if (prev == 0 || layers[prev - 1].kind != LayerKind::Dense || layers[prev - 1].units != 2) {
    throw ValidationError("softmax must follow a Dense layer with 2 units");
  }
  return shapes;
}

/// Expected (kernel, bias) element counts of layer i given its input shape.
inline std::pair<std::size_t, std::size_t> expected_weight_counts(const LayerDescriptor& d, const TensorShape& in) {
  switch (d.kind) {
    case LayerKind::Conv2D: return {std::size_t{d.units} * in.channels * d.kernel_h * d.kernel_w, d.units};
    case LayerKind::Dense: return {std::size_t{d.units} * in.size(), d.units};
    default: return {0, 0};
  }
}

/// Immutable, validated network. Safe to share across threads.
class ClassifierModel {
 public:
  ClassifierModel(std::vector<LayerDescriptor> layers, std::vector<LayerWeights> weights,
                  std::size_t input_h = kBins, std::size_t input_w = kFrames)
      : layers_(std::move(layers)), weights_(std::move(weights)), input_h_(input_h), input_w_(input_w) {
    if (weights_.size() != layers_.size()) {
      throw ValidationError("expected one weight entry per layer (" + std::to_string(layers_.size()) + "), got " +
                            std::to_string(weights_.size()));
    }
    shapes_ = infer_shapes(layers_, input_h_, input_w_);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const TensorShape in = i == 0 ? TensorShape{1, input_h_, input_w_, false} : shapes_[i - 1];
      const auto [nk, nb] = expected_weight_counts(layers_[i], in);
      const auto& w = weights_[i];
      if (w.kernel.size() != nk || w.bias.size() != nb) {
        throw ValidationError(detail::layer_label(i, layers_[i]) + ": expected " + std::to_string(nk) +
                              " weights + " + std::to_string(nb) + " biases, got " +
                              std::to_string(w.kernel.size()) + " + " + std::to_string(w.bias.size()));
      }
      for (float v : w.kernel) {
        if (!std::isfinite(v)) throw ValidationError(detail::layer_label(i, layers_[i]) + ": non-finite weight");
      }
      for (float v : w.bias) {
        if (!std::isfinite(v)) throw ValidationError(detail::layer_label(i, layers_[i]) + ": non-finite bias");
      }
    }
  }

  const std::vector<LayerDescriptor>& layers() const noexcept { return layers_; }
  const std::vector<LayerWeights>& weights() const noexcept { return weights_; }
  const std::vector<TensorShape>& shapes() const noexcept { return shapes_; }
  std::size_t input_height() const noexcept { return input_h_; }
  std::size_t input_width() const noexcept { return input_w_; }

  /// Softmax probabilities of the final layer.
  std::vector<double> forward_probabilities(const Grid& input) const {
    if (input.rows() != input_h_ || input.cols() != input_w_) {
      throw ValidationError("model expects " + std::to_string(input_h_) + "x" + std::to_string(input_w_) +
                            " input, got " + std::to_string(input.rows()) + "x" + std::to_string(input.cols()));
    }
    std::vector<float> act(input.size());
    for (std::size_t i = 0; i < act.size(); ++i) act[i] = static_cast<float>(input.data()[i]);
    TensorShape shape{1, input_h_, input_w_, false};
    std::vector<double> probs;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& d = layers_[i];
      switch (d.kind) {
        case LayerKind::Conv2D: act = conv2d(act, shape, d, weights_[i]); break;
        case LayerKind::MaxPool2D: act = max_pool(act, shape, d); break;
        case LayerKind::Dense: act = dense(act, d, weights_[i]); break;
        case LayerKind::Softmax: probs = softmax(act); break;
        case LayerKind::Dropout:
        case LayerKind::Flatten: break;
      }
      shape = shapes_[i];
    }
    return probs;
  }

  ClassScore forward(const SpectrogramMatrix& input) const {
    if (input.scale != Scale::LogNormalized) throw ValidationError("CNN input must be a log-normalized spectrogram");
    const auto p = forward_probabilities(input.values);
    return ClassScore{p[0], p[1]};
  }

  ClassScore operator()(const SpectrogramMatrix& input) const { return forward(input); }

 private:
  static std::vector<float> conv2d(const std::vector<float>& in, const TensorShape& s, const LayerDescriptor& d,
                                   const LayerWeights& w) {
    const std::size_t h = s.height, wd = s.width, cin = s.channels;
    const std::size_t kh = d.kernel_h, kw = d.kernel_w;
    // 'same' zero padding; an even kernel puts the extra row/column after the input.
    const std::size_t pad_top = (kh - 1) / 2, pad_left = (kw - 1) / 2;
    std::vector<float> out(std::size_t{d.units} * h * wd);
    std::vector<double> acc(h * wd);
    for (std::size_t o = 0; o < d.units; ++o) {
      std::fill(acc.begin(), acc.end(), static_cast<double>(w.bias[o]));
      for (std::size_t c = 0; c < cin; ++c) {
        const float* plane = in.data() + c * h * wd;
        for (std::size_t i = 0; i < kh; ++i) {
          for (std::size_t j = 0; j < kw; ++j) {
            const double wt = w.kernel[((o * cin + c) * kh + i) * kw + j];
            if (wt == 0.0) continue;
            // output (y, x) reads input (y + i - pad_top, x + j - pad_left)
            const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(pad_top);
            const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(j) - static_cast<std::ptrdiff_t>(pad_left);
            const std::size_t y0 = dy < 0 ? static_cast<std::size_t>(-dy) : 0;
            const std::size_t y1 = dy > 0 ? h - std::min(h, static_cast<std::size_t>(dy)) : h;
            const std::size_t x0 = dx < 0 ? static_cast<std::size_t>(-dx) : 0;
            const std::size_t x1 = dx > 0 ? wd - std::min(wd, static_cast<std::size_t>(dx)) : wd;
            for (std::size_t y = y0; y < y1; ++y) {
              const float* row = plane + static_cast<std::size_t>(static_cast<std::ptrdiff_t>(y) + dy) * wd;
              double* arow = acc.data() + y * wd;
              for (std::size_t x = x0; x < x1; ++x) {
                arow[x] += wt * row[static_cast<std::ptrdiff_t>(x) + dx];
              }
            }
          }
        }
      }
      float* dst = out.data() + o * h * wd;
      for (std::size_t p = 0; p < h * wd; ++p) {
        double v = acc[p];
        if (d.activation == Activation::ReLU && v < 0.0) v = 0.0;
        dst[p] = static_cast<float>(v);
      }
    }
    return out;
  }

  static std::vector<float> max_pool(const std::vector<float>& in, const TensorShape& s, const LayerDescriptor& d) {
    const std::size_t oh = (s.height - d.pool) / d.stride + 1;
    const std::size_t ow = (s.width - d.pool) / d.stride + 1;
    std::vector<float> out(s.channels * oh * ow);
    for (std::size_t c = 0; c < s.channels; ++c) {
      const float* plane = in.data() + c * s.height * s.width;
      for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
          float m = plane[(y * d.stride) * s.width + x * d.stride];
          for (std::size_t i = 0; i < d.pool; ++i) {
            for (std::size_t j = 0; j < d.pool; ++j) {
              m = std::max(m, plane[(y * d.stride + i) * s.width + x * d.stride + j]);
            }
          }
          out[(c * oh + y) * ow + x] = m;
        }
      }
    }
    return out;
  }

  static std::vector<float> dense(const std::vector<float>& in, const LayerDescriptor& d, const LayerWeights& w) {
    std::vector<float> out(d.units);
    const std::size_t n = in.size();
    for (std::size_t o = 0; o < d.units; ++o) {
      double acc = w.bias[o];
      const float* row = w.kernel.data() + o * n;
      for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(row[i]) * in[i];
      if (d.activation == Activation::ReLU && acc < 0.0) acc = 0.0;
      out[o] = static_cast<float>(acc);
    }
    return out;
  }

  static std::vector<double> softmax(const std::vector<float>& logits) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] = std::exp(static_cast<double>(logits[i]) - mx);
      sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
  }

  std::vector<LayerDescriptor> layers_;
  std::vector<LayerWeights> weights_;
  std::size_t input_h_;
  std::size_t input_w_;
  std::vector<TensorShape> shapes_;
};

inline ClassScore forward(const ClassifierModel& model, const SpectrogramMatrix& input) {
  return model.forward(input);
}

/// Type-erased scorer: anything that maps a log-normalized spectrogram to a ClassScore.
using ScoreFunction = std::function<ClassScore(const SpectrogramMatrix&)>;

template <class S>
concept Scorer = requires(const S& s, const SpectrogramMatrix& m) {
  { s(m) } -> std::convertible_to<ClassScore>;
};

/// Indices whose cough probability strictly exceeds `confidence`.
template <Scorer S>
std::vector<std::size_t> classify_windows(const S& scorer, std::span<const SpectrogramMatrix> specs,
                                          double confidence) {
  if (!(confidence >= 0.0 && confidence <= 1.0)) throw ArgumentError("confidence must lie in [0, 1]");
  std::vector<std::size_t> picked;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (ClassScore(scorer(specs[i])).p_cough > confidence) picked.push_back(i);
  }
  return picked;
}

/// Test double for the CNN: p_cough = logistic(gain * mean cell value over rows
/// whose frequency lies in [band_lo, band_hi]). Depends only on those rows.
class ReferenceClassifier {
 public:
  ReferenceClassifier(double band_lo_hz, double band_hi_hz, double gain = 8.0,
                      double sample_rate_hz = kDecimatedSampleRate, std::size_t k_max = kMaxBin)
      : lo_(band_lo_hz), hi_(band_hi_hz), gain_(gain) {
    const double f_top = static_cast<double>(k_max) * sample_rate_hz / static_cast<double>(2 * k_max + 1);
    const double tol = 1e-9 * std::max(1.0, f_top);
    if (!(band_lo_hz >= 0.0 && band_lo_hz < band_hi_hz && band_hi_hz <= f_top + tol)) {
      throw ArgumentError("reference band must satisfy 0 <= lo < hi <= " + std::to_string(f_top) + " Hz");
    }
    if (!(gain > 0.0) || !std::isfinite(gain)) throw ArgumentError("reference gain must be positive");
  }

  double band_lo() const noexcept { return lo_; }
  double band_hi() const noexcept { return hi_; }
  double gain() const noexcept { return gain_; }

  /// Rows of `s` that fall inside the band.
  std::pair<std::size_t, std::size_t> band_rows(const SpectrogramMatrix& s) const {
    const double tol = 1e-9 * std::max(1.0, hi_);
    std::size_t first = s.values.rows(), last = 0;
    for (std::size_t k = 0; k < s.values.rows(); ++k) {
      const double f = s.frequency(k);
      if (f >= lo_ - tol && f <= hi_ + tol) {
        first = std::min(first, k);
        last = k;
      }
    }
    if (first > last) throw ArgumentError("reference band contains no spectrogram rows");
    return {first, last};
  }

  ClassScore operator()(const SpectrogramMatrix& s) const {
    const auto [first, last] = band_rows(s);
    double sum = 0.0;
    for (std::size_t k = first; k <= last; ++k) {
      for (std::size_t n = 0; n < s.values.cols(); ++n) sum += s.values(k, n);
    }
    const double mean = sum / static_cast<double>((last - first + 1) * s.values.cols());
    const double p = 1.0 / (1.0 + std::exp(-gain_ * mean));
    return ClassScore{p, 1.0 - p};
  }

 private:
  double lo_;
  double hi_;
  double gain_;
};

inline ReferenceClassifier reference_classifier(double band_lo_hz, double band_hi_hz, double gain = 8.0) {
  return ReferenceClassifier(band_lo_hz, band_hi_hz, gain);
}

// ---------------------------------------------------------------------------
// CNNW codec

inline constexpr char kCnnwMagic[4] = {'C', 'N', 'N', 'W'};
inline constexpr std::uint32_t kCnnwVersion = 1;
inline constexpr std::uint8_t kPaddingSame = 0;

namespace detail {

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> b) : bytes_(b) {}
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return bytes_[pos_++];
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }

 private:
  void need(std::size_t n, const char* what) const {
    if (remaining() < n) throw FormatError(std::string("CNNW truncated while reading ") + what);
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

inline void put_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

inline void put_f32_le(std::vector<std::uint8_t>& out, float v) { put_u32_le(out, std::bit_cast<std::uint32_t>(v)); }

}  // namespace detail

inline std::vector<std::uint8_t> save_model(const ClassifierModel& model) {
  std::vector<std::uint8_t> out(kCnnwMagic, kCnnwMagic + 4);
  detail::put_u32_le(out, kCnnwVersion);
  out.push_back(kPaddingSame);
  detail::put_u32_le(out, static_cast<std::uint32_t>(model.layers().size()));
  for (const auto& d : model.layers()) {
    out.push_back(static_cast<std::uint8_t>(d.kind));
    switch (d.kind) {
      case LayerKind::Conv2D:
        detail::put_u32_le(out, d.units);
        detail::put_u32_le(out, d.kernel_h);
        detail::put_u32_le(out, d.kernel_w);
        detail::put_u32_le(out, static_cast<std::uint32_t>(d.activation));
        break;
      case LayerKind::MaxPool2D:
        detail::put_u32_le(out, d.pool);
        detail::put_u32_le(out, d.stride);
        break;
      case LayerKind::Dropout: detail::put_f32_le(out, d.dropout_rate); break;
      case LayerKind::Dense:
        detail::put_u32_le(out, d.units);
        detail::put_u32_le(out, static_cast<std::uint32_t>(d.activation));
        break;
      case LayerKind::Flatten:
      case LayerKind::Softmax: break;
    }
  }
  for (const auto& w : model.weights()) {
    for (float v : w.kernel) detail::put_f32_le(out, v);
    for (float v : w.bias) detail::put_f32_le(out, v);
  }
  return out;
}

/// Parses and validates a CNNW file against a 45x100x1 input (or the given input size).
inline ClassifierModel load_model(std::span<const std::uint8_t> bytes, std::size_t input_h = kBins,
                                  std::size_t input_w = kFrames) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kCnnwMagic, 4) != 0) throw FormatError("bad CNNW magic");
  detail::ByteReader r(bytes.subspan(4));
  const std::uint32_t version = r.u32("version");
  if (version != kCnnwVersion) throw FormatError("unsupported CNNW version " + std::to_string(version));
  const std::uint8_t padding = r.u8("padding mode");
  if (padding != kPaddingSame) throw FormatError("unsupported padding mode " + std::to_string(padding));
  const std::uint32_t count = r.u32("layer count");
  if (count == 0 || count > 4096) throw FormatError("implausible layer count " + std::to_string(count));

  std::vector<LayerDescriptor> layers;
  layers.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    LayerDescriptor d;
    const std::uint8_t kind = r.u8("layer kind");
    if (kind > static_cast<std::uint8_t>(LayerKind::Softmax)) {
      throw FormatError("layer " + std::to_string(i) + ": unknown kind " + std::to_string(kind));
    }
    d.kind = static_cast<LayerKind>(kind);
    switch (d.kind) {
      case LayerKind::Conv2D:
        d.units = r.u32("conv channels");
        d.kernel_h = r.u32("conv kernel");
        d.kernel_w = r.u32("conv kernel");
        d.activation = static_cast<Activation>(r.u32("activation"));
        break;
      case LayerKind::MaxPool2D:
        d.pool = r.u32("pool size");
        d.stride = r.u32("pool stride");
        break;
      case LayerKind::Dropout: d.dropout_rate = r.f32("dropout rate"); break;
      case LayerKind::Dense:
        d.units = r.u32("dense units");
        d.activation = static_cast<Activation>(r.u32("activation"));
        break;
      case LayerKind::Flatten:
      case LayerKind::Softmax: break;
    }
    layers.push_back(d);
  }

  const auto shapes = infer_shapes(layers, input_h, input_w);
  std::vector<LayerWeights> weights(layers.size());
  std::size_t last_weighted = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const TensorShape in = i == 0 ? TensorShape{1, input_h, input_w, false} : shapes[i - 1];
    const auto [nk, nb] = expected_weight_counts(layers[i], in);
    if (nk + nb == 0) continue;
    last_weighted = i;
    if (r.remaining() < (nk + nb) * 4) {
      throw ValidationError(detail::layer_label(i, layers[i]) + ": weight data truncated, expected " +
                            std::to_string(nk + nb) + " floats but only " + std::to_string(r.remaining() / 4) +
                            " remain");
    }
    weights[i].kernel.resize(nk);
    weights[i].bias.resize(nb);
    for (auto& v : weights[i].kernel) v = r.f32("weights");
    for (auto& v : weights[i].bias) v = r.f32("biases");
  }
  if (r.remaining() != 0) {
    throw ValidationError(detail::layer_label(last_weighted, layers[last_weighted]) + ": " +
                          std::to_string(r.remaining()) + " unexpected trailing bytes after the last tensor");
  }
  return ClassifierModel(std::move(layers), std::move(weights), input_h, input_w);
}

inline ClassifierModel load_model_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open model file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return load_model(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

inline void save_model_file(const std::filesystem::path& path, const ClassifierModel& model) {
  const auto bytes = save_model(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write model file " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

/// Deterministic synthetic weights: uniform in +-scale * sqrt(3 / fan_in), biases in +-0.05.
inline ClassifierModel random_model(std::vector<LayerDescriptor> layers, std::uint64_t seed, double scale = 1.0,
                                    std::size_t input_h = kBins, std::size_t input_w = kFrames) {
  const auto shapes = infer_shapes(layers, input_h, input_w);
  std::mt19937_64 rng(seed);
  auto uniform = [&rng](double half_width) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return static_cast<float>((2.0 * u - 1.0) * half_width);
  };
  std::vector<LayerWeights> weights(layers.size());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const TensorShape in = i == 0 ? TensorShape{1, input_h, input_w, false} : shapes[i - 1];
    const auto [nk, nb] = expected_weight_counts(layers[i], in);
    if (nk == 0) continue;
    const double fan_in = static_cast<double>(nk) / static_cast<double>(nb);
    const double half = scale * std::sqrt(3.0 / fan_in);
    weights[i].kernel.resize(nk);
    weights[i].bias.resize(nb);
    for (auto& v : weights[i].kernel) v = uniform(half);
    for (auto& v : weights[i].bias) v = uniform(0.05);
  }
  return ClassifierModel(std::move(layers), std::move(weights), input_h, input_w);
}

}  // namespace coughxai

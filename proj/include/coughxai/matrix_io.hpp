#pragma once

#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "coughxai/grid.hpp"
#include "coughxai/text_format.hpp"

namespace coughxai {

// Matrix text file:
//   K=<rows-1> N=<cols> fs=<Hz> scale=<linear|lognorm|map>
//   then K+1 lines of N space-separated values (line k = frequency index k).

struct MatrixFile {
  Grid values;
  double sample_rate_hz = kDecimatedSampleRate;
  Scale scale = Scale::Linear;
};

inline void write_matrix(std::ostream& os, const Grid& g, double fs, Scale scale) {
  if (g.rows() == 0 || g.cols() == 0) throw ArgumentError("cannot serialize an empty matrix");
  os << "K=" << g.rows() - 1 << " N=" << g.cols() << " fs=" << format_double(fs)
     << " scale=" << to_string(scale) << '\n';
  for (std::size_t r = 0; r < g.rows(); ++r) {
    for (std::size_t c = 0; c < g.cols(); ++c) {
      if (c) os << ' ';
      os << format_double(g(r, c));
    }
    os << '\n';
  }
}

inline MatrixFile read_matrix(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("matrix file is empty");
  long long k = -1, n = -1;
  double fs = 0.0;
  bool have_scale = false;
  Scale scale = Scale::Linear;
  for (auto tok : split_any(line)) {
    const auto eq = tok.find('=');
    if (eq == std::string_view::npos) throw FormatError("bad matrix header token '" + std::string(tok) + "'");
    const auto key = tok.substr(0, eq);
    const auto val = tok.substr(eq + 1);
    if (key == "K") k = parse_integer(val);
    else if (key == "N") n = parse_integer(val);
    else if (key == "fs") fs = parse_double(val);
    else if (key == "scale") { scale = parse_scale(val); have_scale = true; }
    else throw FormatError("unknown matrix header key '" + std::string(key) + "'");
  }
  if (k < 0 || n < 1 || !(fs > 0.0) || !have_scale) {
    throw FormatError("matrix header must define K>=0, N>=1, fs>0 and scale");
  }
  const auto rows = static_cast<std::size_t>(k + 1);
  const auto cols = static_cast<std::size_t>(n);
  Grid g(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!std::getline(is, line)) {
      throw FormatError("matrix truncated: expected " + std::to_string(rows) + " rows, got " +
                        std::to_string(r));
    }
    const auto fields = split_any(line);
    if (fields.size() != cols) {
      throw FormatError("matrix row " + std::to_string(r) + " has " + std::to_string(fields.size()) +
                        " values, expected " + std::to_string(cols));
    }
    for (std::size_t c = 0; c < cols; ++c) g(r, c) = parse_double(fields[c]);
  }
  while (std::getline(is, line)) {
    if (!trim(line).empty()) throw FormatError("unexpected trailing content after matrix rows");
  }
  return MatrixFile{std::move(g), fs, scale};
}

inline MatrixFile read_matrix_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open matrix file " + path.string());
  try {
    return read_matrix(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline void write_matrix_file(const std::filesystem::path& path, const Grid& g, double fs, Scale scale) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write matrix file " + path.string());
  write_matrix(out, g, fs, scale);
  if (!out) throw DataError("failed writing matrix file " + path.string());
}

inline void save_spectrogram(const std::filesystem::path& path, const SpectrogramMatrix& s) {
  write_matrix_file(path, s.values, s.sample_rate_hz, s.scale);
}

inline SpectrogramMatrix load_spectrogram(const std::filesystem::path& path) {
  auto m = read_matrix_file(path);
  if (m.scale == Scale::Map) throw FormatError(path.string() + ": expected a spectrogram, found scale=map");
  return SpectrogramMatrix{std::move(m.values), m.sample_rate_hz, m.scale};
}

inline void save_map(const std::filesystem::path& path, const OcclusionMap& m,
                     double fs = kDecimatedSampleRate) {
  write_matrix_file(path, m.values, fs, Scale::Map);
}

inline OcclusionMap load_map(const std::filesystem::path& path) {
  auto m = read_matrix_file(path);
  if (m.scale != Scale::Map) throw FormatError(path.string() + ": expected scale=map");
  for (double v : m.values.data()) {
    if (!(v >= 0.0 && v <= 1.0)) throw FormatError(path.string() + ": map values must lie in [0,1]");
  }
  return OcclusionMap{std::move(m.values)};
}

}  // namespace coughxai

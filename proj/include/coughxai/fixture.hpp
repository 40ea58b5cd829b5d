#pragma once

// Seeded synthetic corpus: 17 patients with tone-burst "coughs" separated by
// silent windows, a matching group config, pipeline configs, and CNNW weights.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "coughxai/audio_io.hpp"
#include "coughxai/cnn.hpp"
#include "coughxai/errors.hpp"
#include "coughxai/grid.hpp"
#include "coughxai/text_format.hpp"

namespace coughxai {

struct FixturePatient {
  std::string id;
  std::string diagnosis;
};

/// Diagnosis counts: COPD 6, lung cancer 2, pneumonia 3, ARD 3, asthma, sarcoidosis, bronchiectasis 1 each.
inline std::vector<FixturePatient> fixture_patients() {
  std::vector<FixturePatient> out;
  const std::pair<const char*, int> counts[] = {{"copd", 6},   {"lung_cancer", 2}, {"pneumonia", 3},     {"ard", 3},
                                                {"asthma", 1}, {"sarcoidosis", 1}, {"bronchiectasis", 1}};
  int next = 1;
  for (const auto& [dx, n] : counts) {
    for (int i = 0; i < n; ++i) {
      char id[16];
      std::snprintf(id, sizeof id, "P%02d", next++);
      out.push_back({id, dx});
    }
  }
  return out;
}

inline constexpr std::string_view kFixtureGroupRules =
    "class chronic = copd lung_cancer asthma sarcoidosis bronchiectasis\n"
    "class nonchronic = pneumonia ard\n"
    "group G1 = chronic : nonchronic\n"
    "group G2 = copd : * -copd\n"
    "group G3 = copd : * -copd -lung_cancer\n"
    "group G4 = copd : ard pneumonia\n"
    "group G5 = copd : chronic -copd\n"
    "group G6 = copd : lung_cancer\n";

/// Raw-rate samples per analysis window (one spectrogram after decimation).
inline constexpr std::size_t kFixtureWindow = kChunkLength * kDecimationFactor;

namespace detail {

/// Portable draws from mt19937_64 (std distributions differ between libraries).
class FixtureRng {
 public:
  explicit FixtureRng(std::uint64_t seed) : rng_(seed) {}

  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 rng_;
};

struct Tone {
  double freq_hz;
  double amplitude;
};

inline std::vector<Tone> patient_tones(const std::string& diagnosis, FixtureRng& rng) {
  std::vector<Tone> tones;
  if (diagnosis == "copd") {
    for (int i = 0; i < 6; ++i) tones.push_back({rng.uniform(900.0, 2900.0), rng.uniform(0.05, 0.09)});
  } else {
    tones.push_back({rng.uniform(1400.0, 1600.0), rng.uniform(0.20, 0.28)});
    tones.push_back({rng.uniform(1700.0, 2000.0), rng.uniform(0.06, 0.10)});
  }
  return tones;
}

inline void append_cough(std::vector<double>& out, const std::vector<Tone>& tones, FixtureRng& rng) {
  constexpr double fs = kRawSampleRate;
  const auto n = static_cast<double>(kFixtureWindow);
  const double start = 0.2 * n, length = 0.4 * n;
  for (std::size_t i = 0; i < kFixtureWindow; ++i) {
    double v = 0.002 * rng.normal();
    const double t = (static_cast<double>(i) - start) / length;
    if (t >= 0.0 && t <= 1.0) {
      const double env = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * t));
      for (const auto& tone : tones) {
        v += env * tone.amplitude * std::sin(2.0 * std::numbers::pi * tone.freq_hz * static_cast<double>(i) / fs);
      }
    }
    out.push_back(std::clamp(v, -1.0, 1.0));
  }
}

}  // namespace detail

struct FixtureSummary {
  std::filesystem::path manifest;
  std::filesystem::path groups;
  std::filesystem::path config;
  std::filesystem::path cnn_config;
  std::filesystem::path model;
  std::size_t patients = 0;
};

/// Writes the corpus under `out_dir`. Output bytes depend only on `seed`.
inline FixtureSummary gen_fixture(std::uint64_t seed, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "audio");
  detail::FixtureRng rng(seed);
  const auto patients = fixture_patients();

  std::ofstream manifest(out_dir / "manifest.txt");
  std::ofstream groups(out_dir / "groups.txt");
  if (!manifest || !groups) throw ArgumentError("cannot write fixture files under " + out_dir.string());
  manifest << "# patient_id wav_path\n";
  groups << "# patient_id diagnosis\n";
  for (const auto& p : patients) {
    const auto tones = detail::patient_tones(p.diagnosis, rng);
    std::vector<double> samples;
    samples.reserve(6 * kFixtureWindow + 1000);
    for (const bool cough : {false, true, true, false, true, true}) {
      if (cough) detail::append_cough(samples, tones, rng);
      else samples.insert(samples.end(), kFixtureWindow, 0.0);
    }
    samples.insert(samples.end(), 1000, 0.0);
    const std::string rel = "audio/" + p.id + ".wav";
    write_wav_file(out_dir / rel, AudioClip{std::move(samples), kRawSampleRate});
    manifest << p.id << ' ' << rel << '\n';
    groups << "patient " << p.id << ' ' << p.diagnosis << '\n';
  }
  groups << '\n' << kFixtureGroupRules;

  const auto band_edge = [](std::size_t k) {
    return static_cast<double>(k) * kDecimatedSampleRate / static_cast<double>(kFrameLength);
  };
  const std::string common =
      "manifest = manifest.txt\n"
      "groups = groups.txt\n"
      "confidence = 0.9\n"
      "thresholds = 0.5,0.6,0.7,0.8,0.9\n";
  {
    std::ofstream cfg(out_dir / "pipeline.conf");
    cfg << "# reference scorer over the fixture's cough band\n"
        << common << "reference_band = " << format_double(band_edge(8)) << ',' << format_double(band_edge(30))
        << "\nreference_gain = 8\n";
  }
  {
    std::ofstream cfg(out_dir / "pipeline_cnn.conf");
    cfg << "# synthetic CNN weights (untrained)\n" << common << "model = model.cnnw\n";
  }
  save_model_file(out_dir / "model.cnnw", random_model(default_layer_stack(), seed));

  return {out_dir / "manifest.txt", out_dir / "groups.txt", out_dir / "pipeline.conf",
          out_dir / "pipeline_cnn.conf", out_dir / "model.cnnw", patients.size()};
}

}  // namespace coughxai

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>

#include "coughxai/coughxai.hpp"
#include "oracles/oracles.hpp"

using namespace coughxai;
namespace fs = std::filesystem;

namespace {

/// Collects the first few failure messages of a criterion.
struct Outcome {
  bool ok = true;
  std::vector<std::string> notes;

  void require(bool cond, const std::string& what) {
    if (cond) return;
    ok = false;
    if (notes.size() < 5) notes.push_back(what);
  }
};

bool rel_close(double got, double want, double tol) {
  if (got == want) return true;
  return std::abs(got - want) <= tol * std::abs(want);
}

std::string str(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Grid random_grid(std::mt19937_64& rng, double lo, double hi, std::size_t rows = kBins, std::size_t cols = kFrames) {
  Grid g(rows, cols);
  for (double& v : g.data()) v = lo + (hi - lo) * oracle::uniform(rng);
  return g;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome feature_oracle() {
  Outcome o;
  std::mt19937_64 rng(101);
  const auto t0 = std::chrono::steady_clock::now();
  for (int trial = 0; trial < 50; ++trial) {
    Grid g(kBins, kFrames);
    for (double& v : g.data()) v = std::pow(oracle::uniform(rng), 2.0);
    const auto got = extract_features(make_spectrogram(g)).values();
    const auto want = oracle::features(oracle::to_matrix(g));
    for (std::size_t i = 0; i < 7; ++i) {
      o.require(rel_close(got[i], want[i], 1e-9), "trial " + std::to_string(trial) + " " +
                                                      std::string(SpectralFeatures::names[i]) + ": " + str(got[i]) +
                                                      " vs " + str(want[i]));
    }
  }
  const double secs = seconds_since(t0);
  o.require(secs < 5.0, "runtime " + str(secs) + " s");
  return o;
}

Outcome closed_form_features() {
  Outcome o;
  const auto flat = extract_features(make_spectrogram(Grid(kBins, kFrames, 0.37)));
  o.require(std::abs(flat.sp_f - 1.0) <= 1e-9, "flat SpF " + str(flat.sp_f));
  o.require(flat.sp_fx == 0.0, "flat SpFx " + str(flat.sp_fx));
  o.require(std::abs(flat.sp_re - std::log(45.0)) <= 1e-9, "flat SpRE " + str(flat.sp_re));
  o.require(std::abs(flat.ac - 44.0 / 45.0) <= 1e-12, "flat AC " + str(flat.ac));
  for (std::size_t k : {0u, 10u, 44u}) {
    Grid g(kBins, kFrames);
    for (std::size_t n = 0; n < kFrames; ++n) g(k, n) = 2.5;
    const auto single = extract_features(make_spectrogram(g));
    o.require(single.sp_bw == 0.0, "single bin " + std::to_string(k) + " SpBW " + str(single.sp_bw));
    o.require(single.sp_re == 0.0, "single bin " + std::to_string(k) + " SpRE " + str(single.sp_re));
  }
  return o;
}

Outcome scale_invariance() {
  Outcome o;
  std::mt19937_64 rng(103);
  for (int trial = 0; trial < 20; ++trial) {
    // bounded away from zero so the flatness log offset stays below the tolerance
    const auto g = random_grid(rng, 0.5, 1.5);
    const auto base = extract_features(make_spectrogram(g));
    for (double c : {1e-3, 1.0, 1e3}) {
      Grid scaled = g;
      for (double& v : scaled.data()) v *= c;
      const auto f = extract_features(make_spectrogram(scaled));
      const auto a = base.values(), b = f.values();
      for (std::size_t i = 0; i < 7; ++i) {
        const double want = SpectralFeatures::names[i] == "sp_fx" ? c * a[i] : a[i];
        o.require(rel_close(b[i], want, 1e-9), std::string(SpectralFeatures::names[i]) + " c=" + str(c) + ": " +
                                                   str(b[i]) + " vs " + str(want));
      }
    }
  }
  return o;
}

Outcome weighting() {
  Outcome o;
  const auto s0 = make_spectrogram(Grid(2, 2, std::vector<double>{2, 3, 4, 5}));
  const OcclusionMap m{Grid(2, 2, std::vector<double>{0.6, 0.4, 0.9, 0.5})};
  const auto mv = weight_spectrogram(s0, m, 0.5, WeightMode::MapValue).values;
  o.require(std::abs(mv(0, 0) - 1.2) < 1e-15 && mv(0, 1) == 0.0 && std::abs(mv(1, 0) - 3.6) < 1e-15 && mv(1, 1) == 0.0,
            "MapValue toy");
  const auto ind = weight_spectrogram(s0, m, 0.5, WeightMode::Indicator).values;
  o.require(ind == Grid(2, 2, std::vector<double>{2, 0, 4, 0}), "Indicator toy");
  for (auto mode : {WeightMode::MapValue, WeightMode::Indicator}) {
    const auto one = weight_spectrogram(s0, m, 1.0, mode).values;
    o.require(one == Grid(2, 2), "th = 1 should zero everything");
  }

  std::mt19937_64 rng(104);
  for (int pair = 0; pair < 100; ++pair) {
    const auto s = make_spectrogram(random_grid(rng, 0.0, 10.0, 6, 9));
    const OcclusionMap map{random_grid(rng, 0.0, 1.0, 6, 9)};
    for (auto mode : {WeightMode::MapValue, WeightMode::Indicator}) {
      Grid prev = weight_spectrogram(s, map, 0.0, mode).values;
      for (double th : {0.25, 0.5, 0.75, 1.0}) {
        const Grid cur = weight_spectrogram(s, map, th, mode).values;
        for (std::size_t i = 0; i < cur.size(); ++i) {
          o.require(cur.data()[i] <= prev.data()[i], "pair " + std::to_string(pair) + " not monotone at th " + str(th));
        }
        prev = cur;
      }
    }
  }
  return o;
}

Outcome occlusion_locality() {
  Outcome o;
  const SpectrogramMatrix axis = make_spectrogram(Grid(kBins, kFrames));
  const std::size_t band_lo = 12, band_hi = 23;
  const double half_bin = axis.frequency(1) / 2.0;
  const ReferenceClassifier ref(axis.frequency(band_lo) - half_bin, axis.frequency(band_hi) + half_bin);
  const OcclusionConfig cfg;
  std::mt19937_64 rng(105);
  for (int trial = 0; trial < 20; ++trial) {
    Grid g = random_grid(rng, 0.0, 1.0);
    const auto input = make_spectrogram(std::move(g), kDecimatedSampleRate, Scale::LogNormalized);
    const auto coarse = occlusion_importance(ref, input, cfg);
    for (std::size_t i = 0; i < coarse.row_starts.size(); ++i) {
      const std::size_t r0 = coarse.row_starts[i], r1 = r0 + cfg.patch_h - 1;
      if (r1 >= band_lo && r0 <= band_hi) continue;
      for (std::size_t j = 0; j < coarse.col_starts.size(); ++j) {
        o.require(coarse.importance(i, j) == 0.0, "trial " + std::to_string(trial) + " patch (" + std::to_string(i) +
                                                      "," + std::to_string(j) + ") = " + str(coarse.importance(i, j)));
      }
    }
    const auto map1 = occlusion_map(ref, input, cfg, 1);
    for (double v : map1.values.data()) o.require(v >= 0.0 && v <= 1.0, "map value " + str(v));
    for (unsigned threads : {4u, 8u}) {
      o.require(occlusion_map(ref, input, cfg, threads) == map1, std::to_string(threads) + " threads differ");
    }
  }
  return o;
}

Outcome cnn_oracle() {
  Outcome o;
  std::mt19937_64 rng(106);
  const auto layers = cough_layer_stack(2, 3, 3, 4, 6);
  for (int m = 0; m < 100; ++m) {
    const auto model = random_model(layers, 5000 + static_cast<std::uint64_t>(m), 1.5);
    const auto x = random_grid(rng, 0.0, 1.0);
    const auto got = model.forward_probabilities(x);
    const auto want = oracle::cnn_forward(model, x);
    o.require(got.size() == 2 && want.size() == 2, "output width");
    if (got.size() != 2 || want.size() != 2) continue;
    for (std::size_t i = 0; i < 2; ++i) {
      o.require(std::abs(got[i] - want[i]) <= 1e-5, "model " + std::to_string(m) + ": " + str(got[i]) + " vs " + str(want[i]));
    }
    o.require(std::abs(got[0] + got[1] - 1.0) <= 1e-6, "softmax sum " + str(got[0] + got[1]));

    if (m % 10 == 0) {
      std::vector<LayerDescriptor> kept;
      std::vector<LayerWeights> weights;
      for (std::size_t i = 0; i < model.layers().size(); ++i) {
        if (model.layers()[i].kind == LayerKind::Dropout) continue;
        kept.push_back(model.layers()[i]);
        weights.push_back(model.weights()[i]);
      }
      o.require(ClassifierModel(kept, weights).forward_probabilities(x) == got,
                "model " + std::to_string(m) + ": dropout changes inference output");
    }
  }
  return o;
}

Outcome mann_whitney_exactness() {
  Outcome o;
  std::mt19937_64 rng(107);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t total = 2 + rng() % 9;
    const std::size_t na = 1 + rng() % (total - 1), nb = total - na;
    const bool ties = trial % 2 == 0;
    std::vector<double> a(na), b(nb);
    for (double& v : a) v = ties ? static_cast<double>(rng() % 4) : oracle::uniform(rng);
    for (double& v : b) v = ties ? static_cast<double>(rng() % 4) : oracle::uniform(rng);
    const double got = mann_whitney_u(a, b).p_value, want = oracle::mann_whitney_enumerated_p(a, b);
    o.require(std::abs(got - want) <= 1e-12, "trial " + std::to_string(trial) + ": " + str(got) + " vs " + str(want));
  }
  const auto r = mann_whitney_u(std::vector<double>{1, 2}, std::vector<double>{3, 4});
  o.require(r.p_value == 1.0 / 3.0, "{1,2} vs {3,4}: p = " + str(r.p_value));
  return o;
}

Outcome protocol_routing() {
  Outcome o;
  const std::vector<double> normal_a{-1.28, -0.52, 0.0, 0.52, 1.28, -0.84, 0.84, -0.25, 0.25};
  std::vector<double> normal_b = normal_a;
  for (double& v : normal_b) v = 2.0 * v + 3.0;
  const std::vector<double> skewed{1, 1, 1, 1, 1, 1, 1, 2, 100};
  const auto both_normal = run_protocol(normal_a, normal_b);
  o.require(both_normal.test_kind == TestKind::StudentT, "normal/normal -> " + std::string(to_string(both_normal.test_kind)));
  const auto one_skewed = run_protocol(normal_a, skewed);
  o.require(one_skewed.test_kind == TestKind::MannWhitneyU, "skewed -> " + std::string(to_string(one_skewed.test_kind)));
  const auto size_two = run_protocol(std::vector<double>{0.1, 0.2}, normal_b);
  o.require(size_two.test_kind == TestKind::MannWhitneyU, "size two -> " + std::string(to_string(size_two.test_kind)));
  return o;
}

Outcome spectrogram_checks() {
  Outcome o;
  std::vector<double> chunk(kChunkLength);
  const double f10 = 10.0 * kDecimatedSampleRate / static_cast<double>(kFrameLength);
  for (std::size_t i = 0; i < chunk.size(); ++i) {
    chunk[i] = std::cos(2.0 * std::numbers::pi * f10 * static_cast<double>(i) / kDecimatedSampleRate);
  }
  const auto s = compute_spectrogram(chunk);
  o.require(s.values.rows() == 45 && s.values.cols() == 100,
            "shape " + std::to_string(s.values.rows()) + "x" + std::to_string(s.values.cols()));
  o.require(s.frequency(10) == f10, "f[10] = " + str(s.frequency(10)));
  for (std::size_t n = 0; n < s.values.cols(); ++n) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < s.values.rows(); ++k) {
      if (s.values(k, n) > s.values(best, n)) best = k;
    }
    o.require(best == 10, "column " + std::to_string(n) + " peaks at " + std::to_string(best));
  }

  std::mt19937_64 rng(109);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> frame(kFrameLength);
    for (double& v : frame) v = 2.0 * oracle::uniform(rng) - 1.0;
    const auto p = frame_psd(frame);
    double total = 0.0;
    for (double v : p) total += v;
    const double want = static_cast<double>(kFrameLength) * oracle::windowed_power(frame);
    o.require(rel_close(total, want, 1e-9), "Parseval " + str(total) + " vs " + str(want));
  }
  return o;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(COUGHXAI_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path work_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "coughxai_acceptance";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Outcome end_to_end() {
  Outcome o;
  const auto root = work_dir();
  const auto t0 = std::chrono::steady_clock::now();
  gen_fixture(7, root / "fixture");
  auto cfg = load_pipeline_config(root / "fixture" / "pipeline.conf");
  std::vector<fs::path> outs;
  for (auto [name, threads] : {std::pair{"run_a", 1u}, std::pair{"run_b", 1u}, std::pair{"run_c", 4u}}) {
    cfg.output_dir = root / name;
    cfg.threads = threads;
    const auto start = std::chrono::steady_clock::now();
    const auto rep = run_pipeline(cfg);
    const double secs = seconds_since(start);
    o.require(secs < 60.0, std::string(name) + " took " + str(secs) + " s");
    o.require(rep.groups.size() == 6, "groups " + std::to_string(rep.groups.size()));
    o.require(rep.results.size() == 210, "result rows " + std::to_string(rep.results.size()));
    outs.push_back(cfg.output_dir);
  }
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(outs[0])) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), outs[0]);
    const auto bytes = slurp(e.path());
    o.require(bytes == slurp(outs[1] / rel), rel.string() + " differs between runs");
    o.require(bytes == slurp(outs[2] / rel), rel.string() + " differs between thread counts");
    ++files;
  }
  o.require(files > 0, "no outputs");
  std::ifstream in(outs[0] / "results.csv");
  o.require(read_results_csv(in).size() == 210, "results.csv row count");
  o.notes.push_back("total " + str(seconds_since(t0)) + " s");
  return o;
}

Outcome report_shape() {
  Outcome o;
  const auto root = work_dir();
  const auto results_csv = root / "run_a" / "results.csv";
  if (!fs::exists(results_csv)) {
    gen_fixture(7, root / "fixture");
    auto cfg = load_pipeline_config(root / "fixture" / "pipeline.conf");
    cfg.output_dir = root / "run_a";
    run_pipeline(cfg);
  }
  const auto report = root / "report_cli.txt";
  o.require(run_cli("report " + results_csv.string() + " --out " + report.string()) == 0, "report subcommand failed");
  std::ifstream rin(results_csv);
  const auto results = read_results_csv(rin);
  std::map<std::string, std::map<std::string, bool>> significant;  // group -> "th/feature" -> mark
  for (const auto& r : results) significant[r.group][format_double(r.threshold) + "/" + r.feature] = r.significant;

  std::istringstream text(slurp(report));
  std::string line, group;
  std::map<std::string, std::size_t> rows;
  std::size_t headers = 0;
  while (std::getline(text, line)) {
    const auto f = split_any(line);
    if (f.size() == 1) {
      group = std::string(f[0]);
    } else if (f.size() == 8 && f[0] == "Th.") {
      ++headers;
      o.require(f[1] == "AC" && f[7] == "SpR", "header " + line);
    } else if (f.size() == 8) {
      ++rows[group];
      for (std::size_t c = 0; c < 7; ++c) {
        const bool marked = f[c + 1].back() == '*';
        const auto key = std::string(f[0]) + "/" + std::string(SpectralFeatures::names[c]);
        o.require(significant[group].count(key) && significant[group][key] == marked, group + " " + key + " mark");
      }
    }
  }
  o.require(headers == 6, "headers " + std::to_string(headers));
  o.require(rows.size() == 6, "groups " + std::to_string(rows.size()));
  for (const auto& [g, n] : rows) o.require(n == 5, g + " has " + std::to_string(n) + " rows");
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"feature formulas match the direct-summation oracle", feature_oracle},
      {"closed-form feature values", closed_form_features},
      {"feature scale invariance", scale_invariance},
      {"map weighting examples and monotonicity", weighting},
      {"occlusion locality, range and thread invariance", occlusion_locality},
      {"CNN forward pass matches the nested-loop oracle", cnn_oracle},
      {"Mann-Whitney exact p matches enumeration", mann_whitney_exactness},
      {"test selection routing", protocol_routing},
      {"spectrogram tone peak, Parseval and shape", spectrogram_checks},
      {"end-to-end reproducibility on the seeded fixture", end_to_end},
      {"report layout per group", report_shape},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.ok = false;
      o.notes.push_back(std::string("exception: ") + e.what());
    }
    std::cout << (o.ok ? "PASS" : "FAIL") << " [" << i + 1 << "] " << criteria[i].first;
    for (const auto& n : o.notes) std::cout << " | " << n;
    std::cout << std::endl;
    failures += o.ok ? 0 : 1;
  }
  std::cout << (criteria.size() - failures) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failures == 0 ? 0 : 1;
}

#pragma once

// End-to-end run: per patient decode -> decimate -> chunk -> spectrograms ->
// classify -> occlusion maps -> profile -> weighted spectrograms -> features,
// then group tests and report files. Stage helpers are shared with the CLI so
// chaining subcommands reproduces a full run.

#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "coughxai/audio_io.hpp"
#include "coughxai/cnn.hpp"
#include "coughxai/config.hpp"
#include "coughxai/errors.hpp"
#include "coughxai/features.hpp"
#include "coughxai/groups.hpp"
#include "coughxai/matrix_io.hpp"
#include "coughxai/report_io.hpp"
#include "coughxai/spectrogram.hpp"
#include "coughxai/stats.hpp"
#include "coughxai/xai.hpp"

namespace coughxai {

inline constexpr int kRunMetadataVersion = 1;

/// Re-throws the active error with `context` prefixed, keeping its type.
[[noreturn]] inline void rethrow_with_context(const std::string& context) {
  try {
    throw;
  } catch (const UnsupportedFormatError& e) {
    throw UnsupportedFormatError(context + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(context + ": " + e.what());
  } catch (const ArgumentError& e) {
    throw ArgumentError(context + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(context + ": " + e.what());
  } catch (const DegenerateInputError& e) {
    throw DegenerateInputError(context + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(context + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(context + ": " + e.what());
  } catch (const Error& e) {
    throw Error(context + ": " + e.what());
  }
}

template <class F>
auto with_context(const std::string& context, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error&) {
    rethrow_with_context(context);
  }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
  if (!out) throw ConfigError("failed writing " + path.string());
}

/// Decimated 45x100 linear spectrograms, one per complete chunk.
inline std::vector<SpectrogramMatrix> clip_spectrograms(const AudioClip& raw, const DecimationConfig& dec) {
  const AudioClip low = decimate(raw, dec);
  std::vector<SpectrogramMatrix> out;
  for (const auto& chunk : segment_chunks(low.samples, kChunkLength)) {
    out.push_back(compute_spectrogram(chunk, default_psd_estimator(), kFrames, static_cast<double>(low.sample_rate_hz)));
  }
  return out;
}

/// Builds the configured scorer: CNN weights or the band reference classifier.
inline ScoreFunction make_scorer(const PipelineConfig& cfg) {
  if (!cfg.model.empty()) {
    auto model = std::make_shared<const ClassifierModel>(
        with_context("model " + cfg.model.string(), [&] { return load_model_file(cfg.model); }));
    return [model](const SpectrogramMatrix& s) { return model->forward(s); };
  }
  const auto& band = *cfg.reference;
  ReferenceClassifier ref = with_context("reference_band", [&] { return ReferenceClassifier(band.lo_hz, band.hi_hz, band.gain); });
  return [ref](const SpectrogramMatrix& s) { return ref(s); };
}

inline std::string describe_scorer(const PipelineConfig& cfg) {
  if (!cfg.model.empty()) return "cnn";
  return "reference";
}

struct WindowRecord {
  std::size_t source = 0;  // index into the patient's WAV list
  std::size_t chunk = 0;
  ClassScore score;
  bool qualifying = false;

  std::string tag() const {
    char buf[32];
    std::snprintf(buf, sizeof buf, "w%02zu_%03zu", source, chunk);
    return buf;
  }
};

struct PatientResult {
  std::string patient_id;
  std::vector<WindowRecord> windows;
  std::optional<PatientProfile> profile;  // empty when no window qualified
  std::map<double, SpectralFeatures> features;
  std::vector<std::string> degenerate;  // thresholds whose features could not be computed
};

struct RunReport {
  std::vector<PatientResult> patients;
  std::vector<std::string> excluded;
  std::vector<std::string> warnings;
  std::vector<GroupSpec> groups;
  FeatureTable features;
  std::vector<TestResult> results;
};

inline std::string weighted_file_name(double th) { return "weighted_th" + format_double(th) + ".txt"; }

inline std::string window_csv(const std::vector<WindowRecord>& windows) {
  std::string out = "window,source,chunk,p_cough,p_noncough,qualifying\n";
  for (const auto& w : windows) {
    out += w.tag() + "," + std::to_string(w.source) + "," + std::to_string(w.chunk) + "," +
           format_double(w.score.p_cough) + "," + format_double(w.score.p_noncough) + "," +
           (w.qualifying ? "true" : "false") + "\n";
  }
  return out;
}

/// Features of the weighted spectrogram at each threshold; failures are recorded, not thrown.
inline void weighted_features(const PatientProfile& profile, const PipelineConfig& cfg, PatientResult& result,
                              const std::filesystem::path* dir) {
  for (double th : cfg.thresholds) {
    const auto weighted = weight_spectrogram(profile.avg_spectrogram, profile.avg_map, th, cfg.weight_mode);
    if (dir) save_spectrogram(*dir / weighted_file_name(th), weighted);
    try {
      result.features.emplace(th, extract_features(weighted, cfg.features));
    } catch (const DegenerateInputError& e) {
      result.degenerate.push_back("patient " + profile.patient_id + ", threshold " + format_double(th) + ": " +
                                  e.what());
    }
  }
}

/// Runs every per-patient stage and writes the patient's files under `out_dir/patients/<id>`.
inline PatientResult process_patient(const std::string& id, const std::vector<std::filesystem::path>& wavs,
                                     const ScoreFunction& scorer, const PipelineConfig& cfg,
                                     const std::filesystem::path& out_dir, unsigned occlusion_threads = 1) {
  namespace fs = std::filesystem;
  PatientResult result;
  result.patient_id = id;
  const fs::path dir = out_dir / "patients" / id;
  fs::create_directories(dir);

  std::vector<SpectrogramMatrix> kept;
  std::vector<OcclusionMap> maps;
  for (std::size_t src = 0; src < wavs.size(); ++src) {
    const std::string where = "patient " + id + ", file " + wavs[src].string();
    const auto raw = with_context(where + ", stage decode", [&] { return read_wav_file(wavs[src]); });
    const auto specs = with_context(where + ", stage spectra", [&] { return clip_spectrograms(raw, cfg.decimation); });
    for (std::size_t c = 0; c < specs.size(); ++c) {
      WindowRecord w{src, c, {}, false};
      const std::string stage = where + ", window " + w.tag();
      const auto input = log_normalize(specs[c]);
      w.score = with_context(stage + ", stage classify", [&] { return ClassScore(scorer(input)); });
      w.qualifying = w.score.p_cough > cfg.confidence;
      if (w.qualifying) {
        auto map = with_context(stage + ", stage occlude",
                                [&] { return occlusion_map(scorer, input, cfg.occlusion, occlusion_threads); });
        save_spectrogram(dir / (w.tag() + "_spec.txt"), specs[c]);
        save_map(dir / (w.tag() + "_map.txt"), map, specs[c].sample_rate_hz);
        kept.push_back(specs[c]);
        maps.push_back(std::move(map));
      }
      result.windows.push_back(w);
    }
  }
  write_text_file(dir / "windows.csv", window_csv(result.windows));
  if (kept.empty()) return result;

  const std::string where = "patient " + id;
  PatientProfile profile;
  profile.patient_id = id;
  profile.n_windows = kept.size();
  with_context(where + ", stage average", [&] {
    profile.avg_spectrogram = average_spectrograms(kept, cfg.average_domain);
    profile.avg_map = average_maps(maps);
  });
  save_spectrogram(dir / "avg_spectrogram.txt", profile.avg_spectrogram);
  save_map(dir / "avg_map.txt", profile.avg_map, profile.avg_spectrogram.sample_rate_hz);
  with_context(where + ", stage features", [&] { weighted_features(profile, cfg, result, &dir); });
  result.profile = std::move(profile);
  return result;
}

/// Effective configuration and fixed method choices, for the run-metadata file.
inline nlohmann::json config_json(const PipelineConfig& cfg) {
  using nlohmann::json;
  const auto raw_or = [&](const char* key, const std::string& fallback) {
    auto it = cfg.raw.find(key);
    return it == cfg.raw.end() ? fallback : it->second;
  };
  json scorer;
  if (!cfg.model.empty()) {
    scorer = {{"kind", "cnn"}, {"model", raw_or("model", cfg.model.string())}, {"cnnw_version", kCnnwVersion},
              {"padding", "same"}, {"pooling", "floor"}};
  } else {
    scorer = {{"kind", "reference"},
              {"band_lo_hz", cfg.reference->lo_hz},
              {"band_hi_hz", cfg.reference->hi_hz},
              {"gain", cfg.reference->gain}};
  }
  return json{
      {"manifest", raw_or("manifest", cfg.manifest.string())},
      {"groups", raw_or("groups", cfg.groups.string())},
      {"scorer", scorer},
      {"confidence", cfg.confidence},
      {"decimation",
       {{"factor", cfg.decimation.factor},
        {"filter", "hamming-windowed sinc FIR, unity DC gain, zero-padded causal convolution"},
        {"taps", cfg.decimation.taps},
        {"cutoff_ratio", cfg.decimation.cutoff_ratio}}},
      {"spectrogram",
       {{"frame_length", kFrameLength},
        {"frames", kFrames},
        {"bins", kBins},
        {"window", "hanning (no zero endpoints)"},
        {"psd", "one-sided, window-energy normalized"},
        {"log_normalization", "10*log10(S + 1e-12), per-image min-max"}}},
      {"occlusion",
       {{"patch_h", cfg.occlusion.patch_h},
        {"patch_w", cfg.occlusion.patch_w},
        {"stride_h", cfg.occlusion.stride_h},
        {"stride_w", cfg.occlusion.stride_w},
        {"baseline", cfg.occlusion.baseline == Baseline::Zero ? "zero" : "mapmin"},
        {"importance", "max(0, p_orig - p_occluded)"},
        {"resize", "bilinear, patch centres"}}},
      {"average_domain", cfg.average_domain == AverageDomain::Linear ? "linear" : "log"},
      {"weight_mode", std::string(to_string(cfg.weight_mode))},
      {"thresholds", cfg.thresholds},
      {"features",
       {{"renyi_q", cfg.features.renyi_q},
        {"renyi_mode", std::string(to_string(cfg.features.renyi_mode))},
        {"rolloff_fraction", cfg.features.rolloff_fraction},
        {"eps", cfg.features.eps},
        {"zero_frame_policy", cfg.features.zero_frame_policy == ZeroFramePolicy::SkipFrame ? "skip" : "error"},
        {"flux", "signed differences"}}},
      {"stats",
       {{"gaussianity_test", "shapiro_wilk"},
        {"gaussianity_alpha", cfg.protocol.gaussianity_alpha},
        {"t_test", cfg.protocol.welch ? "welch" : "pooled"},
        {"mann_whitney_exact_limit", kExactMannWhitneyLimit},
        {"mann_whitney_approximation", "normal, tie and continuity corrected"},
        {"significance_level", kSignificanceLevel}}},
  };
}

/// Group tests over the patients present in `features`.
inline std::vector<TestResult> run_stats(const FeatureTable& features, const GroupConfig& groups,
                                         std::vector<GroupSpec>& resolved, const ProtocolConfig& protocol) {
  std::set<std::string> patients;
  std::set<double> thresholds;
  for (const auto& [key, f] : features) {
    patients.insert(key.first);
    thresholds.insert(key.second);
  }
  resolved = groups.resolve(&patients);
  const std::vector<double> ths(thresholds.begin(), thresholds.end());
  return with_context("stage stats", [&] { return compare_groups(features, resolved, ths, protocol); });
}

/// Writes features.csv, results.csv, boxplots.json, and report.txt.
inline void write_stat_outputs(const std::filesystem::path& out_dir, const FeatureTable& features,
                               const std::vector<GroupSpec>& groups, const std::vector<TestResult>& results) {
  std::set<double> thresholds;
  for (const auto& [key, f] : features) thresholds.insert(key.second);
  const std::vector<double> ths(thresholds.begin(), thresholds.end());
  std::ostringstream fcsv, rcsv;
  write_features_csv(fcsv, features);
  write_results_csv(rcsv, results);
  write_text_file(out_dir / "features.csv", fcsv.str());
  write_text_file(out_dir / "results.csv", rcsv.str());
  write_text_file(out_dir / "boxplots.json", boxplot_json(features, groups, ths).dump(2) + "\n");
  write_text_file(out_dir / "report.txt", render_report(results));
}

inline RunReport run_pipeline(const PipelineConfig& cfg, std::ostream* log = nullptr) {
  namespace fs = std::filesystem;
  cfg.validate();
  const Manifest manifest = load_manifest(cfg.manifest);
  const GroupConfig group_cfg = load_group_config(cfg.groups);
  const ScoreFunction scorer = make_scorer(cfg);
  fs::create_directories(cfg.output_dir / "patients");

  std::vector<std::pair<std::string, std::vector<fs::path>>> work(manifest.begin(), manifest.end());
  RunReport report;
  report.patients.resize(work.size());
  std::vector<std::exception_ptr> errors(work.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < work.size(); i = next++) {
      try {
        report.patients[i] = process_patient(work[i].first, work[i].second, scorer, cfg, cfg.output_dir);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned n_threads = std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(work.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  const auto warn = [&](const std::string& msg) {
    report.warnings.push_back(msg);
    if (log) *log << "warning: " << msg << '\n';
  };
  std::vector<std::string> degenerate;
  for (const auto& p : report.patients) {
    if (!p.profile) {
      report.excluded.push_back(p.patient_id);
      warn("patient " + p.patient_id + ": no window with p_cough > " + format_double(cfg.confidence) +
           "; excluded from statistics");
      continue;
    }
    if (!group_cfg.diagnosis.count(p.patient_id)) {
      warn("patient " + p.patient_id + " has no diagnosis in the group config");
    }
    degenerate.insert(degenerate.end(), p.degenerate.begin(), p.degenerate.end());
    for (const auto& [th, f] : p.features) report.features.emplace(std::make_pair(p.patient_id, th), f);
  }
  if (!degenerate.empty()) {
    std::string msg = "stage features: degenerate weighted spectrograms for " + std::to_string(degenerate.size()) +
                      " patient/threshold pairs";
    for (const auto& d : degenerate) msg += "\n  " + d;
    throw DataError(msg);
  }
  if (report.features.empty()) throw DataError("no patient has qualifying cough windows");

  report.results = run_stats(report.features, group_cfg, report.groups, cfg.protocol);
  write_stat_outputs(cfg.output_dir, report.features, report.groups, report.results);

  nlohmann::json meta;
  meta["run_metadata_version"] = kRunMetadataVersion;
  meta["formats"] = {{"matrix", "K=<K> N=<N> fs=<fs> scale=<linear|lognorm|map>"},
                     {"cnnw_version", kCnnwVersion},
                     {"features_csv", std::string(kFeaturesHeader)},
                     {"results_csv", std::string(kResultsHeader)}};
  meta["config"] = config_json(cfg);
  nlohmann::json patients = nlohmann::json::array();
  for (const auto& p : report.patients) {
    std::size_t q = 0;
    for (const auto& w : p.windows) q += w.qualifying;
    auto dx = group_cfg.diagnosis.find(p.patient_id);
    patients.push_back({{"id", p.patient_id},
                        {"diagnosis", dx == group_cfg.diagnosis.end() ? "" : dx->second},
                        {"windows", p.windows.size()},
                        {"qualifying_windows", q}});
  }
  meta["patients"] = patients;
  meta["excluded"] = report.excluded;
  meta["warnings"] = report.warnings;
  nlohmann::json groups = nlohmann::json::object();
  for (const auto& g : report.groups) groups[g.name] = {{"a", g.group_a}, {"b", g.group_b}};
  meta["groups"] = groups;
  meta["result_rows"] = report.results.size();
  write_text_file(cfg.output_dir / "run_metadata.json", meta.dump(2) + "\n");
  return report;
}

}  // namespace coughxai

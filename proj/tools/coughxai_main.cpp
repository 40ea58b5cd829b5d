// coughxai: command-line front end for the cough spectrogram XAI pipeline.
//
//   coughxai run --config pipeline.conf [--out dir] [--threads n]
//   coughxai gen-fixture --seed 7 --out fixture/
//   coughxai spectra | classify | occlude | average | weight | features | stats | report ...
//
// Exit codes: 0 success, 2 config/argument error, 3 data error, 4 format error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "coughxai/coughxai.hpp"

namespace fs = std::filesystem;
using namespace coughxai;

namespace {

struct ScorerOptions {
  std::string config;
  std::string model;
  std::string band;
  double gain = 8.0;
  double confidence = 0.9;
};

void add_scorer_options(CLI::App* cmd, ScorerOptions& o) {
  cmd->add_option("--config", o.config, "Pipeline config (scorer, confidence)");
  cmd->add_option("--model", o.model, "CNNW weight file");
  cmd->add_option("--band", o.band, "Reference classifier band 'lo,hi' in Hz");
  cmd->add_option("--gain", o.gain, "Reference classifier gain");
  cmd->add_option("--confidence", o.confidence, "Cough probability threshold (strict)");
}

/// Scorer, confidence, and occlusion settings from --config or the direct flags.
PipelineConfig scorer_config(const ScorerOptions& o) {
  if (!o.config.empty()) {
    if (!o.model.empty() || !o.band.empty()) throw ConfigError("--config cannot be combined with --model or --band");
    return load_pipeline_config(o.config);
  }
  PipelineConfig cfg;
  cfg.confidence = o.confidence;
  if (!o.model.empty() && !o.band.empty()) throw ConfigError("pass either --model or --band, not both");
  if (!o.model.empty()) {
    cfg.model = o.model;
  } else if (!o.band.empty()) {
    std::vector<double> band;
    try {
      band = parse_double_list(o.band);
    } catch (const FormatError& e) {
      throw ConfigError(std::string("--band: ") + e.what());
    }
    if (band.size() != 2) throw ConfigError("--band expects 'lo,hi'");
    cfg.reference = ReferenceBand{band[0], band[1], o.gain};
  } else {
    throw ConfigError("a scorer is required: --config, --model, or --band");
  }
  if (!(cfg.confidence >= 0.0 && cfg.confidence <= 1.0)) throw ConfigError("confidence must lie in [0, 1]");
  return cfg;
}

/// Spectrogram file as CNN input: linear files are log-normalized here.
SpectrogramMatrix load_input(const fs::path& path) {
  auto s = load_spectrogram(path);
  return s.scale == Scale::Linear ? log_normalize(s) : s;
}

void emit(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    write_text_file(out, text);
  }
}

std::string stem_of(const fs::path& p) { return p.stem().string(); }

int run_main(int argc, char** argv) {
  CLI::App app{"Cough spectrogram occlusion analysis"};
  app.require_subcommand(1);

  // run
  std::string run_config, run_out, weight_mode, renyi;
  unsigned threads = 1;
  bool threads_set = false;
  auto* run = app.add_subcommand("run", "Full pipeline from a config file");
  run->add_option("--config", run_config, "Pipeline config")->required();
  run->add_option("--out", run_out, "Output directory (overrides config)");
  run->add_option("--threads", threads, "Patients processed concurrently")->check(CLI::PositiveNumber);
  run->add_option("--weight-mode", weight_mode, "mapvalue | indicator");
  run->add_option("--renyi", renyi, "normalized | literal");

  // gen-fixture
  std::uint64_t seed = 7;
  std::string fixture_out;
  auto* gen = app.add_subcommand("gen-fixture", "Write the seeded synthetic corpus and CNNW weights");
  gen->add_option("--seed", seed, "RNG seed");
  gen->add_option("--out", fixture_out, "Output directory")->required();

  // spectra
  std::string spectra_wav, spectra_out, spectra_config;
  auto* spectra = app.add_subcommand("spectra", "WAV -> linear spectrogram matrix files");
  spectra->add_option("wav", spectra_wav, "Input WAV")->required();
  spectra->add_option("--out", spectra_out, "Output directory")->required();
  spectra->add_option("--config", spectra_config, "Pipeline config (decimation settings)");

  // classify
  ScorerOptions classify_opts;
  std::vector<std::string> classify_in;
  std::string classify_out;
  auto* classify = app.add_subcommand("classify", "Spectrogram files -> cough scores CSV");
  classify->add_option("inputs", classify_in, "Spectrogram matrix files")->required();
  classify->add_option("--out", classify_out, "Output CSV (default stdout)");
  add_scorer_options(classify, classify_opts);

  // occlude
  ScorerOptions occlude_opts;
  std::vector<std::string> occlude_in;
  std::string occlude_out;
  unsigned occlude_threads = 1;
  auto* occlude = app.add_subcommand("occlude", "Spectrogram files -> occlusion map files");
  occlude->add_option("inputs", occlude_in, "Spectrogram matrix files")->required();
  occlude->add_option("--out", occlude_out, "Output directory")->required();
  occlude->add_option("--threads", occlude_threads, "Workers over patch positions")->check(CLI::PositiveNumber);
  add_scorer_options(occlude, occlude_opts);

  // average
  std::vector<std::string> average_in;
  std::string average_out, average_domain = "linear";
  auto* average = app.add_subcommand("average", "Pixel-average spectrograms or maps");
  average->add_option("inputs", average_in, "Matrix files (all spectrograms or all maps)")->required();
  average->add_option("--out", average_out, "Output matrix file")->required();
  average->add_option("--domain", average_domain, "linear | log (spectrograms only)");

  // weight
  std::string weight_spec, weight_map, weight_out, weight_mode_opt = "mapvalue";
  double weight_th = 0.5;
  auto* weight = app.add_subcommand("weight", "Spectrogram + map + threshold -> weighted spectrogram");
  weight->add_option("spectrogram", weight_spec, "Linear spectrogram file")->required();
  weight->add_option("map", weight_map, "Occlusion map file")->required();
  weight->add_option("--th", weight_th, "Threshold in [0,1]")->required();
  weight->add_option("--weight-mode", weight_mode_opt, "mapvalue | indicator");
  weight->add_option("--out", weight_out, "Output matrix file (default stdout)");

  // features
  std::string features_in, features_patient, features_out, features_config, features_renyi;
  double features_th = 0.0;
  auto* features = app.add_subcommand("features", "Weighted spectrogram -> features CSV row");
  features->add_option("input", features_in, "Linear spectrogram file")->required();
  features->add_option("--patient", features_patient, "Patient id")->required();
  features->add_option("--threshold", features_th, "Threshold the input was weighted at")->required();
  features->add_option("--out", features_out, "Features CSV; rows are merged into an existing file");
  features->add_option("--config", features_config, "Pipeline config (feature settings)");
  features->add_option("--renyi", features_renyi, "normalized | literal");

  // stats
  std::string stats_features, stats_groups, stats_out, stats_config;
  bool stats_welch = false;
  auto* stats = app.add_subcommand("stats", "Features CSV + group config -> results CSV and boxplot JSON");
  stats->add_option("--features", stats_features, "Features CSV")->required();
  stats->add_option("--groups", stats_groups, "Group config")->required();
  stats->add_option("--out", stats_out, "Output directory")->required();
  stats->add_option("--config", stats_config, "Pipeline config (test settings)");
  stats->add_flag("--welch", stats_welch, "Use Welch's t-test instead of the pooled form");

  // report
  std::string report_in, report_out;
  auto* report = app.add_subcommand("report", "Results CSV -> per-group threshold x feature table");
  report->add_option("results", report_in, "Results CSV")->required();
  report->add_option("--out", report_out, "Output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  threads_set = run->count("--threads") > 0;

  if (*run) {
    auto cfg = load_pipeline_config(run_config);
    if (!run_out.empty()) cfg.output_dir = run_out;
    if (threads_set) cfg.threads = threads;
    if (!weight_mode.empty()) cfg.weight_mode = parse_weight_mode(weight_mode);
    if (!renyi.empty()) cfg.features.renyi_mode = parse_renyi_mode(renyi);
    const auto rep = run_pipeline(cfg, &std::cerr);
    std::cout << "patients: " << rep.patients.size() << " (excluded " << rep.excluded.size() << ")\n"
              << "result rows: " << rep.results.size() << "\n"
              << "output: " << cfg.output_dir.string() << "\n";
    return 0;
  }

  if (*gen) {
    const auto s = gen_fixture(seed, fixture_out);
    std::cout << "wrote " << s.patients << " patients to " << fixture_out << "\n";
    return 0;
  }

  if (*spectra) {
    DecimationConfig dec;
    if (!spectra_config.empty()) dec = load_pipeline_config(spectra_config).decimation;
    const auto clip = read_wav_file(spectra_wav);
    const auto specs = with_context(spectra_wav, [&] { return clip_spectrograms(clip, dec); });
    fs::create_directories(spectra_out);
    const auto stem = stem_of(spectra_wav);
    for (std::size_t c = 0; c < specs.size(); ++c) {
      char name[32];
      std::snprintf(name, sizeof name, "_%03zu.txt", c);
      const fs::path p = fs::path(spectra_out) / (stem + name);
      save_spectrogram(p, specs[c]);
      std::cout << p.string() << "\n";
    }
    return 0;
  }

  if (*classify) {
    const auto cfg = scorer_config(classify_opts);
    const auto scorer = make_scorer(cfg);
    std::string csv = "file,p_cough,p_noncough,qualifying\n";
    for (const auto& in : classify_in) {
      const auto score = with_context(in, [&] { return ClassScore(scorer(load_input(in))); });
      csv += in + "," + format_double(score.p_cough) + "," + format_double(score.p_noncough) + "," +
             (score.p_cough > cfg.confidence ? "true" : "false") + "\n";
    }
    emit(classify_out, csv);
    return 0;
  }

  if (*occlude) {
    const auto cfg = scorer_config(occlude_opts);
    const auto scorer = make_scorer(cfg);
    fs::create_directories(occlude_out);
    for (const auto& in : occlude_in) {
      const auto input = load_input(in);
      const auto map = with_context(in, [&] { return occlusion_map(scorer, input, cfg.occlusion, occlude_threads); });
      const fs::path p = fs::path(occlude_out) / (stem_of(in) + "_map.txt");
      save_map(p, map, input.sample_rate_hz);
      std::cout << p.string() << "\n";
    }
    return 0;
  }

  if (*average) {
    std::vector<MatrixFile> files;
    for (const auto& in : average_in) files.push_back(read_matrix_file(in));
    const bool maps = files.front().scale == Scale::Map;
    for (std::size_t i = 0; i < files.size(); ++i) {
      if ((files[i].scale == Scale::Map) != maps) {
        throw FormatError(average_in[i] + ": cannot mix maps and spectrograms");
      }
    }
    if (maps) {
      std::vector<OcclusionMap> ms;
      for (std::size_t i = 0; i < files.size(); ++i) ms.push_back(load_map(average_in[i]));
      save_map(average_out, average_maps(ms), files.front().sample_rate_hz);
    } else {
      AverageDomain domain;
      if (average_domain == "linear") domain = AverageDomain::Linear;
      else if (average_domain == "log") domain = AverageDomain::Log;
      else throw ConfigError("--domain must be 'linear' or 'log'");
      std::vector<SpectrogramMatrix> ss;
      for (auto& f : files) ss.push_back(SpectrogramMatrix{std::move(f.values), f.sample_rate_hz, f.scale});
      save_spectrogram(average_out, average_spectrograms(ss, domain));
    }
    return 0;
  }

  if (*weight) {
    const auto s0 = load_spectrogram(weight_spec);
    const auto m = load_map(weight_map);
    const auto out = weight_spectrogram(s0, m, weight_th, parse_weight_mode(weight_mode_opt));
    std::ostringstream os;
    write_matrix(os, out.values, out.sample_rate_hz, out.scale);
    emit(weight_out, os.str());
    return 0;
  }

  if (*features) {
    FeatureConfig fc;
    if (!features_config.empty()) fc = load_pipeline_config(features_config).features;
    if (!features_renyi.empty()) fc.renyi_mode = parse_renyi_mode(features_renyi);
    const auto s = load_spectrogram(features_in);
    const auto f = with_context(features_in, [&] { return extract_features(s, fc); });
    FeatureTable table;
    if (!features_out.empty() && features_out != "-" && fs::exists(features_out)) {
      std::ifstream in(features_out);
      table = with_context(features_out, [&] { return read_features_csv(in); });
    }
    table[{features_patient, features_th}] = f;
    std::ostringstream os;
    write_features_csv(os, table);
    emit(features_out, os.str());
    return 0;
  }

  if (*stats) {
    ProtocolConfig protocol;
    if (!stats_config.empty()) protocol = load_pipeline_config(stats_config).protocol;
    if (stats_welch) protocol.welch = true;
    std::ifstream in(stats_features);
    if (!in) throw ConfigError("cannot open features CSV " + stats_features);
    const auto table = with_context(stats_features, [&] { return read_features_csv(in); });
    if (table.empty()) throw DataError(stats_features + ": no feature rows");
    const auto groups = load_group_config(stats_groups);
    std::vector<GroupSpec> resolved;
    const auto results = run_stats(table, groups, resolved, protocol);
    std::set<double> ths;
    for (const auto& [key, f] : table) ths.insert(key.second);
    const std::vector<double> thresholds(ths.begin(), ths.end());
    fs::create_directories(stats_out);
    std::ostringstream rcsv;
    write_results_csv(rcsv, results);
    write_text_file(fs::path(stats_out) / "results.csv", rcsv.str());
    write_text_file(fs::path(stats_out) / "boxplots.json", boxplot_json(table, resolved, thresholds).dump(2) + "\n");
    std::cout << results.size() << " result rows\n";
    return 0;
  }

  if (*report) {
    std::ifstream in(report_in);
    if (!in) throw ConfigError("cannot open results CSV " + report_in);
    const auto results = with_context(report_in, [&] { return read_results_csv(in); });
    emit(report_out, render_report(results));
    return 0;
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_main(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ArgumentError& e) {
    std::cerr << "argument error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const DegenerateInputError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return 4;
  } catch (const ValidationError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return 4;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

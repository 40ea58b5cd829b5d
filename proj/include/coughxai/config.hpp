#pragma once

// Pipeline configuration: a `key = value` text file ('#' comments).
// Relative paths resolve against the config file's directory.

#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "coughxai/audio_io.hpp"
#include "coughxai/errors.hpp"
#include "coughxai/features.hpp"
#include "coughxai/stats.hpp"
#include "coughxai/text_format.hpp"
#include "coughxai/xai.hpp"

namespace coughxai {

struct ReferenceBand {
  double lo_hz = 0.0;
  double hi_hz = 0.0;
  double gain = 8.0;
};

struct PipelineConfig {
  std::filesystem::path manifest;
  std::filesystem::path groups;
  std::filesystem::path model;  // empty when the reference classifier is used
  std::optional<ReferenceBand> reference;
  std::filesystem::path output_dir = "out";
  double confidence = 0.9;
  DecimationConfig decimation;
  OcclusionConfig occlusion;
  WeightMode weight_mode = WeightMode::MapValue;
  std::vector<double> thresholds{0.5, 0.6, 0.7, 0.8, 0.9};
  FeatureConfig features;
  AverageDomain average_domain = AverageDomain::Linear;
  ProtocolConfig protocol;
  unsigned threads = 1;

  // Raw values as written, for the run metadata.
  std::map<std::string, std::string> raw;

  void validate() const {
    if (!(confidence >= 0.0 && confidence <= 1.0)) throw ConfigError("confidence must lie in [0, 1]");
    if (thresholds.empty()) throw ConfigError("at least one threshold is required");
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
      if (!(thresholds[i] >= 0.0 && thresholds[i] <= 1.0)) throw ConfigError("thresholds must lie in [0, 1]");
      if (i > 0 && !(thresholds[i] > thresholds[i - 1])) throw ConfigError("thresholds must be strictly increasing");
    }
    if (model.empty() == !reference.has_value()) {
      throw ConfigError("exactly one of 'model' or 'reference_band' must be set");
    }
    if (decimation.factor < 1 || decimation.taps < 1) throw ConfigError("invalid decimation settings");
    if (occlusion.patch_h < 1 || occlusion.patch_w < 1 || occlusion.stride_h < 1 || occlusion.stride_w < 1) {
      throw ConfigError("occlusion patch and stride must be >= 1");
    }
    try {
      features.validate();
    } catch (const ArgumentError& e) {
      throw ConfigError(e.what());
    }
    if (threads < 1) throw ConfigError("threads must be >= 1");
  }
};

inline WeightMode parse_weight_mode(std::string_view s) {
  if (s == "mapvalue") return WeightMode::MapValue;
  if (s == "indicator") return WeightMode::Indicator;
  throw ConfigError("weight mode must be 'mapvalue' or 'indicator', got '" + std::string(s) + "'");
}

inline std::string_view to_string(WeightMode m) { return m == WeightMode::MapValue ? "mapvalue" : "indicator"; }

inline RenyiMode parse_renyi_mode(std::string_view s) {
  if (s == "normalized") return RenyiMode::Normalized;
  if (s == "literal") return RenyiMode::Literal;
  throw ConfigError("renyi mode must be 'normalized' or 'literal', got '" + std::string(s) + "'");
}

inline std::string_view to_string(RenyiMode m) { return m == RenyiMode::Normalized ? "normalized" : "literal"; }

inline std::vector<double> parse_double_list(std::string_view s) {
  std::vector<double> out;
  for (auto f : split_fields(s, ',')) out.push_back(parse_double(trim(f)));
  return out;
}

inline PipelineConfig parse_pipeline_config(std::istream& in, const std::filesystem::path& base_dir = {}) {
  static const std::set<std::string> known{
      "manifest",   "groups",          "model",           "reference_band",   "reference_gain",
      "output",     "confidence",      "decimation_factor", "fir_taps",       "fir_cutoff_ratio",
      "patch_h",    "patch_w",         "stride_h",        "stride_w",         "baseline",
      "weight_mode", "thresholds",     "renyi_q",         "renyi_mode",       "rolloff_fraction",
      "eps",        "zero_frame_policy", "average_domain", "t_test",          "gaussianity_alpha",
      "threads",    "renyi_literal"};
  PipelineConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key(trim(body.substr(0, eq)));
    const std::string value(trim(body.substr(eq + 1)));
    if (!known.count(key)) throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    if (!cfg.raw.emplace(key, value).second) {
      throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
  }

  const auto resolve = [&](const std::string& v) {
    std::filesystem::path p(v);
    return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
  };
  const auto get = [&](const char* key) -> const std::string* {
    auto it = cfg.raw.find(key);
    return it == cfg.raw.end() ? nullptr : &it->second;
  };
  const auto as_size = [](const std::string& key, const std::string& v) {
    const long long x = parse_integer(v);
    if (x < 1) throw ConfigError(key + " must be >= 1");
    return static_cast<std::size_t>(x);
  };

  try {
    if (auto v = get("manifest")) cfg.manifest = resolve(*v);
    else throw ConfigError("config is missing 'manifest'");
    if (auto v = get("groups")) cfg.groups = resolve(*v);
    else throw ConfigError("config is missing 'groups'");
    if (auto v = get("model")) cfg.model = resolve(*v);
    if (auto v = get("reference_band")) {
      const auto band = parse_double_list(*v);
      if (band.size() != 2) throw ConfigError("reference_band expects 'lo,hi' in Hz");
      cfg.reference = ReferenceBand{band[0], band[1], 8.0};
      if (auto g = get("reference_gain")) cfg.reference->gain = parse_double(*g);
    }
    if (auto v = get("output")) cfg.output_dir = resolve(*v);
    if (auto v = get("confidence")) cfg.confidence = parse_double(*v);
    if (auto v = get("decimation_factor")) cfg.decimation.factor = static_cast<int>(as_size("decimation_factor", *v));
    if (auto v = get("fir_taps")) cfg.decimation.taps = static_cast<int>(as_size("fir_taps", *v));
    if (auto v = get("fir_cutoff_ratio")) cfg.decimation.cutoff_ratio = parse_double(*v);
    if (auto v = get("patch_h")) cfg.occlusion.patch_h = as_size("patch_h", *v);
    if (auto v = get("patch_w")) cfg.occlusion.patch_w = as_size("patch_w", *v);
    if (auto v = get("stride_h")) cfg.occlusion.stride_h = as_size("stride_h", *v);
    if (auto v = get("stride_w")) cfg.occlusion.stride_w = as_size("stride_w", *v);
    if (auto v = get("baseline")) {
      if (*v == "zero") cfg.occlusion.baseline = Baseline::Zero;
      else if (*v == "mapmin") cfg.occlusion.baseline = Baseline::MapMin;
      else throw ConfigError("baseline must be 'zero' or 'mapmin'");
    }
    if (auto v = get("weight_mode")) cfg.weight_mode = parse_weight_mode(*v);
    if (auto v = get("thresholds")) cfg.thresholds = parse_double_list(*v);
    if (auto v = get("renyi_q")) cfg.features.renyi_q = parse_double(*v);
    if (auto v = get("renyi_mode")) cfg.features.renyi_mode = parse_renyi_mode(*v);
    if (auto v = get("renyi_literal")) {
      if (get("renyi_mode")) throw ConfigError("set either renyi_mode or renyi_literal, not both");
      if (*v == "true") cfg.features.renyi_mode = RenyiMode::Literal;
      else if (*v == "false") cfg.features.renyi_mode = RenyiMode::Normalized;
      else throw ConfigError("renyi_literal must be 'true' or 'false'");
    }
    if (auto v = get("rolloff_fraction")) cfg.features.rolloff_fraction = parse_double(*v);
    if (auto v = get("eps")) cfg.features.eps = parse_double(*v);
    if (auto v = get("zero_frame_policy")) {
      if (*v == "skip") cfg.features.zero_frame_policy = ZeroFramePolicy::SkipFrame;
      else if (*v == "error") cfg.features.zero_frame_policy = ZeroFramePolicy::Error;
      else throw ConfigError("zero_frame_policy must be 'skip' or 'error'");
    }
    if (auto v = get("average_domain")) {
      if (*v == "linear") cfg.average_domain = AverageDomain::Linear;
      else if (*v == "log") cfg.average_domain = AverageDomain::Log;
      else throw ConfigError("average_domain must be 'linear' or 'log'");
    }
    if (auto v = get("t_test")) {
      if (*v == "pooled") cfg.protocol.welch = false;
      else if (*v == "welch") cfg.protocol.welch = true;
      else throw ConfigError("t_test must be 'pooled' or 'welch'");
    }
    if (auto v = get("gaussianity_alpha")) cfg.protocol.gaussianity_alpha = parse_double(*v);
    if (auto v = get("threads")) cfg.threads = static_cast<unsigned>(as_size("threads", *v));
  } catch (const FormatError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

inline PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  try {
    return parse_pipeline_config(in, path.parent_path());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

/// Manifest lines: `<patient_id> <wav path>`; a patient may list several files.
using Manifest = std::map<std::string, std::vector<std::filesystem::path>>;

inline Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open manifest " + path.string());
  Manifest m;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto tokens = split_any(line);
    if (tokens.empty()) continue;
    if (tokens.size() != 2) {
      throw ConfigError(path.string() + " line " + std::to_string(lineno) + ": expected '<patient_id> <wav path>'");
    }
    std::filesystem::path wav{std::string(tokens[1])};
    if (wav.is_relative()) wav = path.parent_path() / wav;
    m[std::string(tokens[0])].push_back(wav);
  }
  if (m.empty()) throw ArgumentError("manifest " + path.string() + " lists no patients");
  return m;
}

}  // namespace coughxai

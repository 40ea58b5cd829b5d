#pragma once

// Tabular outputs: features CSV, results CSV, boxplot JSON, and the
// per-group p-value table (threshold rows x feature columns).

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "coughxai/errors.hpp"
#include "coughxai/features.hpp"
#include "coughxai/groups.hpp"
#include "coughxai/stats.hpp"
#include "coughxai/text_format.hpp"

namespace coughxai {

inline constexpr std::string_view kFeaturesHeader = "patient_id,threshold,ac,sp_bw,sp_cf,sp_f,sp_fx,sp_re,sp_r";
inline constexpr std::string_view kResultsHeader = "group,feature,threshold,test,statistic,p_value,significant";

inline std::string features_csv_row(const std::string& patient, double threshold, const SpectralFeatures& f) {
  std::string row = patient + "," + format_double(threshold);
  for (double v : f.values()) row += "," + format_double(v);
  return row;
}

inline void write_features_csv(std::ostream& os, const FeatureTable& table) {
  os << kFeaturesHeader << '\n';
  for (const auto& [key, f] : table) os << features_csv_row(key.first, key.second, f) << '\n';
}

inline FeatureTable read_features_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || trim(line) != kFeaturesHeader) {
    throw FormatError("features CSV must start with header '" + std::string(kFeaturesHeader) + "'");
  }
  FeatureTable table;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(trim(line));
    if (fields.size() != 9) throw FormatError("features CSV line " + std::to_string(lineno) + ": expected 9 fields");
    SpectralFeatures f;
    try {
      f.ac = parse_double(fields[2]);
      f.sp_bw = parse_double(fields[3]);
      f.sp_cf = parse_double(fields[4]);
      f.sp_f = parse_double(fields[5]);
      f.sp_fx = parse_double(fields[6]);
      f.sp_re = parse_double(fields[7]);
      f.sp_r = parse_double(fields[8]);
      const auto key = std::make_pair(std::string(fields[0]), parse_double(fields[1]));
      if (!table.emplace(key, f).second) {
        throw FormatError("duplicate row for patient " + key.first + " at threshold " + std::string(fields[1]));
      }
    } catch (const FormatError& e) {
      throw FormatError("features CSV line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return table;
}

inline void write_results_csv(std::ostream& os, std::span<const TestResult> results) {
  os << kResultsHeader << '\n';
  for (const auto& r : results) {
    os << r.group << ',' << r.feature << ',' << format_double(r.threshold) << ',' << to_string(r.test_kind) << ','
       << format_double(r.statistic) << ',' << format_double(r.p_value) << ',' << (r.significant ? "true" : "false")
       << '\n';
  }
}

inline std::vector<TestResult> read_results_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || trim(line) != kResultsHeader) {
    throw FormatError("results CSV must start with header '" + std::string(kResultsHeader) + "'");
  }
  std::vector<TestResult> out;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(trim(line));
    if (fields.size() != 7) throw FormatError("results CSV line " + std::to_string(lineno) + ": expected 7 fields");
    try {
      TestResult r;
      r.group = std::string(fields[0]);
      r.feature = std::string(fields[1]);
      feature_index(r.feature);
      r.threshold = parse_double(fields[2]);
      r.test_kind = parse_test_kind(fields[3]);
      r.statistic = parse_double(fields[4]);
      r.p_value = parse_double(fields[5]);
      if (fields[6] == "true") r.significant = true;
      else if (fields[6] == "false") r.significant = false;
      else throw FormatError("significant must be true or false");
      out.push_back(std::move(r));
    } catch (const Error& e) {
      throw FormatError("results CSV line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline nlohmann::json boxplot_to_json(const BoxplotSummary& b) {
  return nlohmann::json{{"median", b.median},         {"q1", b.q1},
                        {"q3", b.q3},                 {"whisker_lo", b.whisker_lo},
                        {"whisker_hi", b.whisker_hi}, {"outliers", b.outliers}};
}

/// {group: {side: {feature: {threshold: summary}}}}, side is "a" or "b".
inline nlohmann::json boxplot_json(const FeatureTable& features, std::span<const GroupSpec> groups,
                                   std::span<const double> thresholds) {
  nlohmann::json root = nlohmann::json::object();
  for (const auto& g : groups) {
    for (const auto& [side, ids] : {std::pair{"a", &g.group_a}, std::pair{"b", &g.group_b}}) {
      for (std::size_t f = 0; f < SpectralFeatures::names.size(); ++f) {
        for (double th : thresholds) {
          std::vector<double> v;
          for (const auto& id : *ids) {
            const auto it = features.find({id, th});
            if (it == features.end()) {
              throw DataError("boxplot: no features for patient " + id + " at threshold " + format_double(th));
            }
            v.push_back(it->second.get(f));
          }
          root[g.name][side][std::string(SpectralFeatures::names[f])][format_double(th)] =
              boxplot_to_json(boxplot_summary(v));
        }
      }
    }
  }
  return root;
}

namespace detail {

inline std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

}  // namespace detail

inline constexpr std::array<std::string_view, 7> kFeatureLabels{"AC", "SpBW", "SpCF", "SpF", "SpFx", "SpRE", "SpR"};

/// Per group: one row per threshold, one p-value column per feature; '*' marks p < 0.05.
inline std::string render_report(std::span<const TestResult> results) {
  std::map<std::string, std::map<double, std::map<std::size_t, const TestResult*>>> cells;
  for (const auto& r : results) cells[r.group][r.threshold][feature_index(r.feature)] = &r;

  std::ostringstream os;
  os << "Separability p-values (* marks p < 0.05)\n";
  char buf[64];
  const auto emit = [&os](std::string line) {
    while (!line.empty() && line.back() == ' ') line.pop_back();
    os << line << '\n';
  };
  for (const auto& [group, rows] : cells) {
    os << '\n' << group << '\n';
    std::string header = detail::pad("Th.", 6);
    for (auto label : kFeatureLabels) header += " " + detail::pad(std::string(label), 9);
    emit(header);
    for (const auto& [th, row] : rows) {
      std::string line = detail::pad(format_double(th), 6);
      for (std::size_t f = 0; f < kFeatureLabels.size(); ++f) {
        std::string cell = "-";
        if (auto it = row.find(f); it != row.end()) {
          std::snprintf(buf, sizeof buf, "%.4f", it->second->p_value);
          cell = buf;
          if (it->second->significant) cell += '*';
        }
        line += " " + detail::pad(cell, 9);
      }
      emit(line);
    }
  }
  return os.str();
}

}  // namespace coughxai

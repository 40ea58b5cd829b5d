#pragma once

// Comparison-group definitions and the per (group, threshold, feature) sweep.
//
// Group config text format (one directive per line, '#' starts a comment):
//   patient <id> <diagnosis>
//   class <name> = <diagnosis> <diagnosis> ...
//   group <name> = <terms for side a> : <terms for side b>
// A term is a diagnosis, a class name, or '*' (every diagnosis); a term
// prefixed with '-' removes those patients from the side.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "coughxai/errors.hpp"
#include "coughxai/features.hpp"
#include "coughxai/stats.hpp"
#include "coughxai/text_format.hpp"

namespace coughxai {

struct GroupSpec {
  std::string name;
  std::set<std::string> group_a;
  std::set<std::string> group_b;
};

struct GroupRule {
  std::string name;
  std::vector<std::string> side_a;
  std::vector<std::string> side_b;
};

struct GroupConfig {
  std::map<std::string, std::string> diagnosis;  // patient id -> diagnosis
  std::map<std::string, std::set<std::string>> classes;
  std::vector<GroupRule> rules;

  /// Resolves every rule against `patients` (defaults to every configured patient).
  std::vector<GroupSpec> resolve(const std::set<std::string>* patients = nullptr) const {
    std::set<std::string> universe;
    for (const auto& [id, dx] : diagnosis) {
      if (!patients || patients->count(id)) universe.insert(id);
    }
    std::vector<GroupSpec> out;
    for (const auto& rule : rules) {
      GroupSpec g{rule.name, resolve_side(rule.side_a, universe, rule.name),
                  resolve_side(rule.side_b, universe, rule.name)};
      for (const auto& id : g.group_a) {
        if (g.group_b.count(id)) throw ConfigError("group " + rule.name + ": patient " + id + " is on both sides");
      }
      if (g.group_a.empty() || g.group_b.empty()) {
        throw DataError("group " + rule.name + " has an empty side after resolving patients");
      }
      out.push_back(std::move(g));
    }
    return out;
  }

 private:
  std::set<std::string> expand(const std::string& term, const std::string& rule) const {
    std::set<std::string> dx;
    if (term == "*") {
      for (const auto& [id, d] : diagnosis) dx.insert(d);
    } else if (auto it = classes.find(term); it != classes.end()) {
      dx = it->second;
    } else {
      bool known = false;
      for (const auto& [id, d] : diagnosis) known = known || d == term;
      if (!known) throw ConfigError("group " + rule + ": unknown diagnosis or class '" + term + "'");
      dx.insert(term);
    }
    return dx;
  }

  std::set<std::string> resolve_side(const std::vector<std::string>& terms, const std::set<std::string>& universe,
                                     const std::string& rule) const {
    std::set<std::string> ids;
    for (const auto& raw : terms) {
      const bool remove = !raw.empty() && raw.front() == '-';
      const auto dx = expand(remove ? raw.substr(1) : raw, rule);
      for (const auto& id : universe) {
        if (!dx.count(diagnosis.at(id))) continue;
        if (remove) ids.erase(id);
        else ids.insert(id);
      }
    }
    return ids;
  }
};

inline GroupConfig parse_group_config(std::istream& in) {
  GroupConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto tokens = split_any(line);
    if (tokens.empty()) continue;
    const auto where = "groups line " + std::to_string(lineno) + ": ";
    const std::string kind(tokens[0]);
    if (kind == "patient") {
      if (tokens.size() != 3) throw ConfigError(where + "expected 'patient <id> <diagnosis>'");
      if (!cfg.diagnosis.emplace(std::string(tokens[1]), std::string(tokens[2])).second) {
        throw ConfigError(where + "duplicate patient " + std::string(tokens[1]));
      }
    } else if (kind == "class") {
      if (tokens.size() < 4 || tokens[2] != "=") throw ConfigError(where + "expected 'class <name> = <diagnoses>'");
      auto& members = cfg.classes[std::string(tokens[1])];
      for (std::size_t i = 3; i < tokens.size(); ++i) members.insert(std::string(tokens[i]));
    } else if (kind == "group") {
      if (tokens.size() < 5 || tokens[2] != "=") throw ConfigError(where + "expected 'group <name> = <a> : <b>'");
      GroupRule rule{std::string(tokens[1]), {}, {}};
      bool side_b = false;
      for (std::size_t i = 3; i < tokens.size(); ++i) {
        if (tokens[i] == ":") {
          if (side_b) throw ConfigError(where + "more than one ':' separator");
          side_b = true;
          continue;
        }
        (side_b ? rule.side_b : rule.side_a).emplace_back(tokens[i]);
      }
      if (!side_b || rule.side_a.empty() || rule.side_b.empty()) {
        throw ConfigError(where + "group needs terms on both sides of ':'");
      }
      cfg.rules.push_back(std::move(rule));
    } else {
      throw ConfigError(where + "unknown directive '" + kind + "'");
    }
  }
  if (cfg.rules.empty()) throw ConfigError("group config defines no groups");
  return cfg;
}

inline GroupConfig load_group_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open group config " + path.string());
  try {
    return parse_group_config(in);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

/// Features keyed by (patient id, threshold).
using FeatureTable = std::map<std::pair<std::string, double>, SpectralFeatures>;

/// One test per (group, threshold, feature), ordered by group, threshold, then feature.
inline std::vector<TestResult> compare_groups(const FeatureTable& features, std::span<const GroupSpec> groups,
                                              std::span<const double> thresholds, const ProtocolConfig& cfg = {}) {
  std::vector<const GroupSpec*> ordered;
  for (const auto& g : groups) ordered.push_back(&g);
  std::sort(ordered.begin(), ordered.end(), [](auto* x, auto* y) { return x->name < y->name; });
  std::vector<double> ths(thresholds.begin(), thresholds.end());
  std::sort(ths.begin(), ths.end());

  const auto column = [&](const std::set<std::string>& ids, double th, std::size_t f, const std::string& group) {
    std::vector<double> v;
    for (const auto& id : ids) {
      const auto it = features.find({id, th});
      if (it == features.end()) {
        throw DataError("group " + group + ": no features for patient " + id + " at threshold " + format_double(th));
      }
      v.push_back(it->second.get(f));
    }
    return v;
  };

  std::vector<TestResult> out;
  for (const auto* g : ordered) {
    for (double th : ths) {
      for (std::size_t f = 0; f < SpectralFeatures::names.size(); ++f) {
        const auto a = column(g->group_a, th, f, g->name);
        const auto b = column(g->group_b, th, f, g->name);
        TestResult r = run_protocol(a, b, cfg);
        r.group = g->name;
        r.feature = std::string(SpectralFeatures::names[f]);
        r.threshold = th;
        out.push_back(std::move(r));
      }
    }
  }
  return out;
}

}  // namespace coughxai

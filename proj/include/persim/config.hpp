#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "persim/errors.hpp"
#include "persim/scores.hpp"
#include "persim/search.hpp"

namespace persim {

/// Whole-experiment description. Rate-valued fields hold percentages, the
/// unit the config file speaks (internal computation uses fractions via
/// the accessors); that keeps serialization round-trips exact.
struct ExperimentConfig {
  std::vector<double> bands;
  int n_subjects = 0;
  int n_features = 0;
  std::vector<double> eer_targets_pct;
  // (frr_pct, far_pct) pairs
  std::vector<std::pair<double, double>> frr_far_targets_pct;
  std::vector<int> stage_replications;
  ImpostorPolicy::Mode impostor_mode = ImpostorPolicy::Mode::full_cross;
  std::uint64_t impostor_sample_size = 0;
  std::uint64_t master_seed = 0;
  std::string out_dir;
  int workers = 0;  // 0 = all hardware threads

  std::vector<TargetSpec> eer_targets() const {
    std::vector<TargetSpec> t;
    for (double pct : eer_targets_pct) t.push_back(TargetSpec::eer(pct / 100.0));
    return t;
  }
  std::vector<TargetSpec> frr_far_targets() const {
    std::vector<TargetSpec> t;
    for (const auto& [frr, far] : frr_far_targets_pct)
      t.push_back(TargetSpec::frr_at_far(frr / 100.0, far / 100.0));
    return t;
  }
  std::vector<TargetSpec> all_targets() const {
    auto t = eer_targets();
    const auto f = frr_far_targets();
    t.insert(t.end(), f.begin(), f.end());
    return t;
  }
  ImpostorPolicy policy() const {
    return impostor_mode == ImpostorPolicy::Mode::full_cross
               ? ImpostorPolicy::full_cross()
               : ImpostorPolicy::sampled(impostor_sample_size, master_seed);
  }
  std::vector<SearchStage> stages() const {
    std::vector<SearchStage> s;
    for (std::size_t i = 0; i < stage_replications.size(); ++i)
      s.push_back({1, n_features, stage_replications[i]});
    return s;
  }
  std::uint64_t impostor_count() const {
    return policy().pair_count(n_subjects);
  }
};

namespace config {

inline ExperimentConfig paper_scale() {
  ExperimentConfig c;
  c.bands = {0.35, 0.45, 0.55, 0.65, 0.75, 0.85, 0.95};
  c.n_subjects = 10000;
  c.n_features = 350;
  c.eer_targets_pct = {5.0, 2.0, 1.0, 0.5, 0.1};
  c.frr_far_targets_pct = {{1.0, 0.1}, {1.0, 0.01}, {1.0, 0.001}, {1.0, 0.0001}};
  c.stage_replications = {1, 20, 100};
  c.master_seed = 20180915;
  c.out_dir = "runs/paper";
  return c;
}

/// Desk scale: small enough for interactive machines. Carries the full
/// paper target set; apply_resolution_guard trims what 1,000 subjects
/// cannot resolve.
inline ExperimentConfig desk_scale() {
  ExperimentConfig c = paper_scale();
  c.n_subjects = 1000;
  c.stage_replications = {1, 5, 20};
  c.out_dir = "runs/desk";
  return c;
}

/// Drops targets finer than `margin` times the population's score
/// resolution (EER/FRR vs 1/n_genuine, FAR vs 1/n_impostor) and reports
/// each drop. The surviving config passes validate().
inline std::pair<ExperimentConfig, std::vector<std::string>>
apply_resolution_guard(const ExperimentConfig& cfg, double margin = 10.0) {
  ExperimentConfig out = cfg;
  std::vector<std::string> dropped;
  const double eer_floor = margin / static_cast<double>(cfg.n_subjects);
  out.eer_targets_pct.clear();
  for (double pct : cfg.eer_targets_pct) {
    if (pct / 100.0 >= eer_floor) {
      out.eer_targets_pct.push_back(pct);
    } else {
      char buf[160];
      std::snprintf(buf, sizeof(buf),
                    "EER %g%%: needs >= %.0f subjects for a %.0fx resolution "
                    "margin, have %d",
                    pct, margin / (pct / 100.0), margin, cfg.n_subjects);
      dropped.emplace_back(buf);
    }
  }
  const double far_floor =
      margin / static_cast<double>(cfg.impostor_count());
  out.frr_far_targets_pct.clear();
  for (const auto& [frr, far] : cfg.frr_far_targets_pct) {
    if (far / 100.0 >= far_floor && frr / 100.0 >= eer_floor) {
      out.frr_far_targets_pct.emplace_back(frr, far);
    } else {
      char buf[200];
      std::snprintf(buf, sizeof(buf),
                    "FRR %g%% @ FAR %g%%: needs >= %.0f impostor pairs for a "
                    "%.0fx resolution margin, have %llu",
                    frr, far, margin / (far / 100.0), margin,
                    static_cast<unsigned long long>(cfg.impostor_count()));
      dropped.emplace_back(buf);
    }
  }
  return {out, dropped};
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string part;
  std::istringstream ss(s);
  while (std::getline(ss, part, sep)) {
    part = trim(part);
    if (!part.empty()) parts.push_back(part);
  }
  return parts;
}

inline double to_double(const std::string& s, const std::string& key) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw config_error("config key '" + key + "': cannot parse number '" + s +
                       "'");
  }
}

inline long long to_int(const std::string& s, const std::string& key) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw config_error("config key '" + key + "': cannot parse integer '" + s +
                       "'");
  }
}

inline std::uint64_t to_u64(const std::string& s, const std::string& key) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw config_error("config key '" + key +
                       "': cannot parse unsigned integer '" + s + "'");
  }
}

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

/// Key = value format, one key per line, '#' starts a comment.
/// frr_far_targets_pct entries are FRR@FAR percent pairs (e.g. 1@0.1).
inline ExperimentConfig parse(const std::string& text) {
  ExperimentConfig c;
  bool saw_bands = false, saw_subjects = false, saw_features = false,
       saw_stages = false, saw_seed = false;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    if (const auto hash = line.find('#'); hash != std::string::npos)
      line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw config_error("config line " + std::to_string(line_no) +
                         ": expected key = value, got '" + raw + "'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));

    if (key == "bands") {
      for (const auto& p : detail::split(value, ','))
        c.bands.push_back(detail::to_double(p, key));
      saw_bands = true;
    } else if (key == "subjects") {
      c.n_subjects = static_cast<int>(detail::to_int(value, key));
      saw_subjects = true;
    } else if (key == "features") {
      c.n_features = static_cast<int>(detail::to_int(value, key));
      saw_features = true;
    } else if (key == "eer_targets_pct") {
      for (const auto& p : detail::split(value, ','))
        c.eer_targets_pct.push_back(detail::to_double(p, key));
    } else if (key == "frr_far_targets_pct") {
      for (const auto& p : detail::split(value, ',')) {
        const auto at = p.find('@');
        if (at == std::string::npos)
          throw config_error("config key 'frr_far_targets_pct': entry '" + p +
                             "' must look like FRR@FAR (percent)");
        c.frr_far_targets_pct.emplace_back(
            detail::to_double(detail::trim(p.substr(0, at)), key),
            detail::to_double(detail::trim(p.substr(at + 1)), key));
      }
    } else if (key == "stage_replications") {
      for (const auto& p : detail::split(value, ','))
        c.stage_replications.push_back(
            static_cast<int>(detail::to_int(p, key)));
      saw_stages = true;
    } else if (key == "impostor") {
      if (value == "full-cross") {
        c.impostor_mode = ImpostorPolicy::Mode::full_cross;
      } else if (value.rfind("sampled:", 0) == 0) {
        c.impostor_mode = ImpostorPolicy::Mode::sampled;
        c.impostor_sample_size = detail::to_u64(value.substr(8), key);
      } else {
        throw config_error(
            "config key 'impostor': expected full-cross or sampled:SIZE, got '" +
            value + "'");
      }
    } else if (key == "seed") {
      c.master_seed = detail::to_u64(value, key);
      saw_seed = true;
    } else if (key == "out_dir") {
      c.out_dir = value;
    } else if (key == "workers") {
      c.workers = static_cast<int>(detail::to_int(value, key));
    } else {
      throw config_error("config line " + std::to_string(line_no) +
                         ": unknown key '" + key + "'");
    }
  }
  if (!saw_bands || !saw_subjects || !saw_features || !saw_stages || !saw_seed)
    throw config_error(
        "config must set bands, subjects, features, stage_replications and "
        "seed");
  return c;
}

inline std::string serialize(const ExperimentConfig& c) {
  std::string out;
  out += "# persim experiment configuration\n";
  out += "bands = ";
  for (std::size_t i = 0; i < c.bands.size(); ++i)
    out += (i ? ", " : "") + detail::fmt(c.bands[i]);
  out += "\nsubjects = " + std::to_string(c.n_subjects);
  out += "\nfeatures = " + std::to_string(c.n_features);
  out += "\neer_targets_pct = ";
  for (std::size_t i = 0; i < c.eer_targets_pct.size(); ++i)
    out += (i ? ", " : "") + detail::fmt(c.eer_targets_pct[i]);
  out += "\nfrr_far_targets_pct = ";
  for (std::size_t i = 0; i < c.frr_far_targets_pct.size(); ++i)
    out += (i ? ", " : "") + detail::fmt(c.frr_far_targets_pct[i].first) + "@" +
           detail::fmt(c.frr_far_targets_pct[i].second);
  out += "\nstage_replications = ";
  for (std::size_t i = 0; i < c.stage_replications.size(); ++i)
    out += (i ? ", " : "") + std::to_string(c.stage_replications[i]);
  out += "\nimpostor = ";
  out += c.impostor_mode == ImpostorPolicy::Mode::full_cross
             ? "full-cross"
             : "sampled:" + std::to_string(c.impostor_sample_size);
  out += "\nseed = " + std::to_string(c.master_seed);
  out += "\nout_dir = " + c.out_dir;
  out += "\nworkers = " + std::to_string(c.workers);
  out += "\n";
  return out;
}

inline ExperimentConfig load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

/// Search-style commands need at least one target; generation does not.
inline void require_targets(const ExperimentConfig& c) {
  if (c.eer_targets_pct.empty() && c.frr_far_targets_pct.empty())
    throw config_error("config: no targets specified");
}

/// Hard validity: rejects impossible values and targets finer than the
/// score resolution the population provides (EER/FRR target below
/// 1/n_genuine, FAR level below 10/n_impostor).
inline void validate(const ExperimentConfig& c) {
  if (c.bands.empty()) throw config_error("config: bands must be non-empty");
  for (double b : c.bands)
    if (!(b > 0.0) || b > 1.0)
      throw config_error("config: band " + std::to_string(b) +
                         " outside (0, 1]");
  if (c.n_subjects < 2) throw config_error("config: subjects must be >= 2");
  if (c.n_features < 1) throw config_error("config: features must be >= 1");
  if (c.stage_replications.empty())
    throw config_error("config: stage_replications must be non-empty");
  for (std::size_t i = 0; i < c.stage_replications.size(); ++i) {
    if (c.stage_replications[i] < 1)
      throw config_error("config: stage replications must be >= 1");
    if (i > 0 &&
        c.stage_replications[i] <= c.stage_replications[i - 1])
      throw config_error("config: stage replications must strictly increase");
  }
  if (c.impostor_mode == ImpostorPolicy::Mode::sampled &&
      c.impostor_sample_size == 0)
    throw config_error("config: sampled impostor mode needs a sample size");
  if (c.out_dir.empty()) throw config_error("config: out_dir must be set");

  const double genuine_resolution = 1.0 / static_cast<double>(c.n_subjects);
  const double min_far =
      10.0 / static_cast<double>(c.impostor_count());
  for (double pct : c.eer_targets_pct) {
    const double t = pct / 100.0;
    if (!(t > 0.0) || !(t < 1.0))
      throw config_error("config: EER target " + std::to_string(pct) +
                         "% outside (0, 100)");
    if (t < genuine_resolution)
      throw resolution_error(
          "config: EER target " + std::to_string(pct) + "% is below the " +
              std::to_string(c.n_subjects) + "-subject genuine resolution",
          static_cast<std::uint64_t>(std::ceil(1.0 / t)),
          static_cast<std::uint64_t>(c.n_subjects));
  }
  for (const auto& [frr_pct, far_pct] : c.frr_far_targets_pct) {
    const double frr = frr_pct / 100.0;
    const double far = far_pct / 100.0;
    if (!(frr > 0.0) || !(frr < 1.0) || !(far > 0.0) || !(far < 1.0))
      throw config_error("config: FRR@FAR target " + std::to_string(frr_pct) +
                         "@" + std::to_string(far_pct) + " outside (0, 100)");
    if (frr < genuine_resolution)
      throw resolution_error(
          "config: FRR target " + std::to_string(frr_pct) +
              "% is below the genuine resolution",
          static_cast<std::uint64_t>(std::ceil(1.0 / frr)),
          static_cast<std::uint64_t>(c.n_subjects));
    if (far < min_far)
      throw resolution_error(
          "config: FAR level " + std::to_string(far_pct) + "% needs " +
              std::to_string(static_cast<std::uint64_t>(std::ceil(10.0 / far))) +
              " impostor pairs, have " + std::to_string(c.impostor_count()),
          static_cast<std::uint64_t>(std::ceil(10.0 / far)),
          c.impostor_count());
  }
}

}  // namespace config
}  // namespace persim

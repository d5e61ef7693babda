// persim: synthetic-feature persistence simulator and planning tool.
//
// Subcommands: generate, icc, search, fit, predict, reproduce-paper.
// Exit codes: 0 success, 2 config error, 3 resolution-guard failure,
// 4 target not reachable within the feature budget.

#include <CLI11.hpp>
#include <json.hpp>
#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "persim/config.hpp"
#include "persim/io.hpp"
#include "persim/manifest.hpp"
#include "persim/regression.hpp"
#include "persim/reliability.hpp"
#include "persim/search.hpp"
#include "persim/version.hpp"
#include "svg_plot.hpp"

namespace fs = std::filesystem;
using namespace persim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitResolution = 3;
constexpr int kExitNotReachable = 4;

struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string out_dir;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool with_config = true) {
  if (with_config)
    cmd->add_option("--config", opts.config_path, "experiment config file");
  cmd->add_option("--seed", opts.seed, "override the master seed");
  cmd->add_option("--workers", opts.workers,
                  "worker threads (0 = all hardware threads)");
  cmd->add_option("--out", opts.out_dir, "output directory");
}

ExperimentConfig resolve_config(const CommonOpts& opts,
                                std::optional<ExperimentConfig> preset) {
  ExperimentConfig cfg;
  if (!opts.config_path.empty())
    cfg = config::load(opts.config_path);
  else if (preset)
    cfg = *preset;
  else
    throw config_error("no --config given (and this command has no preset)");
  if (opts.seed) cfg.master_seed = *opts.seed;
  if (opts.workers) cfg.workers = *opts.workers;
  if (!opts.out_dir.empty()) {
    cfg.out_dir = opts.out_dir;
  } else if (const char* env = std::getenv("PERSIM_OUT"); env && *env) {
    // the environment variable relocates default outputs, nothing else
    cfg.out_dir = (fs::path(env) / cfg.out_dir).string();
  }
  return cfg;
}

void apply_workers(const ExperimentConfig& cfg) {
  if (cfg.workers > 0) omp_set_num_threads(cfg.workers);
}

fs::path prepare_out_dir(const std::string& dir) {
  if (dir.empty()) throw config_error("output directory not set");
  const fs::path out(dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  // fail fast if the directory cannot take files
  const fs::path probe = out / ".persim_write_probe";
  {
    std::ofstream f(probe, std::ios::trunc);
    if (!f) throw io_error("output directory " + out.string() +
                           " is not writable");
  }
  fs::remove(probe, ec);
  return out;
}

std::string band_label(double icc) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", icc);
  return buf;
}

std::string target_label(const TargetSpec& t) {
  char buf[64];
  if (t.kind == TargetSpec::Kind::eer)
    std::snprintf(buf, sizeof(buf), "EER < %g%%", t.eer_target * 100.0);
  else
    std::snprintf(buf, sizeof(buf), "FRR %g%% @ FAR %g%%", t.frr_target * 100.0,
                  t.far_level * 100.0);
  return buf;
}

struct Timer {
  std::chrono::steady_clock::time_point start =
      std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start)
        .count();
  }
};

// ---------------------------------------------------------------------------
// generate

int cmd_generate(const ExperimentConfig& cfg) {
  config::validate(cfg);
  apply_workers(cfg);
  const auto out = prepare_out_dir(cfg.out_dir);
  Timer timer;

  RunManifest manifest;
  manifest.command = "generate";
  manifest.created_utc = utc_timestamp_now();
  manifest.set_config(config::serialize(cfg));

  std::vector<IccTarget> targets;
  for (double b : cfg.bands) targets.emplace_back(b);
  std::vector<BandIccSummary> summaries;
  for (std::size_t b = 0; b < targets.size(); ++b) {
    const std::uint64_t band_seed = rng::derive_stream(
        rng::Domain::band_seed, {cfg.master_seed, static_cast<std::uint64_t>(b)});
    std::printf("[persim] generating band %s (%d x %d)\n",
                band_label(cfg.bands[b]).c_str(), cfg.n_subjects,
                cfg.n_features);
    const auto ds = generate_band(BandConfig(targets[b], cfg.n_subjects,
                                             cfg.n_features, band_seed));
    const auto file = out / ("band_" + band_label(cfg.bands[b]) + ".psim");
    io::write_dataset(ds, file);
    manifest.add_artifact(file.filename().string(), file);
    if (cfg.n_subjects >= 3) {
      summaries.push_back(band_icc_summary(ds));
    } else {
      manifest.notes.push_back("band " + band_label(cfg.bands[b]) +
                               ": ICC needs at least 3 subjects; summary "
                               "rows omitted");
    }
  }

  io::write_band_summary_csv(out / "band_summary.csv", summaries);
  manifest.add_artifact("band_summary.csv", out / "band_summary.csv");
  io::write_band_icc_csv(out / "band_icc.csv", summaries);
  manifest.add_artifact("band_icc.csv", out / "band_icc.csv");

  manifest.runtime_seconds = timer.seconds();
  write_manifest(manifest, out / "manifest.json");
  std::printf("[persim] wrote %zu datasets + summaries to %s (%.1fs)\n",
              cfg.bands.size(), out.string().c_str(),
              manifest.runtime_seconds);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// icc

int cmd_icc(const std::string& in_dir, const std::string& out_dir,
            std::optional<int> workers) {
  if (workers && *workers > 0) omp_set_num_threads(*workers);
  const auto out = prepare_out_dir(out_dir);
  Timer timer;

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(in_dir))
    if (entry.path().extension() == ".psim") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty())
    throw config_error("no .psim dataset files in " + in_dir);

  RunManifest manifest;
  manifest.command = "icc";
  manifest.created_utc = utc_timestamp_now();
  manifest.set_config("in_dir = " + in_dir + "\n");

  std::vector<BandIccSummary> summaries;
  for (const auto& f : files) {
    const auto ds = io::read_dataset(f);
    std::printf("[persim] %s: band %s\n", f.filename().string().c_str(),
                band_label(ds.config.target_icc.value).c_str());
    summaries.push_back(band_icc_summary(ds));
  }
  io::write_band_icc_csv(out / "band_icc.csv", summaries);
  io::write_band_summary_csv(out / "band_summary.csv", summaries);
  manifest.add_artifact("band_icc.csv", out / "band_icc.csv");
  manifest.add_artifact("band_summary.csv", out / "band_summary.csv");

  for (const auto& s : summaries)
    std::printf("[persim] band %s: mean icc %.4f, sd %.4f\n",
                band_label(s.target.value).c_str(), s.mean, s.sd);

  manifest.runtime_seconds = timer.seconds();
  write_manifest(manifest, out / "manifest.json");
  return kExitOk;
}

// ---------------------------------------------------------------------------
// search (resumable per cell)

nlohmann::json trace_to_json(const std::vector<StageTrace>& trace) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& t : trace)
    arr.push_back({{"stage", t.stage},
                   {"range_lo", t.range_lo},
                   {"range_hi", t.range_hi},
                   {"replications", t.replications},
                   {"means", t.means}});
  return arr;
}

std::vector<StageTrace> trace_from_json(const nlohmann::json& arr) {
  std::vector<StageTrace> trace;
  for (const auto& t : arr)
    trace.push_back({t.at("stage").get<int>(), t.at("range_lo").get<int>(),
                     t.at("range_hi").get<int>(),
                     t.at("replications").get<int>(),
                     t.at("means").get<std::vector<double>>()});
  return trace;
}

struct SearchRun {
  RequiredFeaturesTable table;
  int n_unreachable = 0;
  int n_resumed = 0;
};

SearchRun run_search(const ExperimentConfig& cfg, const fs::path& out,
                     RunManifest& manifest) {
  const auto targets = cfg.all_targets();
  const auto stages = cfg.stages();
  const auto policy = cfg.policy();
  const fs::path cell_dir = out / "cells";
  fs::create_directories(cell_dir);

  SearchRun run;
  for (std::size_t b = 0; b < cfg.bands.size(); ++b) {
    const std::uint64_t band_seed = rng::derive_stream(
        rng::Domain::band_seed, {cfg.master_seed, static_cast<std::uint64_t>(b)});
    std::optional<FeatureDataset> ds;  // generated lazily; cache may cover it
    const auto ensure_dataset = [&]() -> const FeatureDataset& {
      if (!ds) {
        std::printf("[persim] generating band %s\n",
                    band_label(cfg.bands[b]).c_str());
        ds = generate_band(BandConfig(IccTarget(cfg.bands[b]), cfg.n_subjects,
                                      cfg.n_features, band_seed));
      }
      return *ds;
    };

    // stage-1 sweep, cached per band and computed only when a cell needs it
    const fs::path stage1_file =
        cell_dir / ("stage1_band_" + band_label(cfg.bands[b]) + ".json");
    std::vector<std::vector<double>> sweep;
    const auto ensure_sweep = [&]() -> const std::vector<std::vector<double>>& {
      if (!sweep.empty()) return sweep;
      if (fs::exists(stage1_file)) {
        std::ifstream in(stage1_file);
        nlohmann::json j;
        in >> j;
        if (j.value("config_checksum", "") == manifest.config_checksum) {
          sweep = j.at("means").get<std::vector<std::vector<double>>>();
          if (sweep.size() == targets.size()) {
            run.n_resumed++;
            return sweep;
          }
          sweep.clear();
        }
      }
      std::printf("[persim] band %s: stage-1 sweep 1..%d (%d rep)\n",
                  band_label(cfg.bands[b]).c_str(), cfg.n_features,
                  stages.front().replications);
      std::fflush(stdout);
      sweep = stage1_sweep(ensure_dataset(), targets,
                           stages.front().replications, policy,
                           cfg.master_seed, b);
      nlohmann::json j;
      j["config_checksum"] = manifest.config_checksum;
      j["band"] = cfg.bands[b];
      j["means"] = sweep;
      std::ofstream f(stage1_file, std::ios::trunc);
      f << j.dump() << "\n";
      return sweep;
    };

    for (std::size_t t = 0; t < targets.size(); ++t) {
      const fs::path cell_file =
          cell_dir / ("cell_band_" + band_label(cfg.bands[b]) + "_target_" +
                      std::to_string(t) + ".json");
      CellOutcome cell{IccTarget(cfg.bands[b]), targets[t], std::nullopt,
                       std::numeric_limits<double>::quiet_NaN(), 0, ""};
      bool loaded = false;
      if (fs::exists(cell_file)) {
        std::ifstream in(cell_file);
        nlohmann::json j;
        in >> j;
        if (j.value("config_checksum", "") == manifest.config_checksum) {
          if (j.contains("n_required")) {
            RequiredFeatures rf{IccTarget(cfg.bands[b]), targets[t],
                                j.at("n_required").get<int>(),
                                j.at("mean_metric_at_n").get<double>(),
                                j.at("mean_metric_at_n_minus_1").is_null()
                                    ? std::numeric_limits<double>::quiet_NaN()
                                    : j.at("mean_metric_at_n_minus_1")
                                          .get<double>(),
                                trace_from_json(j.at("trace"))};
            cell.result = std::move(rf);
          } else {
            cell.failure = j.value("failure", "not reachable");
            cell.best_metric = j.value("best_metric", 0.0);
            cell.best_n = j.value("best_n", 0);
          }
          loaded = true;
          run.n_resumed++;
        }
      }
      if (!loaded) {
        std::printf("[persim] band %s: searching %s\n",
                    band_label(cfg.bands[b]).c_str(),
                    target_label(targets[t]).c_str());
        std::fflush(stdout);
        StageTrace stage1{1, 1, cfg.n_features, stages.front().replications,
                          ensure_sweep()[t]};
        nlohmann::json j;
        j["config_checksum"] = manifest.config_checksum;
        j["band"] = cfg.bands[b];
        j["target"] = target_label(targets[t]);
        try {
          const auto rf = find_required_features(
              ensure_dataset(), targets[t], stages, policy, cfg.master_seed,
              cell_context(cfg.master_seed, b, t), stage1);
          cell.result = rf;
          j["n_required"] = rf.n_required;
          j["mean_metric_at_n"] = rf.mean_metric_at_n;
          if (std::isnan(rf.mean_metric_at_n_minus_1))
            j["mean_metric_at_n_minus_1"] = nullptr;
          else
            j["mean_metric_at_n_minus_1"] = rf.mean_metric_at_n_minus_1;
          j["trace"] = trace_to_json(rf.trace);
        } catch (const not_reachable_error& e) {
          cell.failure = e.what();
          cell.best_metric = e.best_metric;
          cell.best_n = e.best_n;
          j["failure"] = cell.failure;
          j["best_metric"] = cell.best_metric;
          j["best_n"] = cell.best_n;
        }
        std::ofstream f(cell_file, std::ios::trunc);
        f << j.dump() << "\n";
      }
      if (cell.result) {
        std::printf("[persim]   band %s, %s -> n = %d (mean %.5f)\n",
                    band_label(cfg.bands[b]).c_str(),
                    target_label(targets[t]).c_str(), cell.result->n_required,
                    cell.result->mean_metric_at_n);
      } else {
        std::printf("[persim]   band %s, %s -> NOT REACHABLE (%s)\n",
                    band_label(cfg.bands[b]).c_str(),
                    target_label(targets[t]).c_str(), cell.failure.c_str());
        manifest.notes.push_back("cell band " + band_label(cfg.bands[b]) +
                                 ", " + target_label(targets[t]) + ": " +
                                 cell.failure);
        run.n_unreachable++;
      }
      run.table.cells.push_back(std::move(cell));
    }
  }
  return run;
}

int cmd_search(const ExperimentConfig& cfg) {
  config::validate(cfg);
  config::require_targets(cfg);
  apply_workers(cfg);
  const auto out = prepare_out_dir(cfg.out_dir);
  Timer timer;

  RunManifest manifest;
  manifest.command = "search";
  manifest.created_utc = utc_timestamp_now();
  manifest.set_config(config::serialize(cfg));

  const auto run = run_search(cfg, out, manifest);

  io::write_required_features_csv(out / "required_features.csv", run.table);
  manifest.add_artifact("required_features.csv",
                        out / "required_features.csv");
  io::write_search_trace_csv(out / "search_trace.csv", run.table);
  manifest.add_artifact("search_trace.csv", out / "search_trace.csv");
  if (run.n_resumed > 0) {
    std::printf("[persim] reused %d cached step(s)\n", run.n_resumed);
    manifest.notes.push_back(std::to_string(run.n_resumed) +
                             " cached step(s) reused");
  }
  manifest.runtime_seconds = timer.seconds();
  write_manifest(manifest, out / "manifest.json");
  std::printf("[persim] search finished in %.1fs (%d unreachable cells)\n",
              manifest.runtime_seconds, run.n_unreachable);
  return run.n_unreachable > 0 ? kExitNotReachable : kExitOk;
}

// ---------------------------------------------------------------------------
// fit

int cmd_fit(const std::string& in_csv, const std::string& out_dir,
            bool emit_svg, const std::string& realized_csv) {
  const auto out = prepare_out_dir(out_dir);
  Timer timer;

  RunManifest manifest;
  manifest.command = "fit";
  manifest.created_utc = utc_timestamp_now();
  manifest.set_config("in = " + in_csv + "\nrealized = " + realized_csv +
                      "\n");

  const auto rows = io::read_required_features_csv(in_csv);
  std::vector<TargetFit> fits;
  if (realized_csv.empty()) {
    fits = fit_all_targets(rows);
  } else {
    fits = fit_all_targets(rows, io::read_band_means_csv(realized_csv));
  }

  io::write_fits_csv(out / "fits.csv", fits);
  manifest.add_artifact("fits.csv", out / "fits.csv");

  // plot-ready long form: one row per (target, band) with the fitted value
  std::string plot = "target_kind,target_value,far_level,icc,n_required,"
                     "log10_n,fitted_log10_n\n";
  for (const auto& f : fits) {
    if (!f.fit) {
      manifest.notes.push_back("target " + target_label(f.target) +
                               " skipped: " + f.skip_reason);
      std::printf("[persim] %s skipped: %s\n", target_label(f.target).c_str(),
                  f.skip_reason.c_str());
      continue;
    }
    for (const auto& [icc, n] : f.points) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "%s,%.12g,%s,%.12g,%d,%.12g,%.12g\n",
                    f.target.kind == TargetSpec::Kind::eer ? "eer"
                                                           : "frr_at_far",
                    f.target.threshold_value(),
                    f.target.kind == TargetSpec::Kind::frr_at_far
                        ? svg::fmt(f.target.far_level).c_str()
                        : "",
                    icc, n, std::log10(static_cast<double>(n)),
                    f.fit->intercept + f.fit->slope * icc);
      plot += buf;
    }
    std::printf("[persim] %s: slope %.3f, intercept %.3f, R2 %.4f\n",
                target_label(f.target).c_str(), f.fit->slope,
                f.fit->intercept, f.fit->r_squared);
  }
  io::detail::write_text(out / "fit_points.csv", plot);
  manifest.add_artifact("fit_points.csv", out / "fit_points.csv");

  if (emit_svg) {
    std::vector<svg::Series> series;
    for (const auto& f : fits) {
      if (!f.fit) continue;
      svg::Series s;
      s.label = target_label(f.target);
      for (const auto& [icc, n] : f.points)
        s.points.emplace_back(icc, std::log10(static_cast<double>(n)));
      s.line_slope = f.fit->slope;
      s.line_intercept = f.fit->intercept;
      s.has_line = true;
      series.push_back(std::move(s));
    }
    svg::write_plot(out / "fits.svg", series, "ICC", "log10(features)");
    manifest.add_artifact("fits.svg", out / "fits.svg");
  }

  manifest.runtime_seconds = timer.seconds();
  write_manifest(manifest, out / "manifest.json");
  return kExitOk;
}

// ---------------------------------------------------------------------------
// predict

int cmd_predict(double icc_value, std::optional<double> eer_pct,
                std::optional<double> frr_pct, std::optional<double> far_pct,
                const std::string& fits_csv) {
  if (eer_pct.has_value() == (frr_pct.has_value() && far_pct.has_value()))
    throw config_error(
        "predict needs exactly one target: --eer PCT, or --frr PCT with "
        "--far PCT");
  TargetSpec want = eer_pct ? TargetSpec::eer(*eer_pct / 100.0)
                            : TargetSpec::frr_at_far(*frr_pct / 100.0,
                                                     *far_pct / 100.0);

  std::vector<std::pair<TargetSpec, RegressionFit>> fits;
  if (fits_csv.empty()) {
    fits = reference_fits();
  } else {
    for (const auto& f :
         fit_all_targets(io::read_required_features_csv(fits_csv)))
      if (f.fit) fits.emplace_back(f.target, *f.fit);
  }

  const auto matches = [&](const TargetSpec& t) {
    if (t.kind != want.kind) return false;
    const double tol = 1e-9;
    return t.kind == TargetSpec::Kind::eer
               ? std::abs(t.eer_target - want.eer_target) < tol
               : std::abs(t.frr_target - want.frr_target) < tol &&
                     std::abs(t.far_level - want.far_level) < tol;
  };
  for (const auto& [target, fit] : fits) {
    if (!matches(target)) continue;
    const auto p = predict_feature_count({IccTarget(icc_value), fit});
    std::printf("target          : %s\n", target_label(target).c_str());
    std::printf("planning line   : log10(n) = %.4f + (%.4f) * icc\n",
                fit.intercept, fit.slope);
    std::printf("log10(features) : %.5f\n", p.log10_n);
    std::printf("features needed : %ld\n", p.n);
    if (p.extrapolated)
      std::printf("warning: icc %.3f lies outside the fitted range "
                  "[%.2f, %.2f]; this is an extrapolation\n",
                  icc_value, fit.x_min, fit.x_max);
    return kExitOk;
  }
  std::string available;
  for (const auto& [target, fit] : fits)
    available += "\n  " + target_label(target);
  throw config_error("no fit for the requested target; available:" +
                     available);
}

// ---------------------------------------------------------------------------
// reproduce-paper

int cmd_reproduce(const std::string& scale, CommonOpts& opts, bool emit_svg) {
  ExperimentConfig cfg = resolve_config(
      opts, scale == "paper" ? config::paper_scale() : config::desk_scale());
  Timer timer;

  // desk scale drops targets below a 10x resolution margin, with a report
  std::vector<std::string> dropped;
  if (scale == "desk") {
    auto [trimmed, reports] = config::apply_resolution_guard(cfg);
    cfg = std::move(trimmed);
    dropped = std::move(reports);
  }
  for (const auto& d : dropped)
    std::printf("[persim] resolution guard dropped %s\n", d.c_str());

  config::validate(cfg);
  config::require_targets(cfg);
  apply_workers(cfg);
  const auto out = prepare_out_dir(cfg.out_dir);

  RunManifest manifest;
  manifest.command = "reproduce-paper --scale " + scale;
  manifest.created_utc = utc_timestamp_now();
  manifest.set_config(config::serialize(cfg));
  for (const auto& d : dropped)
    manifest.notes.push_back("resolution guard dropped " + d);

  // band summaries (ICC table analogue)
  std::vector<IccTarget> targets;
  for (double b : cfg.bands) targets.emplace_back(b);
  std::vector<BandIccSummary> summaries;
  for (std::size_t b = 0; b < cfg.bands.size(); ++b) {
    const std::uint64_t band_seed = rng::derive_stream(
        rng::Domain::band_seed, {cfg.master_seed, static_cast<std::uint64_t>(b)});
    std::printf("[persim] band %s: generating and estimating icc\n",
                band_label(cfg.bands[b]).c_str());
    const auto ds = generate_band(BandConfig(targets[b], cfg.n_subjects,
                                             cfg.n_features, band_seed));
    summaries.push_back(band_icc_summary(ds));
  }
  io::write_band_summary_csv(out / "band_summary.csv", summaries);
  manifest.add_artifact("band_summary.csv", out / "band_summary.csv");
  io::write_band_icc_csv(out / "band_icc.csv", summaries);
  manifest.add_artifact("band_icc.csv", out / "band_icc.csv");

  // staged searches (datasets regenerate inside; generation is cheap
  // relative to scoring and keeps the cells resumable)
  const auto run = run_search(cfg, out, manifest);
  io::write_required_features_csv(out / "required_features.csv", run.table);
  manifest.add_artifact("required_features.csv", out / "required_features.csv");
  io::write_search_trace_csv(out / "search_trace.csv", run.table);
  manifest.add_artifact("search_trace.csv", out / "search_trace.csv");

  // planning fits
  const auto fits = fit_all_targets(run.table);
  io::write_fits_csv(out / "fits.csv", fits);
  manifest.add_artifact("fits.csv", out / "fits.csv");
  for (const auto& f : fits) {
    if (f.fit)
      std::printf("[persim] %s: slope %.3f, intercept %.3f, R2 %.4f\n",
                  target_label(f.target).c_str(), f.fit->slope,
                  f.fit->intercept, f.fit->r_squared);
    else
      manifest.notes.push_back("target " + target_label(f.target) +
                               " skipped: " + f.skip_reason);
  }
  if (emit_svg) {
    std::vector<svg::Series> series;
    for (const auto& f : fits) {
      if (!f.fit) continue;
      svg::Series s;
      s.label = target_label(f.target);
      for (const auto& [icc, n] : f.points)
        s.points.emplace_back(icc, std::log10(static_cast<double>(n)));
      s.line_slope = f.fit->slope;
      s.line_intercept = f.fit->intercept;
      s.has_line = true;
      series.push_back(std::move(s));
    }
    svg::write_plot(out / "fits.svg", series, "ICC", "log10(features)");
    manifest.add_artifact("fits.svg", out / "fits.svg");
  }

  manifest.runtime_seconds = timer.seconds();
  write_manifest(manifest, out / "manifest.json");
  std::printf("[persim] reproduce-paper (%s scale) done in %.1fs\n",
              scale.c_str(), manifest.runtime_seconds);
  return run.n_unreachable > 0 ? kExitNotReachable : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthetic-feature persistence and error-rate planning"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  CommonOpts gen_opts, search_opts, repro_opts;

  auto* gen = app.add_subcommand(
      "generate", "generate feature bands and their ICC summaries");
  add_common(gen, gen_opts);

  auto* icc = app.add_subcommand(
      "icc", "estimate per-feature ICC for stored datasets");
  std::string icc_in, icc_out;
  std::optional<int> icc_workers;
  icc->add_option("--in", icc_in, "directory with .psim datasets")
      ->required();
  icc->add_option("--out", icc_out, "output directory")->required();
  icc->add_option("--workers", icc_workers, "worker threads");

  auto* search = app.add_subcommand(
      "search", "find minimum feature counts for every (band, target)");
  add_common(search, search_opts);

  auto* fit = app.add_subcommand(
      "fit", "fit the log-linear planning equations to a search table");
  std::string fit_in, fit_out, fit_realized;
  bool fit_svg = false;
  fit->add_option("--in", fit_in, "required_features.csv")->required();
  fit->add_option("--out", fit_out, "output directory")->required();
  fit->add_flag("--svg", fit_svg, "also draw fits.svg");
  fit->add_option("--realized", fit_realized,
                  "band_summary.csv: regress on realized mean ICC instead "
                  "of the generation target");

  auto* predict = app.add_subcommand(
      "predict", "feature count needed for a target at a given ICC");
  double predict_icc = 0.0;
  std::optional<double> predict_eer, predict_frr, predict_far;
  std::string predict_fits;
  predict->add_option("--icc", predict_icc, "temporal persistence (ICC)")
      ->required();
  predict->add_option("--eer", predict_eer, "EER target, percent");
  predict->add_option("--frr", predict_frr, "FRR target, percent");
  predict->add_option("--far", predict_far, "FAR level, percent");
  predict->add_option("--table", predict_fits,
                      "required_features.csv to fit and use instead of the "
                      "bundled reference coefficients");

  auto* repro = app.add_subcommand(
      "reproduce-paper", "run generate + search + fit end to end");
  std::string repro_scale = "desk";
  bool repro_svg = false;
  repro->add_option("--scale", repro_scale, "paper or desk")
      ->check(CLI::IsMember({"paper", "desk"}));
  repro->add_flag("--svg", repro_svg, "also draw fits.svg");
  add_common(repro, repro_opts);

  try {
    app.parse(argc, argv);

    if (gen->parsed())
      return cmd_generate(resolve_config(gen_opts, std::nullopt));
    if (icc->parsed()) return cmd_icc(icc_in, icc_out, icc_workers);
    if (search->parsed())
      return cmd_search(resolve_config(search_opts, std::nullopt));
    if (fit->parsed()) return cmd_fit(fit_in, fit_out, fit_svg, fit_realized);
    if (predict->parsed())
      return cmd_predict(predict_icc, predict_eer, predict_frr, predict_far,
                         predict_fits);
    if (repro->parsed()) return cmd_reproduce(repro_scale, repro_opts, repro_svg);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  } catch (const resolution_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitResolution;
  } catch (const config_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const not_reachable_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNotReachable;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return kExitOk;
}

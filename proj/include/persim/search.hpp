#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "persim/errors.hpp"
#include "persim/featuregen.hpp"
#include "persim/metrics.hpp"
#include "persim/scoring.hpp"

namespace persim {

/// One pass of the coarse-to-fine search: an inclusive feature-count range
/// scanned with a fixed number of random-subset replications per count.
struct SearchStage {
  int range_lo = 1;
  int range_hi = 1;
  int replications = 1;
};

struct TargetSpec {
  enum class Kind { eer, frr_at_far };

  static TargetSpec eer(double target) {
    check_rate(target, "EER target");
    TargetSpec t;
    t.kind = Kind::eer;
    t.eer_target = target;
    return t;
  }
  static TargetSpec frr_at_far(double frr_target, double far_level) {
    check_rate(frr_target, "FRR target");
    check_rate(far_level, "FAR level");
    TargetSpec t;
    t.kind = Kind::frr_at_far;
    t.frr_target = frr_target;
    t.far_level = far_level;
    return t;
  }

  double threshold_value() const {
    return kind == Kind::eer ? eer_target : frr_target;
  }

  Kind kind = Kind::eer;
  double eer_target = 0.0;
  double frr_target = 0.0;
  double far_level = 0.0;

 private:
  static void check_rate(double v, const char* what) {
    if (!(v > 0.0) || !(v < 1.0))
      throw domain_error(std::string(what) + " must lie in (0, 1), got " +
                         std::to_string(v));
  }
};

/// Per-stage scan record: means[i] is the mean metric at range_lo + i.
struct StageTrace {
  int stage;
  int range_lo;
  int range_hi;
  int replications;
  std::vector<double> means;
};

struct RequiredFeatures {
  IccTarget band_target;
  TargetSpec target;
  int n_required;
  double mean_metric_at_n;
  double mean_metric_at_n_minus_1;  // NaN when n_required == 1
  std::vector<StageTrace> trace;
};

namespace detail {

inline double metric_from_counts(const ScoreCounts& c, const TargetSpec& t) {
  return t.kind == TargetSpec::Kind::eer ? compute_eer(c).value
                                         : frr_at_far(c, t.far_level);
}

// Replication r of a scan at feature count n draws its subset from a
// stream derived from (scan context, stage, n, r); scheduling can never
// change which subset a replication sees.
inline rng::Stream subset_stream(std::uint64_t key, std::uint64_t scan_ctx,
                                 int stage, int n, int rep) {
  return rng::Stream(
      key, rng::derive_stream(rng::Domain::feature_subset,
                              {scan_ctx, static_cast<std::uint64_t>(stage),
                               static_cast<std::uint64_t>(n),
                               static_cast<std::uint64_t>(rep)}));
}

/// Scans [lo, hi] and returns the mean-metric curve. Evaluations run in
/// parallel over (n, rep); each evaluation is sequential inside and lands
/// in its own slot, so the curve is identical for any worker count.
inline std::vector<double> scan_range(const FeatureDataset& ds, int lo, int hi,
                                      int reps, const TargetSpec& target,
                                      const ImpostorPolicy& policy,
                                      std::uint64_t seed, std::uint64_t scan_ctx,
                                      int stage) {
  const int n_counts = hi - lo + 1;
  std::vector<double> per_eval(
      static_cast<std::size_t>(n_counts) * static_cast<std::size_t>(reps));
  const std::int64_t total = static_cast<std::int64_t>(per_eval.size());
#pragma omp parallel for schedule(dynamic) if (total > 1)
  for (std::int64_t e = 0; e < total; ++e) {
    const int n = lo + static_cast<int>(e / reps);
    const int r = static_cast<int>(e % reps);
    const auto subset = sample_feature_subset(
        ds.config.n_features, n, subset_stream(seed, scan_ctx, stage, n, r));
    per_eval[static_cast<std::size_t>(e)] =
        metric_from_counts(score_counts(ds, subset, policy), target);
  }
  std::vector<double> means(static_cast<std::size_t>(n_counts));
  for (int i = 0; i < n_counts; ++i) {
    double sum = 0.0;
    for (int r = 0; r < reps; ++r)
      sum += per_eval[static_cast<std::size_t>(i) * reps + r];
    means[static_cast<std::size_t>(i)] = sum / static_cast<double>(reps);
  }
  return means;
}

inline double scan_single(const FeatureDataset& ds, int n, int reps,
                          const TargetSpec& target,
                          const ImpostorPolicy& policy, std::uint64_t seed,
                          std::uint64_t scan_ctx, int stage) {
  return scan_range(ds, n, n, reps, target, policy, seed, scan_ctx, stage)[0];
}

struct Bracket {
  int lo;  // smallest n with mean < target
  int hi;  // one past the largest n with mean >= target
};

inline std::optional<Bracket> find_bracket(const std::vector<double>& means,
                                           int lo, double target) {
  std::optional<int> first_below, last_at_or_above;
  for (std::size_t i = 0; i < means.size(); ++i) {
    if (means[i] < target) {
      if (!first_below) first_below = lo + static_cast<int>(i);
    } else {
      last_at_or_above = lo + static_cast<int>(i);
    }
  }
  if (!first_below) return std::nullopt;
  const int hi = last_at_or_above ? *last_at_or_above + 1 : *first_below;
  return Bracket{*first_below, std::max(*first_below, hi)};
}

}  // namespace detail

/// Mean metric over `reps` fresh uniform random n-subsets.
inline double mean_metric(const FeatureDataset& ds, int n, int reps,
                          const TargetSpec& target,
                          const ImpostorPolicy& policy, std::uint64_t seed,
                          std::uint64_t scan_ctx = 0, int stage = 0) {
  if (n < 1 || n > ds.config.n_features)
    throw domain_error("mean_metric: feature count " + std::to_string(n) +
                       " outside [1, " +
                       std::to_string(ds.config.n_features) + "]");
  if (reps < 1) throw domain_error("mean_metric: replications must be >= 1");
  return detail::scan_single(ds, n, reps, target, policy, seed, scan_ctx,
                             stage);
}

/// Staged search for the minimum feature count whose mean metric falls
/// strictly below the target. Stage 1 scans its full range; each later
/// stage re-scans the crossing bracket widened by 25% of its width
/// (clamped to [1, n_features]) at a higher replication count. The final
/// stage extends its scan past a range boundary when needed so that the
/// crossing pair mean(n-1) >= target > mean(n) is always confirmed.
inline RequiredFeatures find_required_features(
    const FeatureDataset& ds, const TargetSpec& target,
    const std::vector<SearchStage>& stages, const ImpostorPolicy& policy,
    std::uint64_t seed, std::uint64_t scan_ctx = 0,
    std::optional<StageTrace> precomputed_stage1 = std::nullopt) {
  const int n_features = ds.config.n_features;
  if (stages.empty()) throw domain_error("search needs at least one stage");
  for (std::size_t s = 1; s < stages.size(); ++s)
    if (stages[s].replications <= stages[s - 1].replications)
      throw domain_error("search stages must have increasing replications");
  if (!precomputed_stage1 &&
      (stages.front().range_lo != 1 || stages.front().range_hi != n_features))
    throw domain_error("stage-1 range must cover [1, n_features]");

  const double threshold = target.threshold_value();
  RequiredFeatures result{ds.config.target_icc, target, 0, 0.0,
                          std::numeric_limits<double>::quiet_NaN(),
                          {}};
  double best_metric = std::numeric_limits<double>::infinity();
  int best_n = 0;
  const auto note = [&](double mean, int n) {
    if (mean < best_metric) {
      best_metric = mean;
      best_n = n;
    }
  };

  int lo = 1, hi = n_features;
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const int stage_idx = static_cast<int>(s);
    const int reps = stages[s].replications;

    StageTrace tr;
    if (s == 0 && precomputed_stage1) {
      tr = *precomputed_stage1;
    } else {
      tr = StageTrace{stage_idx + 1, lo, hi, reps,
                      detail::scan_range(ds, lo, hi, reps, target, policy,
                                         seed, scan_ctx, stage_idx)};
    }
    for (std::size_t i = 0; i < tr.means.size(); ++i)
      note(tr.means[i], tr.range_lo + static_cast<int>(i));

    if (s + 1 < stages.size()) {
      const auto bracket =
          detail::find_bracket(tr.means, tr.range_lo, threshold);
      if (!bracket) {
        if (tr.range_hi >= n_features) {
          result.trace.push_back(std::move(tr));
          throw not_reachable_error(
              "target " + std::to_string(threshold) + " not reached within " +
                  std::to_string(n_features) + " features (best mean " +
                  std::to_string(best_metric) + " at n=" +
                  std::to_string(best_n) + ")",
              best_metric, best_n);
        }
        lo = tr.range_hi;  // crossing lies above: re-scan the remainder
        hi = n_features;
      } else {
        const int width = bracket->hi - bracket->lo;
        const int pad = std::max(1, static_cast<int>(std::lround(0.25 * width)));
        lo = std::clamp(bracket->lo - pad, 1, n_features);
        hi = std::clamp(bracket->hi + pad, 1, n_features);
      }
      result.trace.push_back(std::move(tr));
      continue;
    }

    // --- final stage ---
    int first_below = -1;
    for (std::size_t i = 0; i < tr.means.size(); ++i)
      if (tr.means[i] < threshold) {
        first_below = static_cast<int>(i);
        break;
      }

    if (first_below < 0) {
      // crossing above the scanned range: extend upward
      bool found = false;
      for (int probe = tr.range_hi + 1; probe <= n_features; ++probe) {
        const double m = detail::scan_single(ds, probe, reps, target, policy,
                                             seed, scan_ctx, stage_idx);
        note(m, probe);
        tr.means.push_back(m);
        tr.range_hi = probe;
        if (m < threshold) {
          result.n_required = probe;
          result.mean_metric_at_n = m;
          result.mean_metric_at_n_minus_1 = tr.means[tr.means.size() - 2];
          found = true;
          break;
        }
      }
      result.trace.push_back(std::move(tr));
      if (!found)
        throw not_reachable_error(
            "target " + std::to_string(threshold) + " not reached within " +
                std::to_string(n_features) + " features (best mean " +
                std::to_string(best_metric) + " at n=" + std::to_string(best_n) +
                ")",
            best_metric, best_n);
      return result;
    }

    const int n0 = tr.range_lo + first_below;
    if (n0 == 1) {
      result.n_required = 1;
      result.mean_metric_at_n = tr.means.front();
    } else if (first_below > 0) {
      // predecessor is >= threshold by minimality of first_below
      result.n_required = n0;
      result.mean_metric_at_n = tr.means[static_cast<std::size_t>(first_below)];
      result.mean_metric_at_n_minus_1 =
          tr.means[static_cast<std::size_t>(first_below) - 1];
    } else {
      // crossing sits on the lower boundary: confirm downward
      std::vector<double> chain;  // means at range_lo-1, range_lo-2, ...
      for (int probe = tr.range_lo - 1; probe >= 1; --probe) {
        const double m = detail::scan_single(ds, probe, reps, target, policy,
                                             seed, scan_ctx, stage_idx);
        note(m, probe);
        chain.push_back(m);
        if (m >= threshold) break;
      }
      std::size_t run = 0;  // leading below-threshold run of the chain
      while (run < chain.size() && chain[run] < threshold) ++run;
      if (run == 0) {
        result.n_required = n0;
        result.mean_metric_at_n = tr.means.front();
        result.mean_metric_at_n_minus_1 = chain.front();
      } else {
        result.n_required = tr.range_lo - static_cast<int>(run);
        result.mean_metric_at_n = chain[run - 1];
        if (run < chain.size())
          result.mean_metric_at_n_minus_1 = chain[run];
        // else the run reached n = 1; the n-1 bound is waived
      }
      tr.means.insert(tr.means.begin(), chain.rbegin(), chain.rend());
      tr.range_lo -= static_cast<int>(chain.size());
    }
    result.trace.push_back(std::move(tr));
    return result;
  }
  throw error("unreachable: staged search fell through");
}

inline std::uint64_t band_stage1_context(std::uint64_t master_seed,
                                         std::size_t band_index) {
  return rng::derive_stream(rng::Domain::search_cell,
                            {master_seed, static_cast<std::uint64_t>(band_index)});
}

inline std::uint64_t cell_context(std::uint64_t master_seed,
                                  std::size_t band_index,
                                  std::size_t target_index) {
  return rng::derive_stream(rng::Domain::search_cell,
                            {master_seed, static_cast<std::uint64_t>(band_index),
                             static_cast<std::uint64_t>(target_index)});
}

/// Stage-1 sweep of 1..n_features, shared across targets: one score pass
/// per (n, replication) evaluated under every target's metric. Returns
/// means[target][n - 1].
inline std::vector<std::vector<double>> stage1_sweep(
    const FeatureDataset& ds, const std::vector<TargetSpec>& targets,
    int replications, const ImpostorPolicy& policy, std::uint64_t master_seed,
    std::size_t band_index) {
  const int n_features = ds.config.n_features;
  const std::uint64_t ctx = band_stage1_context(master_seed, band_index);
  const std::int64_t total =
      static_cast<std::int64_t>(n_features) * replications;
  std::vector<double> per_eval(static_cast<std::size_t>(total) *
                               targets.size());
#pragma omp parallel for schedule(dynamic) if (total > 1)
  for (std::int64_t e = 0; e < total; ++e) {
    const int n = 1 + static_cast<int>(e / replications);
    const int r = static_cast<int>(e % replications);
    const auto subset = sample_feature_subset(
        n_features, n, detail::subset_stream(master_seed, ctx, 0, n, r));
    const auto counts = score_counts(ds, subset, policy);
    for (std::size_t t = 0; t < targets.size(); ++t)
      per_eval[static_cast<std::size_t>(e) * targets.size() + t] =
          detail::metric_from_counts(counts, targets[t]);
  }
  std::vector<std::vector<double>> means(
      targets.size(),
      std::vector<double>(static_cast<std::size_t>(n_features)));
  for (std::size_t t = 0; t < targets.size(); ++t)
    for (int n = 1; n <= n_features; ++n) {
      double sum = 0.0;
      for (int r = 0; r < replications; ++r)
        sum += per_eval[(static_cast<std::size_t>(n - 1) * replications + r) *
                            targets.size() +
                        t];
      means[t][static_cast<std::size_t>(n - 1)] =
          sum / static_cast<double>(replications);
    }
  return means;
}

/// Outcome of one (band, target) cell; either a result or the best the
/// search achieved before exhausting the feature budget.
struct CellOutcome {
  IccTarget band_target;
  TargetSpec target;
  std::optional<RequiredFeatures> result;
  double best_metric = std::numeric_limits<double>::quiet_NaN();
  int best_n = 0;
  std::string failure;
};

struct RequiredFeaturesTable {
  std::vector<CellOutcome> cells;
};

/// Runs the staged search for every (band, target) pair. Stage 1 is swept
/// once per band and shared across that band's targets: the expensive
/// score pass yields every metric at once, mirroring the single initial
/// 1..n_features sweep of the source procedure.
inline RequiredFeaturesTable required_features_table(
    const std::vector<FeatureDataset>& bands,
    const std::vector<TargetSpec>& targets,
    const std::vector<SearchStage>& stages, const ImpostorPolicy& policy,
    std::uint64_t master_seed) {
  if (bands.empty() || targets.empty())
    throw domain_error("required_features_table: empty bands or targets");
  if (stages.empty())
    throw domain_error("required_features_table: empty stages");

  RequiredFeaturesTable table;
  for (std::size_t b = 0; b < bands.size(); ++b) {
    const auto& ds = bands[b];
    const auto stage1_means = stage1_sweep(ds, targets,
                                           stages.front().replications, policy,
                                           master_seed, b);
    for (std::size_t t = 0; t < targets.size(); ++t) {
      StageTrace stage1{1, 1, ds.config.n_features,
                        stages.front().replications, stage1_means[t]};
      CellOutcome cell{ds.config.target_icc, targets[t], std::nullopt,
                       std::numeric_limits<double>::quiet_NaN(), 0, ""};
      try {
        cell.result =
            find_required_features(ds, targets[t], stages, policy, master_seed,
                                   cell_context(master_seed, b, t), stage1);
      } catch (const not_reachable_error& e) {
        cell.best_metric = e.best_metric;
        cell.best_n = e.best_n;
        cell.failure = e.what();
      }
      table.cells.push_back(std::move(cell));
    }
  }
  return table;
}

}  // namespace persim

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "persim/errors.hpp"
#include "persim/featuregen.hpp"

namespace persim {

struct IccEstimate {
  double value;
};

struct BandIccSummary {
  IccTarget target;
  double mean;
  double sd;
  std::vector<double> per_feature;
  /// Fixed-width bins, (lower edge, count).
  std::vector<std::pair<double, std::uint64_t>> histogram;
};

namespace detail {

// Neumaier-compensated sum; sequential, so parallel callers that store
// per-index values first get results independent of scheduling.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline std::pair<double, double> mean_sd(std::span<const double> xs) {
  CompensatedSum s;
  for (double x : xs) s.add(x);
  const double mean = s.value() / static_cast<double>(xs.size());
  CompensatedSum sq;
  for (double x : xs) sq.add((x - mean) * (x - mean));
  const double var =
      xs.size() > 1 ? sq.value() / static_cast<double>(xs.size() - 1) : 0.0;
  return {mean, std::sqrt(std::max(0.0, var))};
}

}  // namespace detail

/// Two-way consistency ICC for two sessions, ICC(3,1):
/// (MS_subjects - MS_error) / (MS_subjects + MS_error), from the
/// subjects x sessions ANOVA decomposition. Session mean shifts cancel.
inline IccEstimate icc_two_session(std::span<const double> x1,
                                   std::span<const double> x2) {
  if (x1.size() != x2.size())
    throw degenerate_input_error(
        "icc_two_session: session lengths differ (" +
        std::to_string(x1.size()) + " vs " + std::to_string(x2.size()) + ")");
  const std::size_t n = x1.size();
  if (n < 3)
    throw degenerate_input_error(
        "icc_two_session: need at least 3 subjects, got " + std::to_string(n));

  detail::CompensatedSum s1, s2;
  for (std::size_t i = 0; i < n; ++i) {
    s1.add(x1[i]);
    s2.add(x2[i]);
  }
  const double nn = static_cast<double>(n);
  const double mean1 = s1.value() / nn;
  const double mean2 = s2.value() / nn;
  const double grand = 0.5 * (mean1 + mean2);

  detail::CompensatedSum ss_rows_acc, ss_total_acc;
  for (std::size_t i = 0; i < n; ++i) {
    const double row_mean = 0.5 * (x1[i] + x2[i]);
    ss_rows_acc.add((row_mean - grand) * (row_mean - grand));
    ss_total_acc.add((x1[i] - grand) * (x1[i] - grand));
    ss_total_acc.add((x2[i] - grand) * (x2[i] - grand));
  }
  const double ss_rows = 2.0 * ss_rows_acc.value();
  const double ss_cols =
      nn * ((mean1 - grand) * (mean1 - grand) + (mean2 - grand) * (mean2 - grand));
  const double ss_error =
      std::max(0.0, ss_total_acc.value() - ss_rows - ss_cols);

  const double ms_rows = ss_rows / (nn - 1.0);
  const double ms_error = ss_error / (nn - 1.0);  // (n-1)(k-1), k = 2
  const double denom = ms_rows + ms_error;
  if (denom <= 0.0)
    throw degenerate_input_error(
        "icc_two_session: no variance across subjects");
  return IccEstimate{(ms_rows - ms_error) / denom};
}

/// Per-feature ICC estimates with band-level mean/sd and a fixed-width
/// histogram of the estimates.
inline BandIccSummary band_icc_summary(const FeatureDataset& ds,
                                       double bin_width = 0.005) {
  const int f = ds.config.n_features;
  std::vector<double> icc(static_cast<std::size_t>(f));
#pragma omp parallel for schedule(static)
  for (int j = 0; j < f; ++j) {
    const std::size_t n = static_cast<std::size_t>(ds.config.n_subjects);
    icc[static_cast<std::size_t>(j)] =
        icc_two_session({ds.session1.col(j).data(), n},
                        {ds.session2.col(j).data(), n})
            .value;
  }

  const auto [mean, sd] = detail::mean_sd(icc);

  BandIccSummary summary{ds.config.target_icc, mean, sd, icc, {}};
  const auto [lo_it, hi_it] = std::minmax_element(icc.begin(), icc.end());
  const double lo_edge = std::floor(*lo_it / bin_width) * bin_width;
  const int n_bins =
      std::max(1, static_cast<int>(std::floor((*hi_it - lo_edge) / bin_width)) + 1);
  summary.histogram.assign(static_cast<std::size_t>(n_bins), {0.0, 0});
  for (int b = 0; b < n_bins; ++b)
    summary.histogram[static_cast<std::size_t>(b)].first = lo_edge + b * bin_width;
  for (double v : icc) {
    int b = static_cast<int>(std::floor((v - lo_edge) / bin_width));
    b = std::clamp(b, 0, n_bins - 1);
    ++summary.histogram[static_cast<std::size_t>(b)].second;
  }
  return summary;
}

}  // namespace persim

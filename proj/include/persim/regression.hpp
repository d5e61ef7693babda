#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "persim/errors.hpp"
#include "persim/search.hpp"

namespace persim {

/// Ordinary least squares of log10(feature count) on ICC, with the
/// one-way F test of the slope.
struct RegressionFit {
  double slope = 0.0;      // per unit ICC
  double intercept = 0.0;  // log10 features at ICC = 0
  double r_squared = 0.0;
  double f_value = 0.0;
  int df_model = 1;
  int df_residual = 0;
  double p_value = 1.0;
  int n_points = 0;
  double x_min = 0.0;  // fitted ICC range, for extrapolation flagging
  double x_max = 0.0;
};

struct PlanningQuery {
  IccTarget icc;
  RegressionFit fit;
};

struct Prediction {
  long n;
  double log10_n;
  bool extrapolated;
};

namespace detail {

/// Regularized incomplete beta I_x(a, b) by the modified Lentz continued
/// fraction, converged to 1e-12.
inline double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  // use the symmetric form on whichever side converges fast
  if (x > (a + 1.0) / (a + b + 2.0))
    return 1.0 - incomplete_beta(b, a, 1.0 - x);

  const double ln_front = a * std::log(x) + b * std::log1p(-x) -
                          (std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));

  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-12;
  double c = 1.0;
  double d = 1.0 - (a + b) * x / (a + 1.0);
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 500; ++m) {
    const double dm = static_cast<double>(m);
    // even step
    double num = dm * (b - dm) * x / ((a + 2.0 * dm - 1.0) * (a + 2.0 * dm));
    d = 1.0 + num * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + num / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    // odd step
    num = -(a + dm) * (a + b + dm) * x /
          ((a + 2.0 * dm) * (a + 2.0 * dm + 1.0));
    d = 1.0 + num * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + num / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < eps) break;
  }
  return std::exp(ln_front) * h / a;
}

/// Survival function of the F(d1, d2) distribution at f.
inline double f_distribution_sf(double f, double d1, double d2) {
  if (!(f >= 0.0)) return 1.0;
  if (std::isinf(f)) return 0.0;
  return incomplete_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f));
}

}  // namespace detail

/// Fits log10(n_features) = intercept + slope * icc by OLS.
inline RegressionFit fit_log_linear(
    const std::vector<std::pair<double, int>>& points) {
  const std::size_t n = points.size();
  if (n < 3)
    throw degenerate_input_error("fit_log_linear: need at least 3 points, got " +
                                 std::to_string(n));
  for (const auto& [x, count] : points)
    if (count < 1)
      throw domain_error("fit_log_linear: feature counts must be positive");

  double sx = 0.0, sy = 0.0;
  for (const auto& [x, count] : points) {
    sx += x;
    sy += std::log10(static_cast<double>(count));
  }
  const double nn = static_cast<double>(n);
  const double mean_x = sx / nn;
  const double mean_y = sy / nn;

  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  double x_min = points.front().first, x_max = points.front().first;
  for (const auto& [x, count] : points) {
    const double dx = x - mean_x;
    const double dy = std::log10(static_cast<double>(count)) - mean_y;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
    x_min = std::min(x_min, x);
    x_max = std::max(x_max, x);
  }
  if (sxx <= 0.0)
    throw degenerate_input_error("fit_log_linear: all ICC values identical");

  RegressionFit fit;
  fit.n_points = static_cast<int>(n);
  fit.df_residual = static_cast<int>(n) - 2;
  fit.x_min = x_min;
  fit.x_max = x_max;
  fit.slope = sxy / sxx;
  fit.intercept = mean_y - fit.slope * mean_x;

  const double ss_reg = fit.slope * sxy;
  const double ss_res = std::max(0.0, syy - ss_reg);
  if (syy <= 0.0) {
    // all y identical: a flat, perfectly fitted line
    fit.r_squared = 1.0;
    fit.f_value = std::numeric_limits<double>::infinity();
    fit.p_value = 0.0;
    return fit;
  }
  fit.r_squared = 1.0 - ss_res / syy;
  if (ss_res <= 1e-14 * syy) {
    fit.r_squared = 1.0;
    fit.f_value = std::numeric_limits<double>::infinity();
    fit.p_value = 0.0;
  } else {
    fit.f_value = ss_reg / (ss_res / static_cast<double>(fit.df_residual));
    fit.p_value = detail::f_distribution_sf(
        fit.f_value, 1.0, static_cast<double>(fit.df_residual));
  }
  return fit;
}

/// Inverts the planning line: n = round(10^(intercept + slope * icc)),
/// floored at 1; flags queries outside the fitted ICC range.
inline Prediction predict_feature_count(const PlanningQuery& q) {
  const double log10_n = q.fit.intercept + q.fit.slope * q.icc.value;
  const long n = std::max(1L, std::lround(std::pow(10.0, log10_n)));
  const bool outside =
      q.icc.value < q.fit.x_min || q.icc.value > q.fit.x_max;
  return {n, log10_n, outside};
}

/// One planning fit per target column of a required-features table.
struct TargetFit {
  TargetSpec target;
  std::optional<RegressionFit> fit;
  std::vector<std::pair<double, int>> points;  // (icc, n_required) used
  std::string skip_reason;
};

/// Row form of a required-features table (what required_features.csv holds).
struct RequiredFeaturesRow {
  double band_target;
  TargetSpec target;
  int n_required;
  double mean_metric_at_n;
};

inline std::vector<TargetFit> fit_all_targets(
    const std::vector<RequiredFeaturesRow>& rows) {
  // group rows by target, preserving first-appearance order
  std::vector<TargetFit> fits;
  const auto same_target = [](const TargetSpec& a, const TargetSpec& b) {
    return a.kind == b.kind && a.eer_target == b.eer_target &&
           a.frr_target == b.frr_target && a.far_level == b.far_level;
  };
  for (const auto& row : rows) {
    auto it = std::find_if(fits.begin(), fits.end(), [&](const TargetFit& f) {
      return same_target(f.target, row.target);
    });
    if (it == fits.end()) {
      fits.push_back({row.target, std::nullopt, {}, ""});
      it = std::prev(fits.end());
    }
    it->points.emplace_back(row.band_target, row.n_required);
  }
  for (auto& f : fits) {
    if (f.points.size() < 3) {
      f.skip_reason = "only " + std::to_string(f.points.size()) +
                      " band(s) completed; need 3 for a fit";
      continue;
    }
    f.fit = fit_log_linear(f.points);
  }
  return fits;
}

/// Realized-mean mode: fit against per-band mean ICC estimates instead of
/// the generation targets (keyed by band target).
inline std::vector<TargetFit> fit_all_targets(
    const std::vector<RequiredFeaturesRow>& rows,
    const std::map<double, double>& realized_mean_by_band) {
  std::vector<RequiredFeaturesRow> remapped = rows;
  for (auto& row : remapped) {
    const auto it = realized_mean_by_band.find(row.band_target);
    if (it == realized_mean_by_band.end())
      throw domain_error("fit_all_targets: no realized mean for band " +
                         std::to_string(row.band_target));
    row.band_target = it->second;
  }
  return fit_all_targets(remapped);
}

inline std::vector<RequiredFeaturesRow> table_rows(
    const RequiredFeaturesTable& table) {
  std::vector<RequiredFeaturesRow> rows;
  for (const auto& cell : table.cells) {
    if (!cell.result) continue;
    rows.push_back({cell.band_target.value, cell.target,
                    cell.result->n_required, cell.result->mean_metric_at_n});
  }
  return rows;
}

inline std::vector<TargetFit> fit_all_targets(const RequiredFeaturesTable& table) {
  return fit_all_targets(table_rows(table));
}

/// Planning coefficients from the reference simulation shipped with the
/// tool (5 EER targets and 4 FRR@FAR targets, fitted over ICC 0.35-0.95).
inline std::vector<std::pair<TargetSpec, RegressionFit>> reference_fits() {
  const auto fit = [](double slope, double intercept, double r2, double f,
                      double p) {
    RegressionFit r;
    r.slope = slope;
    r.intercept = intercept;
    r.r_squared = r2;
    r.f_value = f;
    r.df_model = 1;
    r.df_residual = 5;
    r.p_value = p;
    r.n_points = 7;
    r.x_min = 0.35;
    r.x_max = 0.95;
    return r;
  };
  return {
      {TargetSpec::eer(0.05), fit(-1.987, 2.587, 0.999, 3637.0, 2e-8)},
      {TargetSpec::eer(0.02), fit(-2.042, 2.804, 0.998, 2801.0, 5e-8)},
      {TargetSpec::eer(0.01), fit(-2.082, 2.930, 0.995, 1036.0, 5e-7)},
      {TargetSpec::eer(0.005), fit(-2.084, 3.016, 0.997, 1678.0, 2e-7)},
      {TargetSpec::eer(0.001), fit(-2.093, 3.176, 0.997, 1476.0, 2e-7)},
      {TargetSpec::frr_at_far(0.01, 0.001), fit(-2.086, 3.060, 0.997, 1605.0, 2e-7)},
      {TargetSpec::frr_at_far(0.01, 0.0001), fit(-2.076, 3.150, 0.998, 2089.0, 9e-8)},
      {TargetSpec::frr_at_far(0.01, 0.00001), fit(-2.091, 3.232, 0.997, 1454.0, 2e-7)},
      {TargetSpec::frr_at_far(0.01, 0.000001), fit(-2.064, 3.279, 0.995, 871.0, 8e-6)},
  };
}

}  // namespace persim

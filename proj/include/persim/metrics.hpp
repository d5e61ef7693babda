#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "persim/errors.hpp"
#include "persim/scores.hpp"

namespace persim {

/// far = fraction of impostor scores strictly above threshold;
/// frr = fraction of genuine scores at or below threshold.
struct ErrorRatePoint {
  double threshold;
  double far;
  double frr;
};

struct EerEstimate {
  double value;
  double threshold;
  double genuine_resolution;  // 1 / n_genuine
};

/// Sufficient statistics for every threshold metric, sized by the genuine
/// set only. Impostor scores are reduced to two tallies against the sorted
/// genuine values, so a full 10^8-pair cross never has to be stored:
///   below_hist[l]       = #impostors with exactly l genuine values < s
///   at_or_below_hist[u] = #impostors with exactly u genuine values <= s
struct ScoreCounts {
  std::vector<double> genuine_sorted;
  std::vector<std::uint64_t> below_hist;        // size n_genuine + 1
  std::vector<std::uint64_t> at_or_below_hist;  // size n_genuine + 1
  std::uint64_t n_impostor = 0;
};

namespace detail {

inline void tally_impostor(std::span<const double> genuine_sorted, double s,
                           std::span<std::uint64_t> below_hist,
                           std::span<std::uint64_t> at_or_below_hist) {
  const auto lo =
      std::lower_bound(genuine_sorted.begin(), genuine_sorted.end(), s);
  const std::size_t l =
      static_cast<std::size_t>(lo - genuine_sorted.begin());
  std::size_t u = l;
  if (lo != genuine_sorted.end() && *lo == s)
    u = static_cast<std::size_t>(
        std::upper_bound(lo, genuine_sorted.end(), s) - genuine_sorted.begin());
  ++below_hist[l];
  ++at_or_below_hist[u];
}

}  // namespace detail

inline ScoreCounts make_score_counts(std::span<const double> genuine,
                                     std::span<const double> impostor) {
  if (genuine.empty() || impostor.empty())
    throw degenerate_input_error(
        "score counts need at least one genuine and one impostor score");
  ScoreCounts c;
  c.genuine_sorted.assign(genuine.begin(), genuine.end());
  std::sort(c.genuine_sorted.begin(), c.genuine_sorted.end());
  c.below_hist.assign(genuine.size() + 1, 0);
  c.at_or_below_hist.assign(genuine.size() + 1, 0);
  c.n_impostor = impostor.size();
  for (double s : impostor)
    detail::tally_impostor(c.genuine_sorted, s, c.below_hist,
                           c.at_or_below_hist);
  return c;
}

inline ScoreCounts make_score_counts(const ScoreSet& scores) {
  return make_score_counts(scores.genuine, scores.impostor);
}

/// Empirical ROC staircase. Candidate thresholds are the distinct genuine
/// values plus a -inf sentinel; each genuine value contributes the left
/// limit of the step as well (threshold nudged one ulp down), which keeps
/// every achievable operating point between genuine values on the curve.
inline std::vector<ErrorRatePoint> roc_curve(const ScoreCounts& c) {
  const std::size_t m = c.genuine_sorted.size();
  const double nm = static_cast<double>(m);
  const double ni = static_cast<double>(c.n_impostor);

  // suffix[k] = #impostors whose tally index is >= k
  std::vector<std::uint64_t> suffix_below(m + 2, 0), suffix_at(m + 2, 0);
  for (std::size_t k = m + 1; k-- > 0;) {
    suffix_below[k] = suffix_below[k + 1] + c.below_hist[k];
    suffix_at[k] = suffix_at[k + 1] + c.at_or_below_hist[k];
  }

  std::vector<ErrorRatePoint> points;
  points.reserve(2 * m + 1);
  points.push_back({-std::numeric_limits<double>::infinity(), 1.0, 0.0});
  std::size_t k = 0;
  while (k < m) {
    const double g = c.genuine_sorted[k];
    std::size_t k_end = k + 1;
    while (k_end < m && c.genuine_sorted[k_end] == g) ++k_end;
    // left limit: tau one ulp below g -> frr counts genuine < g,
    // far counts impostors >= g
    points.push_back(
        {std::nextafter(g, -std::numeric_limits<double>::infinity()),
         static_cast<double>(suffix_at[k_end]) / ni,
         static_cast<double>(k) / nm});
    // at g: frr counts genuine <= g, far counts impostors > g
    points.push_back({g, static_cast<double>(suffix_below[k_end]) / ni,
                      static_cast<double>(k_end) / nm});
    k = k_end;
  }
  return points;
}

/// EER by linear interpolation between the two adjacent ROC points
/// bracketing far = frr; an exact far = frr point is returned as is.
inline EerEstimate compute_eer(const ScoreCounts& c) {
  const auto points = roc_curve(c);
  const double resolution = 1.0 / static_cast<double>(c.genuine_sorted.size());
  ErrorRatePoint prev = points.front();
  for (const auto& p : points) {
    const double d = p.far - p.frr;
    if (d <= 0.0) {
      if (d == 0.0) return {p.far, p.threshold, resolution};
      const double d_prev = prev.far - prev.frr;
      const double lambda = d_prev / (d_prev - d);
      const double value = prev.frr + lambda * (p.frr - prev.frr);
      const double threshold = std::isinf(prev.threshold)
                                   ? p.threshold
                                   : prev.threshold +
                                         lambda * (p.threshold - prev.threshold);
      return {value, threshold, resolution};
    }
    prev = p;
  }
  // far > frr everywhere: all impostors above all genuine; worst case.
  return {1.0, points.back().threshold, resolution};
}

/// FRR at the smallest threshold whose FAR is <= far_level (the impostor
/// quantile). Requires at least 10/far_level impostor scores.
inline double frr_at_far(const ScoreCounts& c, double far_level) {
  if (!(far_level > 0.0) || !(far_level < 1.0))
    throw domain_error("frr_at_far: far_level must lie in (0, 1), got " +
                       std::to_string(far_level));
  const std::uint64_t required =
      static_cast<std::uint64_t>(std::ceil(10.0 / far_level));
  if (c.n_impostor < required)
    throw resolution_error(
        "frr_at_far: far_level " + std::to_string(far_level) + " needs at least " +
            std::to_string(required) + " impostor scores, have " +
            std::to_string(c.n_impostor),
        required, c.n_impostor);

  // Allowed impostors above threshold; the threshold is the (M-K)-th
  // smallest impostor score, whose at-or-below tally u gives frr = u / m.
  const std::uint64_t allowed = static_cast<std::uint64_t>(
      std::floor(far_level * static_cast<double>(c.n_impostor)));
  const std::uint64_t rank = c.n_impostor - allowed;  // >= 1 since level < 1
  std::uint64_t cum = 0;
  for (std::size_t u = 0; u < c.at_or_below_hist.size(); ++u) {
    cum += c.at_or_below_hist[u];
    if (cum >= rank)
      return static_cast<double>(u) /
             static_cast<double>(c.genuine_sorted.size());
  }
  return 1.0;  // unreachable for consistent counts
}

inline std::vector<ErrorRatePoint> roc_curve(const ScoreSet& scores) {
  return roc_curve(make_score_counts(scores));
}
inline EerEstimate compute_eer(const ScoreSet& scores) {
  return compute_eer(make_score_counts(scores));
}
inline double frr_at_far(const ScoreSet& scores, double far_level) {
  return frr_at_far(make_score_counts(scores), far_level);
}

}  // namespace persim

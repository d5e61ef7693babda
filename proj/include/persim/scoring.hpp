#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "persim/errors.hpp"
#include "persim/featuregen.hpp"
#include "persim/metrics.hpp"
#include "persim/rng.hpp"
#include "persim/scores.hpp"

namespace persim {

struct ZscoreParams {
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;
};

namespace detail {

inline void validate_subset(const FeatureDataset& ds,
                            const FeatureSubset& subset) {
  if (subset.indices.empty())
    throw domain_error("feature subset must be non-empty");
  std::vector<int> sorted = subset.indices;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw domain_error("feature subset contains duplicate indices");
  if (sorted.front() < 0 || sorted.back() >= ds.config.n_features)
    throw domain_error("feature subset index out of range");
}

}  // namespace detail

/// Per-feature gallery normalization statistics, from session 1 only
/// (enrollment-time data; sd uses the n-1 sample convention).
inline ZscoreParams zscore_params(const FeatureDataset& ds,
                                  const FeatureSubset& subset) {
  detail::validate_subset(ds, subset);
  const int k = static_cast<int>(subset.indices.size());
  const double n = static_cast<double>(ds.config.n_subjects);
  ZscoreParams p{Eigen::VectorXd(k), Eigen::VectorXd(k)};
  for (int j = 0; j < k; ++j) {
    const auto col = ds.session1.col(subset.indices[static_cast<std::size_t>(j)]);
    const double mean = col.mean();
    const double var = (col.array() - mean).square().sum() / (n - 1.0);
    if (var <= 0.0)
      throw degenerate_input_error(
          "zscore_params: feature " +
          std::to_string(subset.indices[static_cast<std::size_t>(j)]) +
          " has zero variance in session 1");
    p.mean[j] = mean;
    p.sd[j] = std::sqrt(var);
  }
  return p;
}

/// Cosine of the angle between two vectors; in [-1, 1].
inline double similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty())
    throw domain_error("similarity: vectors must have equal nonzero length");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na <= 0.0 || nb <= 0.0)
    throw degenerate_input_error("similarity: zero-norm vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

namespace detail {

/// Z-scored and row-normalized gallery (session 1) and probe (session 2)
/// matrices for one subset; genuine score i is then row_g(i) . row_p(i)
/// and impostor (i, j) is row_g(i) . row_p(j).
struct MatchMatrices {
  Eigen::MatrixXd gallery;
  Eigen::MatrixXd probe;
};

inline MatchMatrices match_matrices(const FeatureDataset& ds,
                                    const FeatureSubset& subset) {
  const ZscoreParams p = zscore_params(ds, subset);
  const int k = static_cast<int>(subset.indices.size());
  const int n = ds.config.n_subjects;
  MatchMatrices m{Eigen::MatrixXd(n, k), Eigen::MatrixXd(n, k)};
  for (int j = 0; j < k; ++j) {
    const int f = subset.indices[static_cast<std::size_t>(j)];
    m.gallery.col(j) = (ds.session1.col(f).array() - p.mean[j]) / p.sd[j];
    m.probe.col(j) = (ds.session2.col(f).array() - p.mean[j]) / p.sd[j];
  }
  for (int i = 0; i < n; ++i) {
    const double ng = m.gallery.row(i).norm();
    const double np = m.probe.row(i).norm();
    if (ng <= 0.0 || np <= 0.0)
      throw degenerate_input_error(
          "score_dataset: subject " + std::to_string(i) +
          " has a zero-norm feature vector after normalization");
    m.gallery.row(i) /= ng;
    m.probe.row(i) /= np;
  }
  return m;
}

/// Sampled-mode pair list: distinct ordered pairs (i, j), i != j, drawn
/// without replacement; a function of the policy seed only.
inline std::vector<std::pair<std::uint32_t, std::uint32_t>> sample_impostor_pairs(
    int n_subjects, const ImpostorPolicy& policy) {
  const std::uint64_t population =
      static_cast<std::uint64_t>(n_subjects) *
      static_cast<std::uint64_t>(n_subjects - 1);
  const std::uint64_t count = std::min(policy.sample_size, population);
  const rng::Stream stream(policy.seed,
                           rng::derive_stream(rng::Domain::impostor_pairs, {}));
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  pairs.reserve(count);
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(count * 2);
  std::uint64_t cursor = 0;
  while (pairs.size() < count) {
    const std::uint64_t code = stream.draw_below(population, cursor);
    if (!seen.insert(code).second) continue;
    const std::uint32_t i =
        static_cast<std::uint32_t>(code / static_cast<std::uint64_t>(n_subjects - 1));
    std::uint32_t j =
        static_cast<std::uint32_t>(code % static_cast<std::uint64_t>(n_subjects - 1));
    if (j >= i) ++j;  // skip the diagonal
    pairs.emplace_back(i, j);
  }
  return pairs;
}

}  // namespace detail

/// Materializes genuine and impostor scores. Intended for desk-scale work;
/// at full-cross paper scale prefer score_counts, which streams impostors.
inline ScoreSet score_dataset(const FeatureDataset& ds,
                              const FeatureSubset& subset,
                              const ImpostorPolicy& policy) {
  const auto m = detail::match_matrices(ds, subset);
  const int n = ds.config.n_subjects;
  ScoreSet out;
  out.genuine.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    out.genuine[static_cast<std::size_t>(i)] = m.gallery.row(i).dot(m.probe.row(i));

  if (policy.mode == ImpostorPolicy::Mode::full_cross) {
    out.impostor.reserve(static_cast<std::size_t>(n) * (n - 1));
    out.impostor_pairs.reserve(static_cast<std::size_t>(n) * (n - 1));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        out.impostor.push_back(m.gallery.row(i).dot(m.probe.row(j)));
        out.impostor_pairs.emplace_back(static_cast<std::uint32_t>(i),
                                        static_cast<std::uint32_t>(j));
      }
  } else {
    out.impostor_pairs = detail::sample_impostor_pairs(n, policy);
    out.impostor.reserve(out.impostor_pairs.size());
    for (const auto& [i, j] : out.impostor_pairs)
      out.impostor.push_back(m.gallery.row(i).dot(m.probe.row(j)));
  }
  return out;
}

/// Streaming evaluator: genuine scores plus the impostor tallies of
/// ScoreCounts, without materializing the impostor scores. Tiles over
/// probe subjects with a fixed tile size and merges integer histograms,
/// so results are identical for any worker count.
inline ScoreCounts score_counts(const FeatureDataset& ds,
                                const FeatureSubset& subset,
                                const ImpostorPolicy& policy) {
  const auto mm = detail::match_matrices(ds, subset);
  const int n = ds.config.n_subjects;
  const std::size_t m = static_cast<std::size_t>(n);

  ScoreCounts c;
  c.genuine_sorted.resize(m);
  for (int i = 0; i < n; ++i)
    c.genuine_sorted[static_cast<std::size_t>(i)] =
        mm.gallery.row(i).dot(mm.probe.row(i));
  std::sort(c.genuine_sorted.begin(), c.genuine_sorted.end());
  c.below_hist.assign(m + 1, 0);
  c.at_or_below_hist.assign(m + 1, 0);

  constexpr int kTile = 256;  // fixed: output must not depend on threads

  if (policy.mode == ImpostorPolicy::Mode::full_cross) {
    const int n_tiles = (n + kTile - 1) / kTile;
    c.n_impostor = static_cast<std::uint64_t>(n) *
                   static_cast<std::uint64_t>(n - 1);
#pragma omp parallel
    {
      std::vector<std::uint64_t> below(m + 1, 0), at(m + 1, 0);
      Eigen::MatrixXd block;
#pragma omp for schedule(dynamic)
      for (int t = 0; t < n_tiles; ++t) {
        const int j0 = t * kTile;
        const int cols = std::min(kTile, n - j0);
        block.noalias() =
            mm.gallery * mm.probe.middleRows(j0, cols).transpose();
        for (int jc = 0; jc < cols; ++jc) {
          const int j = j0 + jc;
          const double* col = block.col(jc).data();
          for (int i = 0; i < n; ++i) {
            if (i == j) continue;
            detail::tally_impostor(c.genuine_sorted, col[i], below, at);
          }
        }
      }
#pragma omp critical
      {
        for (std::size_t k = 0; k <= m; ++k) {
          c.below_hist[k] += below[k];
          c.at_or_below_hist[k] += at[k];
        }
      }
    }
  } else {
    const auto pairs = detail::sample_impostor_pairs(n, policy);
    c.n_impostor = pairs.size();
    const std::int64_t total = static_cast<std::int64_t>(pairs.size());
#pragma omp parallel
    {
      std::vector<std::uint64_t> below(m + 1, 0), at(m + 1, 0);
#pragma omp for schedule(static)
      for (std::int64_t p = 0; p < total; ++p) {
        const auto& [i, j] = pairs[static_cast<std::size_t>(p)];
        const double s = mm.gallery.row(i).dot(mm.probe.row(j));
        detail::tally_impostor(c.genuine_sorted, s, below, at);
      }
#pragma omp critical
      {
        for (std::size_t k = 0; k <= m; ++k) {
          c.below_hist[k] += below[k];
          c.at_or_below_hist[k] += at[k];
        }
      }
    }
  }
  return c;
}

/// Uniform random n-subset of [0, n_features), without replacement.
inline FeatureSubset sample_feature_subset(int n_features, int n,
                                           const rng::Stream& stream) {
  if (n < 1 || n > n_features)
    throw domain_error("sample_feature_subset: n out of range");
  std::vector<int> idx(static_cast<std::size_t>(n_features));
  std::iota(idx.begin(), idx.end(), 0);
  std::uint64_t cursor = 0;
  for (int i = 0; i < n; ++i) {
    const std::uint64_t j = stream.draw_below(
        static_cast<std::uint64_t>(n_features - i), cursor);
    std::swap(idx[static_cast<std::size_t>(i)],
              idx[static_cast<std::size_t>(i) + j]);
  }
  idx.resize(static_cast<std::size_t>(n));
  std::sort(idx.begin(), idx.end());
  return FeatureSubset{std::move(idx)};
}

/// Decorrelates columns: centers the matrix and applies the inverse of the
/// lower Cholesky factor of the sample covariance, so the output's sample
/// covariance is the identity.
inline Eigen::MatrixXd whiten(const Eigen::MatrixXd& features) {
  const auto n = features.rows();
  const auto k = features.cols();
  if (n < 2) throw domain_error("whiten: need at least 2 rows");

  Eigen::MatrixXd centered = features.rowwise() - features.colwise().mean();
  Eigen::MatrixXd cov =
      (centered.transpose() * centered) / static_cast<double>(n - 1);

  // lower Cholesky, with the failing pivot reported
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(k, k);
  const double tol = 1e-12 * cov.diagonal().maxCoeff();
  for (Eigen::Index j = 0; j < k; ++j) {
    double d = cov(j, j) - L.row(j).head(j).squaredNorm();
    if (d <= tol)
      throw degenerate_input_error(
          "whiten: covariance is rank deficient at column " +
          std::to_string(j) + " (pivot " + std::to_string(d) + ")");
    L(j, j) = std::sqrt(d);
    for (Eigen::Index i = j + 1; i < k; ++i) {
      L(i, j) =
          (cov(i, j) - L.row(i).head(j).dot(L.row(j).head(j))) / L(j, j);
    }
  }

  // L * out^T = centered^T, i.e. output = centered * L^-T
  Eigen::MatrixXd out =
      L.triangularView<Eigen::Lower>().solve(centered.transpose()).transpose();
  return out;
}

}  // namespace persim

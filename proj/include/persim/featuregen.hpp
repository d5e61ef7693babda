#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "persim/errors.hpp"
#include "persim/rng.hpp"

namespace persim {

/// Target intraclass correlation of a generated feature band.
struct IccTarget {
  explicit IccTarget(double v) : value(v) {
    if (!(v > 0.0) || v > 1.0)
      throw domain_error("IccTarget must lie in (0, 1], got " +
                         std::to_string(v));
  }
  double value;
};

/// Noise SD that turns unit-variance signal into features with the target
/// ICC: sqrt((1 - icc) / icc).
inline double noise_sd(IccTarget target) {
  return std::sqrt((1.0 - target.value) / target.value);
}

struct BandConfig {
  BandConfig(IccTarget target, int subjects, int features, std::uint64_t band_seed)
      : target_icc(target),
        n_subjects(subjects),
        n_features(features),
        seed(band_seed) {
    if (subjects < 2)
      throw domain_error("BandConfig needs at least 2 subjects, got " +
                         std::to_string(subjects));
    if (features < 1)
      throw domain_error("BandConfig needs at least 1 feature, got " +
                         std::to_string(features));
  }
  IccTarget target_icc;
  int n_subjects;
  int n_features;
  std::uint64_t seed;
};

/// Two-session feature array: (subjects x features) per session.
/// Column f of each session holds feature f for the whole population.
struct FeatureDataset {
  BandConfig config;
  Eigen::MatrixXd session1;
  Eigen::MatrixXd session2;
};

namespace detail {

// Index-addressed parallel fill; chunk size is fixed so the thread count
// never changes the output.
inline void fill_matrix_normals(Eigen::MatrixXd& m, const rng::Stream& stream) {
  const std::int64_t total = static_cast<std::int64_t>(m.size());
  constexpr std::int64_t kChunk = 1 << 16;
  const std::int64_t n_chunks = (total + kChunk - 1) / kChunk;
  double* data = m.data();
#pragma omp parallel for schedule(static)
  for (std::int64_t c = 0; c < n_chunks; ++c) {
    const std::int64_t lo = c * kChunk;
    const std::int64_t count = std::min(kChunk, total - lo);
    stream.fill_normals({data + lo, static_cast<std::size_t>(count)},
                        static_cast<std::uint64_t>(lo));
  }
}

}  // namespace detail

/// Generates one band: session-1 values are N(0,1) draws, session 2 starts
/// as a copy of session 1, then independent N(0, noise_sd) noise is added
/// to every cell of both sessions. Bitwise deterministic in (config).
inline FeatureDataset generate_band(const BandConfig& config) {
  const int n = config.n_subjects;
  const int f = config.n_features;
  const double sd = noise_sd(config.target_icc);

  FeatureDataset ds{config, Eigen::MatrixXd(n, f), Eigen::MatrixXd(n, f)};

  Eigen::MatrixXd signal(n, f);
  detail::fill_matrix_normals(
      signal, rng::Stream(config.seed,
                          rng::derive_stream(rng::Domain::band_signal, {})));

  detail::fill_matrix_normals(
      ds.session1,
      rng::Stream(config.seed,
                  rng::derive_stream(rng::Domain::band_noise_session1, {})));
  detail::fill_matrix_normals(
      ds.session2,
      rng::Stream(config.seed,
                  rng::derive_stream(rng::Domain::band_noise_session2, {})));

  ds.session1 = signal + sd * ds.session1;
  ds.session2 = signal + sd * ds.session2;
  return ds;
}

/// One dataset per target; band seeds derive from (master_seed, band index)
/// so the bands are independent streams.
inline std::vector<FeatureDataset> generate_bands(
    const std::vector<IccTarget>& targets, int n_subjects, int n_features,
    std::uint64_t master_seed) {
  if (targets.empty())
    throw domain_error("generate_bands: empty target list");
  std::vector<FeatureDataset> bands;
  bands.reserve(targets.size());
  for (std::size_t b = 0; b < targets.size(); ++b) {
    const std::uint64_t band_seed = rng::derive_stream(
        rng::Domain::band_seed, {master_seed, static_cast<std::uint64_t>(b)});
    bands.push_back(generate_band(
        BandConfig(targets[b], n_subjects, n_features, band_seed)));
  }
  return bands;
}

}  // namespace persim

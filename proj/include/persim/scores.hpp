#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "persim/errors.hpp"

namespace persim {

/// Distinct feature indices selecting a column subset of a dataset.
struct FeatureSubset {
  std::vector<int> indices;
};

struct ImpostorPolicy {
  enum class Mode { full_cross, sampled };

  static ImpostorPolicy full_cross() { return {Mode::full_cross, 0, 0}; }
  static ImpostorPolicy sampled(std::uint64_t size, std::uint64_t seed) {
    if (size == 0)
      throw domain_error("ImpostorPolicy: sample_size must be positive");
    return {Mode::sampled, size, seed};
  }

  std::uint64_t pair_count(int n_subjects) const {
    const std::uint64_t full = static_cast<std::uint64_t>(n_subjects) *
                               static_cast<std::uint64_t>(n_subjects - 1);
    return mode == Mode::full_cross ? full : std::min(sample_size, full);
  }

  Mode mode = Mode::full_cross;
  std::uint64_t sample_size = 0;
  std::uint64_t seed = 0;
};

/// Similarity scores for one feature subset; higher = more similar.
/// Genuine: subject i session 1 vs the same subject's session 2.
/// Impostor: subject i session 1 vs subject j session 2, i != j.
struct ScoreSet {
  std::vector<double> genuine;
  std::vector<double> impostor;
  /// (gallery subject, probe subject) per impostor score.
  std::vector<std::pair<std::uint32_t, std::uint32_t>> impostor_pairs;
};

}  // namespace persim

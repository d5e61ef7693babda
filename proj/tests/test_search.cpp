#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <omp.h>
#include <vector>

#include "oracles.hpp"
#include "persim/search.hpp"

using namespace persim;

namespace {

const ImpostorPolicy kFull = ImpostorPolicy::full_cross();

double oracle_metric(const FeatureDataset& ds, const FeatureSubset& subset,
                     const TargetSpec& target) {
  std::vector<std::vector<double>> s1, s2;
  for (int i = 0; i < ds.config.n_subjects; ++i) {
    std::vector<double> r1, r2;
    for (int f : subset.indices) {
      r1.push_back(ds.session1(i, f));
      r2.push_back(ds.session2(i, f));
    }
    s1.push_back(r1);
    s2.push_back(r2);
  }
  const auto scored = oracle::score_two_session(s1, s2);
  std::vector<double> imp;
  for (int i = 0; i < ds.config.n_subjects; ++i)
    for (int j = 0; j < ds.config.n_subjects; ++j)
      if (i != j)
        imp.push_back(scored.impostor[static_cast<std::size_t>(i)]
                                      [static_cast<std::size_t>(j)]);
  return target.kind == TargetSpec::Kind::eer
             ? oracle::eer(scored.genuine, imp)
             : oracle::frr_at_far(scored.genuine, imp, target.far_level);
}

}  // namespace

TEST_CASE("target spec validation") {
  CHECK_THROWS_AS(TargetSpec::eer(0.0), domain_error);
  CHECK_THROWS_AS(TargetSpec::eer(1.0), domain_error);
  CHECK_THROWS_AS(TargetSpec::frr_at_far(0.01, 0.0), domain_error);
  CHECK(TargetSpec::eer(0.05).threshold_value() == 0.05);
  CHECK(TargetSpec::frr_at_far(0.01, 0.001).threshold_value() == 0.01);
}

TEST_CASE("mean_metric with the full subset equals the single-run metric") {
  const auto ds = generate_band(BandConfig(IccTarget(0.5), 40, 6, 3));
  const auto target = TargetSpec::eer(0.05);
  const double m1 = mean_metric(ds, 6, 1, target, kFull, 11);
  const double m3 = mean_metric(ds, 6, 3, target, kFull, 11);
  CHECK(m1 == m3);  // every replication draws the identical full subset
}

TEST_CASE("perfect-persistence dataset has zero eer") {
  const auto ds = generate_band(BandConfig(IccTarget(1.0), 30, 8, 5));
  for (int n : {2, 3, 8})
    CHECK(mean_metric(ds, n, 2, TargetSpec::eer(0.05), kFull, 1) == 0.0);
  // single-feature cosine degenerates to +-1, so n = 1 is the one subset
  // size where identical sessions do not separate perfectly
  CHECK(mean_metric(ds, 1, 2, TargetSpec::eer(0.05), kFull, 1) > 0.0);
}

TEST_CASE("mean_metric equals the hand-average of per-replication oracles") {
  const auto ds = generate_band(BandConfig(IccTarget(0.6), 25, 10, 77));
  const auto target = TargetSpec::eer(0.05);
  const int reps = 3, n = 4;
  const std::uint64_t seed = 99, ctx = 0;
  double sum = 0.0;
  for (int r = 0; r < reps; ++r) {
    const auto subset = sample_feature_subset(
        10, n, persim::detail::subset_stream(seed, ctx, 0, n, r));
    sum += oracle_metric(ds, subset, target);
  }
  const double expect = sum / reps;
  CHECK_THAT(mean_metric(ds, n, reps, target, kFull, seed),
             Catch::Matchers::WithinAbs(expect, 1e-9));
}

TEST_CASE("mean_metric argument validation") {
  const auto ds = generate_band(BandConfig(IccTarget(0.5), 20, 5, 1));
  CHECK_THROWS_AS(mean_metric(ds, 0, 1, TargetSpec::eer(0.05), kFull, 1),
                  domain_error);
  CHECK_THROWS_AS(mean_metric(ds, 6, 1, TargetSpec::eer(0.05), kFull, 1),
                  domain_error);
  CHECK_THROWS_AS(mean_metric(ds, 3, 0, TargetSpec::eer(0.05), kFull, 1),
                  domain_error);
}

TEST_CASE("search finds n_required = 1 when already below the target") {
  const auto ds = generate_band(BandConfig(IccTarget(1.0), 30, 6, 9));
  const std::vector<SearchStage> stages{{1, 6, 1}, {1, 6, 2}};
  const auto rf = find_required_features(ds, TargetSpec::eer(0.45), stages,
                                         kFull, 33);
  CHECK(rf.n_required == 1);
  CHECK(rf.mean_metric_at_n < 0.45);
  CHECK(std::isnan(rf.mean_metric_at_n_minus_1));
}

TEST_CASE("search satisfies the crossing invariant") {
  const auto ds = generate_band(BandConfig(IccTarget(0.45), 220, 60, 17));
  const std::vector<SearchStage> stages{{1, 60, 1}, {1, 60, 3}, {1, 60, 8}};
  for (double t : {0.10, 0.07, 0.05}) {
    const auto rf =
        find_required_features(ds, TargetSpec::eer(t), stages, kFull, 7);
    INFO("target " << t << " n_required " << rf.n_required);
    CHECK(rf.mean_metric_at_n < t);
    if (rf.n_required > 1) {
      CHECK(rf.mean_metric_at_n_minus_1 >= t);
    }
    REQUIRE(rf.trace.size() == 3);
    CHECK(rf.trace[0].replications == 1);
    CHECK(rf.trace[2].replications == 8);
    // the traced means include the answer
    const auto& final_stage = rf.trace.back();
    const int offset = rf.n_required - final_stage.range_lo;
    REQUIRE(offset >= 0);
    REQUIRE(offset < static_cast<int>(final_stage.means.size()));
    CHECK(final_stage.means[static_cast<std::size_t>(offset)] ==
          rf.mean_metric_at_n);
  }
}

TEST_CASE("search is deterministic and independent of worker count") {
  const auto ds = generate_band(BandConfig(IccTarget(0.55), 120, 40, 23));
  const std::vector<SearchStage> stages{{1, 40, 1}, {1, 40, 4}};
  const auto target = TargetSpec::eer(0.08);

  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const auto rf1 = find_required_features(ds, target, stages, kFull, 5);
  omp_set_num_threads(2);
  const auto rf2 = find_required_features(ds, target, stages, kFull, 5);
  omp_set_num_threads(saved);

  CHECK(rf1.n_required == rf2.n_required);
  CHECK(rf1.mean_metric_at_n == rf2.mean_metric_at_n);
  REQUIRE(rf1.trace.size() == rf2.trace.size());
  for (std::size_t s = 0; s < rf1.trace.size(); ++s) {
    CHECK(rf1.trace[s].range_lo == rf2.trace[s].range_lo);
    CHECK(rf1.trace[s].means == rf2.trace[s].means);
  }
}

TEST_CASE("unreachable targets raise with the best metric attached") {
  const auto ds = generate_band(BandConfig(IccTarget(0.35), 60, 4, 13));
  const std::vector<SearchStage> stages{{1, 4, 1}, {1, 4, 2}};
  try {
    find_required_features(ds, TargetSpec::eer(0.0001), stages, kFull, 3);
    FAIL("expected not_reachable_error");
  } catch (const not_reachable_error& e) {
    CHECK(e.best_metric > 0.0001);
    CHECK(e.best_n >= 1);
    CHECK(e.best_n <= 4);
  }
}

TEST_CASE("stage validation") {
  const auto ds = generate_band(BandConfig(IccTarget(0.5), 20, 5, 1));
  CHECK_THROWS_AS(
      find_required_features(ds, TargetSpec::eer(0.1), {}, kFull, 1),
      domain_error);
  // stage 1 must cover the whole range
  CHECK_THROWS_AS(find_required_features(ds, TargetSpec::eer(0.1),
                                         {{2, 5, 1}, {1, 5, 2}}, kFull, 1),
                  domain_error);
  // replications must increase
  CHECK_THROWS_AS(find_required_features(ds, TargetSpec::eer(0.1),
                                         {{1, 5, 2}, {1, 5, 2}}, kFull, 1),
                  domain_error);
}

TEST_CASE("mean eer decreases with the subset size (in expectation)") {
  const auto ds = generate_band(BandConfig(IccTarget(0.55), 300, 40, 29));
  const auto target = TargetSpec::eer(0.05);
  const double at10 = mean_metric(ds, 10, 20, target, kFull, 3);
  const double at20 = mean_metric(ds, 20, 20, target, kFull, 3);
  const double at30 = mean_metric(ds, 30, 20, target, kFull, 3);
  CHECK(at20 <= at10 + 0.002);
  CHECK(at30 <= at20 + 0.002);
}

TEST_CASE("required_features_table orders cells and respects the icc ordering") {
  const auto bands = generate_bands(
      {IccTarget(0.45), IccTarget(0.7), IccTarget(0.95)}, 200, 60, 41);
  const std::vector<TargetSpec> targets{TargetSpec::eer(0.10),
                                        TargetSpec::eer(0.05)};
  const std::vector<SearchStage> stages{{1, 60, 1}, {1, 60, 4}};
  const auto table = required_features_table(bands, targets, stages, kFull, 55);
  REQUIRE(table.cells.size() == 6);

  // row-major (band, target) order
  CHECK(table.cells[0].band_target.value == 0.45);
  CHECK(table.cells[0].target.threshold_value() == 0.10);
  CHECK(table.cells[1].target.threshold_value() == 0.05);
  CHECK(table.cells[2].band_target.value == 0.7);

  // higher persistence never needs more features, per target
  for (std::size_t t = 0; t < targets.size(); ++t) {
    std::vector<int> required;
    for (std::size_t b = 0; b < bands.size(); ++b) {
      const auto& cell = table.cells[b * targets.size() + t];
      REQUIRE(cell.result.has_value());
      required.push_back(cell.result->n_required);
      CHECK(cell.result->mean_metric_at_n < targets[t].threshold_value());
    }
    CHECK(required[0] > required[2]);
    CHECK(required[0] >= required[1]);
    CHECK(required[1] >= required[2]);
  }
}

TEST_CASE("table records unreachable cells without failing") {
  const auto bands = generate_bands({IccTarget(0.4)}, 50, 3, 61);
  const std::vector<TargetSpec> targets{TargetSpec::eer(0.45),
                                        TargetSpec::eer(0.0005)};
  const std::vector<SearchStage> stages{{1, 3, 1}, {1, 3, 2}};
  const auto table = required_features_table(bands, targets, stages, kFull, 9);
  REQUIRE(table.cells.size() == 2);
  CHECK(table.cells[0].result.has_value());
  CHECK_FALSE(table.cells[1].result.has_value());
  CHECK(!table.cells[1].failure.empty());
  CHECK(table.cells[1].best_n >= 1);
}

TEST_CASE("table search matches a standalone search given the shared stage 1") {
  const auto bands = generate_bands({IccTarget(0.6)}, 150, 30, 71);
  const std::vector<TargetSpec> targets{TargetSpec::eer(0.10)};
  const std::vector<SearchStage> stages{{1, 30, 1}, {1, 30, 3}};
  const std::uint64_t seed = 123;
  const auto table =
      required_features_table(bands, targets, stages, kFull, seed);

  const auto sweep = stage1_sweep(bands[0], targets, 1, kFull, seed, 0);
  StageTrace stage1{1, 1, 30, 1, sweep[0]};
  const auto standalone = find_required_features(
      bands[0], targets[0], stages, kFull, seed, cell_context(seed, 0, 0),
      stage1);
  REQUIRE(table.cells[0].result.has_value());
  CHECK(table.cells[0].result->n_required == standalone.n_required);
  CHECK(table.cells[0].result->mean_metric_at_n == standalone.mean_metric_at_n);
}

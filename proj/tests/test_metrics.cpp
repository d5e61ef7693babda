#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "persim/metrics.hpp"
#include "persim/rng.hpp"

using namespace persim;

namespace {

ScoreSet make_set(std::vector<double> genuine, std::vector<double> impostor) {
  ScoreSet s;
  s.genuine = std::move(genuine);
  s.impostor = std::move(impostor);
  return s;
}

ScoreSet random_fixture(const rng::Stream& s, std::uint64_t& idx,
                        double separation) {
  const int n_gen = 5 + static_cast<int>(s.word(idx++) % 60);
  const int n_imp = 10 + static_cast<int>(s.word(idx++) % 200);
  ScoreSet out;
  for (int i = 0; i < n_gen; ++i)
    out.genuine.push_back(separation + s.normal(idx++));
  for (int i = 0; i < n_imp; ++i) out.impostor.push_back(s.normal(idx++));
  return out;
}

}  // namespace

TEST_CASE("separated scores: zero error everywhere") {
  const auto s = make_set({2.0, 3.0}, {0.0, 1.0});
  CHECK(compute_eer(s).value == 0.0);
  // the curve reaches the perfect operating point
  bool has_perfect = false;
  for (const auto& p : roc_curve(s))
    if (p.far == 0.0 && p.frr == 0.0) has_perfect = true;
  CHECK(has_perfect);

  // a separated set large enough for the frr_at_far resolution guard
  std::vector<double> gen, imp;
  for (int i = 0; i < 40; ++i) {
    gen.push_back(2.0 + 0.01 * i);
    imp.push_back(0.0 + 0.01 * i);
  }
  for (double level : {0.5, 0.3})
    CHECK(frr_at_far(make_set(gen, imp), level) == 0.0);
}

TEST_CASE("identical distributions: far + frr = 1 at genuine thresholds") {
  const std::vector<double> values{0.1, 0.4, 0.4, 0.9, 1.3, 2.2};
  const auto s = make_set(values, values);
  for (const auto& p : roc_curve(s)) {
    if (std::isinf(p.threshold)) continue;
    // exact at the right-limit points (thresholds equal to genuine values)
    if (std::binary_search(values.begin(), values.end(), p.threshold))
      CHECK_THAT(p.far + p.frr, Catch::Matchers::WithinAbs(1.0, 1e-12));
  }
  CHECK_THAT(compute_eer(s).value, Catch::Matchers::WithinAbs(0.5, 0.2));
}

TEST_CASE("chance-level scores give eer near one half") {
  const rng::Stream s(77, 3);
  std::uint64_t idx = 0;
  std::vector<double> gen, imp;
  for (int i = 0; i < 4000; ++i) gen.push_back(s.normal(idx++));
  for (int i = 0; i < 4000; ++i) imp.push_back(s.normal(idx++));
  CHECK_THAT(compute_eer(make_set(gen, imp)).value,
             Catch::Matchers::WithinAbs(0.5, 0.03));
  CHECK_THAT(frr_at_far(make_set(gen, imp), 0.5),
             Catch::Matchers::WithinAbs(0.5, 0.03));
}

TEST_CASE("frozen interleaved fixture") {
  const auto s = make_set({1.0, 3.0, 5.0, 7.0}, {2.0, 4.0, 6.0, 8.0});
  // frozen from the exhaustive sweep oracle with the same interpolation
  CHECK_THAT(compute_eer(s).value, Catch::Matchers::WithinAbs(0.5, 1e-12));
  CHECK_THAT(compute_eer(s).value,
             Catch::Matchers::WithinAbs(oracle::eer(s.genuine, s.impostor), 1e-12));
}

TEST_CASE("roc points match direct counting on random fixtures") {
  const rng::Stream s(123, 9);
  std::uint64_t idx = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const auto fixture = random_fixture(s, idx, 1.0);
    for (const auto& p : roc_curve(fixture)) {
      if (std::isinf(p.threshold)) {
        CHECK(p.far == 1.0);
        CHECK(p.frr == 0.0);
        continue;
      }
      const auto r = oracle::rates_at(fixture.genuine, fixture.impostor,
                                      p.threshold);
      CHECK(p.far == r.far);
      CHECK(p.frr == r.frr);
    }
  }
}

TEST_CASE("eer and frr_at_far match the sweep oracles on random fixtures") {
  const rng::Stream s(321, 11);
  std::uint64_t idx = 0;
  for (int rep = 0; rep < 120; ++rep) {
    const auto fixture = random_fixture(s, idx, (rep % 4) * 0.8);
    const double resolution = 1.0 / static_cast<double>(fixture.genuine.size());
    CHECK_THAT(compute_eer(fixture).value,
               Catch::Matchers::WithinAbs(
                   oracle::eer(fixture.genuine, fixture.impostor), resolution));
    const double level = 0.05 + 0.2 * (rep % 3);
    if (static_cast<double>(fixture.impostor.size()) >= 10.0 / level)
      CHECK(frr_at_far(fixture, level) ==
            oracle::frr_at_far(fixture.genuine, fixture.impostor, level));
  }
}

TEST_CASE("roc monotonicity holds on every fixture") {
  const rng::Stream s(888, 13);
  std::uint64_t idx = 0;
  for (int rep = 0; rep < 60; ++rep) {
    const auto fixture = random_fixture(s, idx, 0.5);
    const auto points = roc_curve(fixture);
    for (std::size_t i = 1; i < points.size(); ++i) {
      CHECK(points[i].far <= points[i - 1].far);
      CHECK(points[i].frr >= points[i - 1].frr);
    }
  }
}

TEST_CASE("eer is invariant under strictly increasing score transforms") {
  const rng::Stream s(456, 17);
  std::uint64_t idx = 0;
  for (int rep = 0; rep < 40; ++rep) {
    auto fixture = random_fixture(s, idx, 1.2);
    const bool frr_resolvable = fixture.impostor.size() >= 40;
    const double before = compute_eer(fixture).value;
    const double frr_before =
        frr_resolvable ? frr_at_far(fixture, 0.25) : 0.0;
    for (double& v : fixture.genuine) v = v * v * v + v;
    for (double& v : fixture.impostor) v = v * v * v + v;
    CHECK(compute_eer(fixture).value == before);
    if (frr_resolvable) CHECK(frr_at_far(fixture, 0.25) == frr_before);
  }
}

TEST_CASE("frr_at_far is non-increasing in the level") {
  const rng::Stream s(99, 19);
  std::uint64_t idx = 0;
  const auto fixture = random_fixture(s, idx, 1.0);
  double prev = 1.0;
  for (double level : {0.05, 0.1, 0.2, 0.3, 0.5, 0.8}) {
    if (static_cast<double>(fixture.impostor.size()) < 10.0 / level) continue;
    const double frr = frr_at_far(fixture, level);
    CHECK(frr <= prev);
    prev = frr;
  }
}

TEST_CASE("eer bracketing: value lies between the crossing rates") {
  const rng::Stream s(1212, 23);
  std::uint64_t idx = 0;
  for (int rep = 0; rep < 40; ++rep) {
    const auto fixture = random_fixture(s, idx, 1.0);
    const auto est = compute_eer(fixture);
    const auto points = roc_curve(fixture);
    ErrorRatePoint prev = points.front();
    for (const auto& p : points) {
      if (p.far - p.frr <= 0.0) {
        const double lo = std::min({prev.frr, p.frr, p.far, prev.far});
        const double hi = std::max({prev.frr, p.frr, p.far, prev.far});
        CHECK(est.value >= lo);
        CHECK(est.value <= hi);
        break;
      }
      prev = p;
    }
    CHECK(est.genuine_resolution ==
          1.0 / static_cast<double>(fixture.genuine.size()));
  }
}

TEST_CASE("resolution guard names the required impostor count") {
  const auto s = make_set({1.0, 2.0}, {0.0, 0.5, 0.6});
  try {
    frr_at_far(s, 0.001);
    FAIL("expected resolution_error");
  } catch (const resolution_error& e) {
    CHECK(e.required_count == 10000);
    CHECK(e.available_count == 3);
  }
  CHECK_THROWS_AS(frr_at_far(s, 0.0), domain_error);
  CHECK_THROWS_AS(frr_at_far(s, 1.0), domain_error);
}

TEST_CASE("empty score sets are rejected") {
  CHECK_THROWS_AS(compute_eer(make_set({}, {1.0})), degenerate_input_error);
  CHECK_THROWS_AS(compute_eer(make_set({1.0}, {})), degenerate_input_error);
}

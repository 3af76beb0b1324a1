#include <doctest.h>

#include <cmath>
#include <numeric>

#include "connectome/error.hpp"
#include "connectome/parcellation.hpp"

using namespace connectome;

namespace {

// n^3 cube at 3 mm, centered on the midline.
MaskVolume cube_mask(int n) {
  GridMeta g;
  g.dims = {n, n, n};
  g.spacing = {3, 3, 3};
  g.origin = {-1.5 * (n - 1), 0, 0};
  return MaskVolume::filled(g, true);
}

// All-pairs center separation, written independently of the library checker.
double min_same_side_distance(const ParcellationResult& p) {
  double best = std::numeric_limits<double>::infinity();
  const auto& g = p.labels.meta;
  for (std::size_t a = 0; a < p.centers.size(); ++a)
    for (std::size_t b = a + 1; b < p.centers.size(); ++b) {
      if (p.hemisphere_of[a] != p.hemisphere_of[b]) continue;
      const auto ca = g.coords(p.centers[a]), cb = g.coords(p.centers[b]);
      double s = 0;
      for (int k = 0; k < 3; ++k) s += std::pow((ca[k] - cb[k]) * g.spacing[k], 2);
      best = std::min(best, std::sqrt(s));
    }
  return best;
}

}  // namespace

TEST_CASE("estimate_radius closed form") {
  const auto m = cube_mask(30);
  CHECK(estimate_radius(m, 1, 0.65) == doctest::Approx(std::cbrt(0.65 * 27000 * 27)));
  CHECK(estimate_radius(m, 1, 0.65) == doctest::Approx(78.0).epsilon(1e-3));
  CHECK(estimate_radius(m, 110, 0.65) == doctest::Approx(16.3).epsilon(2e-3));
  CHECK(estimate_radius(m, 110) == doctest::Approx(std::cbrt(kDefaultPacking * 27000 * 27 / 110)));
  CHECK(estimate_radius(m, 27000) <= 3.0);
  CHECK_THROWS_AS(estimate_radius(m, 27001), Error);
}

TEST_CASE("single left-hemisphere region") {
  GridMeta g;
  g.dims = {5, 4, 3};
  g.spacing = {3, 3, 3};
  g.origin = {-30, 0, 0};
  g.midline_x = 0;
  const auto m = MaskVolume::filled(g, true);
  SamplingConfig cfg;
  cfg.target_regions = 1;
  cfg.seed = 3;
  const auto p = sample_parcellation(m, cfg);
  CHECK(p.realized_regions() == 1);
  for (auto l : p.labels.data) CHECK(l == 1);
}

TEST_CASE("invariants over seeds and scales") {
  const auto m = cube_mask(16);
  for (int R : {4, 10, 30}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      SamplingConfig cfg;
      cfg.target_regions = R;
      cfg.seed = seed;
      const auto p = sample_parcellation(m, cfg);
      CAPTURE(R);
      CAPTURE(seed);
      CHECK(min_same_side_distance(p) >= p.radius_mm);
      const auto chk = check_parcellation(m, p);
      CHECK(chk.ok());
      p.labels.validate(true);
    }
  }
}

TEST_CASE("determinism") {
  const auto m = cube_mask(12);
  SamplingConfig cfg;
  cfg.target_regions = 12;
  cfg.seed = 99;
  const auto a = sample_parcellation(m, cfg);
  const auto b = sample_parcellation(m, cfg);
  CHECK(a.labels == b.labels);
  CHECK(a.centers == b.centers);
  cfg.seed = 100;
  CHECK_FALSE(sample_parcellation(m, cfg).labels == a.labels);
}

TEST_CASE("unmasked voxels stay zero and the midline is respected") {
  auto m = cube_mask(12);
  for (std::size_t v = 0; v < m.data.size(); v += 3) m.data[v] = 0;
  SamplingConfig cfg;
  cfg.target_regions = 8;
  cfg.seed = 4;
  const auto p = sample_parcellation(m, cfg);
  for (std::size_t v = 0; v < m.data.size(); ++v)
    if (!m.data[v]) CHECK(p.labels.data[v] == 0);
  CHECK(check_parcellation(m, p).hemisphere_purity);
}

TEST_CASE("infeasible requests") {
  const auto m = cube_mask(4);
  SamplingConfig cfg;
  cfg.target_regions = 65;
  CHECK_THROWS_AS(sample_parcellation(m, cfg), Error);
  cfg.target_regions = 1;  // both hemispheres are populated
  CHECK_THROWS_AS(sample_parcellation(m, cfg), Error);
  auto empty = MaskVolume::filled(m.meta, false);
  cfg.target_regions = 2;
  CHECK_THROWS_AS(sample_parcellation(empty, cfg), Error);
}

TEST_CASE("parcel_stats") {
  GridMeta g;
  g.dims = {10, 10, 10};
  g.spacing = {3, 3, 3};
  LabelVolume one{g, std::vector<std::int32_t>(1000, 1), 1};
  const auto s = parcel_stats(one);
  CHECK(s.total_cm3 == doctest::Approx(1000 * 0.027));
  CHECK(s.min_cm3 == doctest::Approx(s.total_cm3));
  CHECK(s.max_cm3 == doctest::Approx(s.total_cm3));
  CHECK(s.std_cm3 == doctest::Approx(0.0));

  // A label volume covering 43413 voxels at 3 mm has the reported CC200 total.
  GridMeta big;
  big.dims = {43413, 1, 1};
  big.spacing = {3, 3, 3};
  LabelVolume cc{big, std::vector<std::int32_t>(43413), 200};
  for (std::size_t i = 0; i < cc.data.size(); ++i) cc.data[i] = static_cast<std::int32_t>(1 + i % 200);
  CHECK(parcel_stats(cc).total_cm3 == doctest::Approx(1172.15).epsilon(1e-5));
}

TEST_CASE("parcels are roughly equal sized") {
  const auto m = cube_mask(20);
  double worst_cv = 0.0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    SamplingConfig cfg;
    cfg.target_regions = 40;
    cfg.seed = seed;
    const auto s = parcel_stats(sample_parcellation(m, cfg));
    worst_cv = std::max(worst_cv, s.std_cm3 / (s.total_cm3 / s.regions));
  }
  CHECK(worst_cv < 0.5);
}

TEST_CASE("packing constant calibration: one pass lands near the target") {
  // d0 with the default packing constant, no radius refinement, 50 seeds.
  const auto m = cube_mask(30);
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    SamplingConfig cfg;
    cfg.target_regions = 110;
    cfg.seed = seed;
    cfg.max_radius_iterations = 1;
    total += sample_parcellation(m, cfg).realized_regions();
  }
  const double mean = total / 50.0;
  MESSAGE("mean single-pass count at R=110: " << mean);
  CHECK(std::abs(mean - 110.0) <= 11.0);
}

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "connectome/ensemble.hpp"
#include "connectome/error.hpp"
#include "connectome/rng.hpp"

using namespace connectome;

namespace {

// Pair enumeration: fraction of (positive, negative) pairs ordered correctly, ties one half.
double pair_auc(const std::vector<double>& s, const std::vector<double>& y) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (!(y[i] > 0) || y[j] > 0) continue;
      den += 1;
      num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  return num / den;
}

}  // namespace

TEST_CASE("majority vote") {
  CHECK(fuse_classification({{0.9}, {0.7}, {0.2}}) == std::vector<int>{1});
  CHECK(fuse_classification({{0.8}, {0.4}}) == std::vector<int>{1});
  CHECK(fuse_classification({{0.6}, {0.1}}) == std::vector<int>{0});
  CHECK(fuse_classification({{0.7}, {0.3}}) == std::vector<int>{1});  // mean exactly 0.5
  CHECK(fuse_classification({{0.5}, {0.5}, {0.9}}) == std::vector<int>{0});  // 0.5 is not a positive vote

  const std::vector<double> m{0.1, 0.6, 0.51, 0.49};
  CHECK(fuse_classification({m, m, m, m}) == std::vector<int>{0, 1, 1, 0});
  CHECK(fuse_classification({m}) == std::vector<int>{0, 1, 1, 0});

  Rng rng(1);
  std::vector<std::vector<double>> members(5, std::vector<double>(30));
  for (auto& row : members)
    for (auto& v : row) v = rng.uniform();
  const auto base = fuse_classification(members);
  std::reverse(members.begin(), members.end());
  CHECK(fuse_classification(members) == base);

  CHECK_THROWS_AS(fuse_classification({{1.2}}), Error);
  CHECK_THROWS_AS(fuse_classification({}), Error);
  CHECK_THROWS_AS(fuse_classification({{0.1, 0.2}, {0.3}}), Error);
}

TEST_CASE("mean fusion") {
  CHECK(fuse_regression({{2.0}, {4.0}}) == std::vector<double>{3.0});
  CHECK(fuse_regression({{1.5, -2.0}}) == std::vector<double>{1.5, -2.0});

  Rng rng(2);
  std::vector<std::vector<double>> members(120, std::vector<double>(7));
  for (auto& row : members)
    for (auto& v : row) v = rng.normal() * 10;
  const auto f = fuse_regression(members);
  for (std::size_t s = 0; s < 7; ++s) {
    long double acc = 0;
    for (const auto& row : members) acc += row[s];
    CHECK(f[s] == doctest::Approx(static_cast<double>(acc / 120)).epsilon(1e-14));
  }
}

TEST_CASE("metrics") {
  const std::vector<double> y{1, 0, 1};
  CHECK(auc(std::vector<double>{0.9, 0.8, 0.3}, y) == 0.5);
  CHECK(pair_auc({0.9, 0.8, 0.3}, y) == 0.5);
  CHECK(auc(std::vector<double>{0.9, 0.1, 0.8}, y) == 1.0);
  CHECK(auc(std::vector<double>{0.5, 0.5, 0.5}, y) == 0.5);
  CHECK_THROWS_AS(auc(std::vector<double>{0.2, 0.3}, std::vector<double>{1, 1}), Error);
  CHECK_THROWS_AS(evaluate(std::vector<double>{0.2, 0.3}, std::vector<double>{0, 0}, Task::classification),
                  Error);

  // +-1 truth encoding behaves like 0/1.
  CHECK(auc(std::vector<double>{0.9, 0.8, 0.3}, std::vector<double>{1, -1, 1}) == 0.5);

  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(25), t(25);
    for (std::size_t i = 0; i < 25; ++i) {
      s[i] = std::round(rng.uniform() * 8) / 8;  // coarse grid forces ties
      t[i] = i < 2 ? static_cast<double>(i) : (rng.bernoulli(0.4) ? 1.0 : 0.0);
    }
    const double a = auc(s, t);
    CHECK(a == doctest::Approx(pair_auc(s, t)).epsilon(1e-14));
    std::vector<double> e(25);
    for (std::size_t i = 0; i < 25; ++i) e[i] = std::exp(3 * s[i]) - 7;
    CHECK(auc(e, t) == doctest::Approx(a).epsilon(1e-14));
  }

  const std::vector<double> truth{1.0, 2.0, 4.0};
  const auto exact = evaluate(truth, truth, Task::regression);
  CHECK(exact.rmse == 0.0);
  CHECK(exact.mae == 0.0);
  CHECK(rmse(std::vector<double>{1, 2, 6}, truth) == doctest::Approx(std::sqrt(4.0 / 3)));
  CHECK(mae(std::vector<double>{0, 2, 6}, truth) == doctest::Approx(1.0));

  const auto perfect =
      evaluate(std::vector<double>{0.9, 0.2, 0.7, 0.1}, std::vector<double>{1, 0, 1, 0}, Task::classification);
  CHECK(perfect.accuracy == 1.0);
  CHECK(*perfect.auc == 1.0);
  CHECK(perfect.roc.front().fpr == 0.0);
  CHECK(perfect.roc.back().fpr == 1.0);
  CHECK(perfect.roc.back().tpr == 1.0);
  CHECK(perfect.roc[2].tpr == 1.0);
  CHECK(perfect.roc[2].fpr == 0.0);
}

TEST_CASE("k-fold partition") {
  Rng rng(4);
  std::vector<double> y(53);
  for (auto& v : y) v = rng.bernoulli(0.3) ? 1.0 : 0.0;
  const auto folds = kfold_partition(y, Task::classification, 10, 7);
  REQUIRE(folds.size() == 10);
  std::set<std::size_t> seen;
  std::size_t lo = 1000, hi = 0;
  for (const auto& f : folds) {
    lo = std::min(lo, f.size());
    hi = std::max(hi, f.size());
    for (auto i : f) CHECK(seen.insert(i).second);
  }
  CHECK(seen.size() == 53);
  CHECK(hi - lo <= 1);
  CHECK(kfold_partition(y, Task::classification, 10, 7) == folds);
  CHECK(kfold_partition(y, Task::classification, 10, 8) != folds);

  // Stratification: positives per fold differ by at most one.
  std::size_t plo = 1000, phi = 0;
  for (const auto& f : folds) {
    std::size_t p = 0;
    for (auto i : f) p += y[i] > 0;
    plo = std::min(plo, p);
    phi = std::max(phi, p);
  }
  CHECK(phi - plo <= 1);

  CHECK_THROWS_AS(kfold_partition(y, Task::classification, 54, 0), Error);
  CHECK_THROWS_AS(kfold_partition(y, Task::classification, 1, 0), Error);
}

TEST_CASE("k-fold cross-validation") {
  std::vector<double> y{1, 1, 1, 0, 0, 1, 1, 0, 1, 0, 1, 1};
  const auto constant = [](const std::vector<std::size_t>&, const std::vector<std::size_t>& te) {
    return std::vector<double>(te.size(), 0.9);
  };
  const auto cv = kfold_cv(y, Task::classification, 4, 3, constant);
  CHECK(cv.pooled.n == y.size());
  CHECK(cv.pooled.accuracy == doctest::Approx(8.0 / 12));
  CHECK(cv.folds.size() == 4);

  const auto loo = kfold_cv(y, Task::classification, static_cast<int>(y.size()), 3, constant);
  CHECK(loo.pooled.n == y.size());
  for (const auto& f : loo.folds) CHECK_FALSE(f.auc.has_value());

  std::vector<double> skew{1, 1, 1, 1, 1, 0};
  CHECK_THROWS_AS(kfold_cv(skew, Task::classification, 6, 0, constant), Error);
}

TEST_CASE("bootstrap") {
  Rng rng(5);
  std::vector<double> y(40), a(40), b(40);
  for (std::size_t i = 0; i < 40; ++i) {
    y[i] = i % 2;
    a[i] = std::clamp(y[i] * 0.6 + 0.2 + 0.3 * rng.normal(), 0.0, 1.0);
    b[i] = std::clamp(0.5 + 0.3 * rng.normal(), 0.0, 1.0);
  }
  const auto same = bootstrap_compare(a, a, y, Metric::auc, 200, 1);
  for (double d : same.differences) CHECK(d == 0.0);
  CHECK(same.fraction_a_worse == 0.0);

  const auto one = bootstrap_compare(a, b, y, Metric::accuracy, 1, 9);
  CHECK(bootstrap_compare(a, b, y, Metric::accuracy, 1, 9).differences == one.differences);

  const auto serial = bootstrap_compare(a, b, y, Metric::auc, 2000, 11);
  const auto threaded = bootstrap_compare(a, b, y, Metric::auc, 2000, 11, 4);
  CHECK(serial.differences == threaded.differences);
  double mean = 0;
  for (double d : serial.differences) mean += d;
  mean /= 2000;
  double var = 0;
  for (double d : serial.differences) var += (d - mean) * (d - mean);
  const double sd = std::sqrt(var / 1999);
  // Bootstrap mean sits near the full-sample difference (within a fraction of its spread).
  CHECK(std::abs(mean - serial.full_sample_difference) < 0.25 * sd + 0.01);

  // Tiny single-positive sets force redraws rather than failures.
  std::vector<double> yy{1, 0, 0, 0, 0}, pa{0.9, 0.1, 0.2, 0.3, 0.4};
  const auto redrawn = bootstrap_compare(pa, pa, yy, Metric::auc, 50, 2);
  CHECK(redrawn.redraws > 0);

  const auto err = bootstrap_compare(std::vector<double>{1, 2}, std::vector<double>{1, 3},
                                     std::vector<double>{1, 2}, Metric::rmse, 100, 3);
  for (double d : err.differences) CHECK(d <= 0.0);
}

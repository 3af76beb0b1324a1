#include "connectome/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "connectome/error.hpp"
#include "connectome/rng.hpp"
#include "parallel.hpp"

namespace connectome {

namespace {

bool positive(double label) { return label > 0.0; }

void check_aligned(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), Errc::shape,
          "prediction/truth length mismatch: " + std::to_string(a.size()) + " vs " +
              std::to_string(b.size()));
  require(!a.empty(), Errc::invalid_argument, "no subjects to evaluate");
}

void check_members(const std::vector<std::vector<double>>& m) {
  require(!m.empty(), Errc::invalid_argument, "ensemble needs at least one member");
  for (const auto& row : m)
    require(row.size() == m.front().size(), Errc::shape, "ensemble members disagree on subject count");
}

bool has_both_classes(std::span<const double> truth) {
  bool pos = false, neg = false;
  for (double t : truth) (positive(t) ? pos : neg) = true;
  return pos && neg;
}

EvalReport evaluate_impl(std::span<const double> pred, std::span<const double> truth, Task task,
                         bool require_auc) {
  check_aligned(pred, truth);
  EvalReport r;
  r.task = task;
  r.n = pred.size();
  if (task == Task::regression) {
    r.rmse = rmse(pred, truth);
    r.mae = mae(pred, truth);
    return r;
  }
  r.accuracy = accuracy(pred, truth);
  if (require_auc || has_both_classes(truth)) {
    r.auc = auc(pred, truth);
    r.roc = roc_curve(pred, truth);
  }
  return r;
}

}  // namespace

std::vector<int> fuse_classification(const std::vector<std::vector<double>>& member_probs) {
  check_members(member_probs);
  const std::size_t n = member_probs.front().size();
  const auto members = member_probs.size();
  std::vector<int> out(n);
  for (std::size_t s = 0; s < n; ++s) {
    std::size_t votes = 0;
    double sum = 0.0;
    for (const auto& m : member_probs) {
      const double p = m[s];
      require(p >= 0.0 && p <= 1.0, Errc::invalid_argument,
              "member probability outside [0, 1]: " + std::to_string(p));
      votes += p > 0.5;
      sum += p;
    }
    if (2 * votes != members)
      out[s] = 2 * votes > members;
    else
      out[s] = sum / static_cast<double>(members) >= 0.5;
  }
  return out;
}

std::vector<double> mean_probability(const std::vector<std::vector<double>>& member_probs) {
  return fuse_regression(member_probs);
}

std::vector<double> fuse_regression(const std::vector<std::vector<double>>& member_preds) {
  check_members(member_preds);
  std::vector<double> out(member_preds.front().size(), 0.0);
  for (const auto& m : member_preds)
    for (std::size_t s = 0; s < out.size(); ++s) out[s] += m[s];
  for (auto& v : out) v /= static_cast<double>(member_preds.size());
  return out;
}

double accuracy(std::span<const double> probs, std::span<const double> truth) {
  check_aligned(probs, truth);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) hit += (probs[i] > 0.5) == positive(truth[i]);
  return static_cast<double>(hit) / static_cast<double>(probs.size());
}

double auc(std::span<const double> scores, std::span<const double> truth) {
  check_aligned(scores, truth);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  std::size_t npos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks i+1..j
    for (std::size_t k = i; k < j; ++k)
      if (positive(truth[order[k]])) {
        pos_rank_sum += mid_rank;
        ++npos;
      }
    i = j;
  }
  const std::size_t nneg = n - npos;
  require(npos > 0 && nneg > 0, Errc::invalid_argument, "AUC is undefined with a single class");
  const double P = static_cast<double>(npos), N = static_cast<double>(nneg);
  return (pos_rank_sum - P * (P + 1.0) / 2.0) / (P * N);
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const double> truth) {
  check_aligned(scores, truth);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  std::size_t P = 0;
  for (double t : truth) P += positive(t);
  const std::size_t N = n - P;
  require(P > 0 && N > 0, Errc::invalid_argument, "ROC is undefined with a single class");
  std::vector<RocPoint> roc{{0.0, 0.0}};
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    for (; j < n && scores[order[j]] == scores[order[i]]; ++j) (positive(truth[order[j]]) ? tp : fp)++;
    roc.push_back({static_cast<double>(fp) / N, static_cast<double>(tp) / P});
    i = j;
  }
  return roc;
}

double rmse(std::span<const double> pred, std::span<const double> truth) {
  check_aligned(pred, truth);
  double ss = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) ss += (pred[i] - truth[i]) * (pred[i] - truth[i]);
  return std::sqrt(ss / static_cast<double>(pred.size()));
}

double mae(std::span<const double> pred, std::span<const double> truth) {
  check_aligned(pred, truth);
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - truth[i]);
  return s / static_cast<double>(pred.size());
}

EvalReport evaluate(std::span<const double> predictions, std::span<const double> truth, Task task) {
  return evaluate_impl(predictions, truth, task, true);
}

std::vector<std::vector<std::size_t>> kfold_partition(std::span<const double> truth, Task task, int k,
                                                      std::uint64_t seed) {
  const std::size_t n = truth.size();
  require(k >= 2 && static_cast<std::size_t>(k) <= n, Errc::invalid_argument,
          "k-fold needs 2 <= k <= n (k=" + std::to_string(k) + ", n=" + std::to_string(n) + ")");
  Rng rng(derive_seed(seed, 0x6b666f6c64ULL));
  std::vector<std::size_t> deal;
  if (task == Task::classification) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < n; ++i) (positive(truth[i]) ? pos : neg).push_back(i);
    rng.shuffle(pos.begin(), pos.end());
    rng.shuffle(neg.begin(), neg.end());
    deal = pos;
    deal.insert(deal.end(), neg.begin(), neg.end());
  } else {
    deal.resize(n);
    std::iota(deal.begin(), deal.end(), 0);
    rng.shuffle(deal.begin(), deal.end());
  }
  std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < n; ++i) folds[i % k].push_back(deal[i]);
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

CvResult kfold_cv(std::span<const double> truth, Task task, int k, std::uint64_t seed,
                  const FitPredict& fit_predict) {
  const auto folds = kfold_partition(truth, task, k, seed);
  CvResult out;
  out.predictions.assign(truth.size(), 0.0);
  std::vector<char> in_fold(truth.size());
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::fill(in_fold.begin(), in_fold.end(), 0);
    for (auto i : folds[f]) in_fold[i] = 1;
    std::vector<std::size_t> train;
    std::vector<double> train_truth;
    for (std::size_t i = 0; i < truth.size(); ++i)
      if (!in_fold[i]) {
        train.push_back(i);
        train_truth.push_back(truth[i]);
      }
    if (task == Task::classification)
      require(has_both_classes(train_truth), Errc::invalid_argument,
              "training split of fold " + std::to_string(f) + " holds a single class");
    const auto pred = fit_predict(train, folds[f]);
    require(pred.size() == folds[f].size(), Errc::shape, "fold predictions do not match fold size");
    std::vector<double> fold_truth;
    for (std::size_t j = 0; j < pred.size(); ++j) {
      out.predictions[folds[f][j]] = pred[j];
      fold_truth.push_back(truth[folds[f][j]]);
    }
    out.folds.push_back(evaluate_impl(pred, fold_truth, task, false));
  }
  out.pooled = evaluate_impl(out.predictions, truth, task, false);
  return out;
}

const char* to_string(Metric m) {
  switch (m) {
    case Metric::accuracy: return "accuracy";
    case Metric::auc: return "auc";
    case Metric::rmse: return "rmse";
    case Metric::mae: return "mae";
  }
  return "?";
}

Metric metric_from_string(const std::string& s) {
  if (s == "accuracy") return Metric::accuracy;
  if (s == "auc") return Metric::auc;
  if (s == "rmse") return Metric::rmse;
  if (s == "mae") return Metric::mae;
  fail(Errc::invalid_argument, "unknown metric '" + s + "'");
}

bool higher_is_better(Metric m) { return m == Metric::accuracy || m == Metric::auc; }

double metric_value(Metric m, std::span<const double> pred, std::span<const double> truth) {
  switch (m) {
    case Metric::accuracy: return accuracy(pred, truth);
    case Metric::auc: return auc(pred, truth);
    case Metric::rmse: return rmse(pred, truth);
    case Metric::mae: return mae(pred, truth);
  }
  fail(Errc::internal, "unhandled metric");
}

BootstrapResult bootstrap_compare(std::span<const double> pred_a, std::span<const double> pred_b,
                                  std::span<const double> truth, Metric metric, int replicates,
                                  std::uint64_t seed, int jobs) {
  check_aligned(pred_a, truth);
  check_aligned(pred_b, truth);
  require(replicates >= 1, Errc::invalid_argument, "bootstrap needs at least one replicate");
  if (metric == Metric::auc)
    require(has_both_classes(truth), Errc::invalid_argument, "AUC bootstrap needs both classes");

  BootstrapResult out;
  out.metric = metric;
  out.full_sample_difference = metric_value(metric, pred_a, truth) - metric_value(metric, pred_b, truth);
  out.differences.assign(static_cast<std::size_t>(replicates), 0.0);
  std::vector<std::size_t> redraws(static_cast<std::size_t>(replicates), 0);

  const std::size_t n = truth.size();
  auto run = [&](std::size_t begin, std::size_t end) {
    std::vector<double> a(n), b(n), t(n);
    for (std::size_t r = begin; r < end; ++r) {
      Rng rng(derive_seed(seed, r));
      for (;;) {
        for (std::size_t i = 0; i < n; ++i) {
          const auto j = rng.below(n);
          a[i] = pred_a[j];
          b[i] = pred_b[j];
          t[i] = truth[j];
        }
        if (metric != Metric::auc || has_both_classes(t)) break;
        ++redraws[r];
      }
      out.differences[r] = metric_value(metric, a, t) - metric_value(metric, b, t);
    }
  };

  const auto total = static_cast<std::size_t>(replicates);
  detail::parallel_ranges(total, jobs, run);

  std::size_t worse = 0;
  for (double d : out.differences) worse += higher_is_better(metric) ? d < 0.0 : d > 0.0;
  out.fraction_a_worse = static_cast<double>(worse) / static_cast<double>(total);
  out.redraws = std::accumulate(redraws.begin(), redraws.end(), std::size_t{0});
  return out;
}

}  // namespace connectome

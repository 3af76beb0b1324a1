#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "connectome/volume_io.hpp"

namespace connectome {

// Class truth may be {0, 1} or {-1, +1}: anything > 0 is the positive class.
// Classification predictions are probabilities of the positive class.

/// Per-subject majority vote of member classes (probability > 0.5). An exact
/// vote tie falls back to the mean probability, with 0.5 itself positive.
/// Input is indexed [member][subject]; output is 0/1 per subject.
std::vector<int> fuse_classification(const std::vector<std::vector<double>>& member_probs);

/// Mean probability per subject; the companion score for fused class votes.
std::vector<double> mean_probability(const std::vector<std::vector<double>>& member_probs);

std::vector<double> fuse_regression(const std::vector<std::vector<double>>& member_preds);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

double accuracy(std::span<const double> probs, std::span<const double> truth);
/// Rank-statistic AUC: P(score of a random positive > random negative), ties
/// counting one half. Throws when only one class is present.
double auc(std::span<const double> scores, std::span<const double> truth);
/// ROC corners from (0, 0) to (1, 1), one step per distinct score.
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const double> truth);
double rmse(std::span<const double> pred, std::span<const double> truth);
double mae(std::span<const double> pred, std::span<const double> truth);

struct EvalReport {
  Task task = Task::classification;
  std::size_t n = 0;
  double accuracy = 0.0;
  std::optional<double> auc;
  std::vector<RocPoint> roc;
  double rmse = 0.0;
  double mae = 0.0;
};

/// Throws when a classification truth holds a single class.
EvalReport evaluate(std::span<const double> predictions, std::span<const double> truth, Task task);

/// Seeded k-fold partition of indices 0..n-1. Classification folds are
/// stratified (each class dealt round-robin after a shuffle); fold sizes
/// differ by at most one.
std::vector<std::vector<std::size_t>> kfold_partition(std::span<const double> truth, Task task, int k,
                                                      std::uint64_t seed);

struct CvResult {
  std::vector<EvalReport> folds;  // auc absent on single-class folds
  EvalReport pooled;
  std::vector<double> predictions;  // held-out prediction per subject
};

/// Returns held-out predictions for `test`, trained on `train`.
using FitPredict = std::function<std::vector<double>(const std::vector<std::size_t>& train,
                                                     const std::vector<std::size_t>& test)>;

CvResult kfold_cv(std::span<const double> truth, Task task, int k, std::uint64_t seed,
                  const FitPredict& fit_predict);

enum class Metric { accuracy, auc, rmse, mae };

const char* to_string(Metric m);
Metric metric_from_string(const std::string& s);
bool higher_is_better(Metric m);
double metric_value(Metric m, std::span<const double> pred, std::span<const double> truth);

struct BootstrapResult {
  Metric metric = Metric::accuracy;
  double full_sample_difference = 0.0;
  std::vector<double> differences;  // metric(A) - metric(B) per replicate
  double fraction_a_worse = 0.0;
  std::size_t redraws = 0;  // single-class AUC resamples that were redrawn
};

/// Paired bootstrap over subjects. Replicate b draws from its own stream
/// derive_seed(seed, b), so results do not depend on evaluation order.
BootstrapResult bootstrap_compare(std::span<const double> pred_a, std::span<const double> pred_b,
                                  std::span<const double> truth, Metric metric, int replicates = 10000,
                                  std::uint64_t seed = 0, int jobs = 1);

}  // namespace connectome

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "connectome/ensemble.hpp"
#include "connectome/error.hpp"
#include "connectome/models.hpp"

namespace connectome {

namespace {

using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::vector<double> encode_pm1(std::span<const double> y) {
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] > 0.0 ? 1.0 : -1.0;
  return out;
}

FeatureMatrix take_rows(const FeatureMatrix& X, const std::vector<std::size_t>& rows) {
  FeatureMatrix out{rows.size(), X.cols, {}};
  out.data.reserve(rows.size() * X.cols);
  for (auto r : rows) out.data.insert(out.data.end(), X.row(r).begin(), X.row(r).end());
  return out;
}

}  // namespace

FeatureMatrix FeatureMatrix::from(const Dataset& d) {
  require(d.sample_shape.size() == 1, Errc::shape,
          "ridge needs flat feature vectors, got " + nn::shape_string(d.sample_shape));
  return {d.size(), d.sample_size(), std::vector<double>(d.x.begin(), d.x.end())};
}

double RidgeModel::score(std::span<const double> x) const {
  require(x.size() == weights.size(), Errc::shape,
          "ridge feature length " + std::to_string(x.size()) + " differs from " +
              std::to_string(weights.size()));
  double s = intercept;
  for (std::size_t i = 0; i < x.size(); ++i) s += weights[i] * x[i];
  return s;
}

RidgeModel ridge_fit(const FeatureMatrix& X, std::span<const double> y, double alpha, bool center) {
  require(X.rows >= 1 && X.cols >= 1, Errc::invalid_argument, "ridge needs a non-empty design matrix");
  require(X.data.size() == X.rows * X.cols, Errc::shape, "feature matrix storage does not match shape");
  require(y.size() == X.rows, Errc::shape, "ridge target length differs from row count");
  require(std::isfinite(alpha) && alpha >= 0.0, Errc::invalid_argument, "ridge alpha must be >= 0");
  for (double v : X.data) require(std::isfinite(v), Errc::numeric, "non-finite ridge feature");
  for (double v : y) require(std::isfinite(v), Errc::numeric, "non-finite ridge target");

  const auto n = static_cast<Eigen::Index>(X.rows), p = static_cast<Eigen::Index>(X.cols);
  MatrixRM A = Eigen::Map<const MatrixRM>(X.data.data(), n, p);
  Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
  Eigen::RowVectorXd xm = Eigen::RowVectorXd::Zero(p);
  double ym = 0.0;
  if (center) {
    xm = A.colwise().mean();
    ym = b.mean();
    A.rowwise() -= xm;
    b.array() -= ym;
  }

  Eigen::VectorXd w;
  if (alpha == 0.0) {
    w = A.completeOrthogonalDecomposition().solve(b);
  } else if (p <= n) {
    Eigen::MatrixXd G = A.transpose() * A;
    G.diagonal().array() += alpha;
    w = G.ldlt().solve(A.transpose() * b);
  } else {
    // X^T (X X^T + alpha I)^-1 y, the same minimizer through the n x n system.
    Eigen::MatrixXd K = A * A.transpose();
    K.diagonal().array() += alpha;
    w = A.transpose() * K.ldlt().solve(b);
  }
  require(w.allFinite(), Errc::numeric, "ridge solve produced non-finite weights");

  RidgeModel m;
  m.weights.assign(w.data(), w.data() + p);
  m.alpha = alpha;
  m.intercept = center ? ym - xm.dot(w) : 0.0;
  return m;
}

std::vector<double> ridge_alpha_grid(int count, double lo, double hi) {
  require(count >= 1, Errc::invalid_argument, "alpha grid needs at least one value");
  if (count == 1) return {lo};
  std::vector<double> g(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) g[i] = lo + (hi - lo) * i / (count - 1);
  g.back() = hi;
  return g;
}

RidgeModel train_ridge(const FeatureMatrix& X, std::span<const double> y, Task task, double alpha) {
  RidgeModel m = task == Task::classification ? ridge_fit(X, encode_pm1(y), alpha)
                                              : ridge_fit(X, y, alpha);
  m.task = task;
  return m;
}

AlphaSearch ridge_alpha_search(const FeatureMatrix& X, std::span<const double> y, Task task,
                               std::span<const double> grid, int folds, std::uint64_t seed) {
  require(!grid.empty(), Errc::invalid_argument, "empty alpha grid");
  AlphaSearch out;
  out.grid.assign(grid.begin(), grid.end());
  std::sort(out.grid.begin(), out.grid.end());
  const std::vector<double> truth(y.begin(), y.end());

  for (double alpha : out.grid) {
    auto fit_predict = [&](const std::vector<std::size_t>& tr, const std::vector<std::size_t>& te) {
      std::vector<double> ytr;
      for (auto i : tr) ytr.push_back(truth[i]);
      const auto m = train_ridge(take_rows(X, tr), ytr, task, alpha);
      std::vector<double> pred;
      for (auto i : te) {
        const double s = m.score(X.row(i));
        pred.push_back(task == Task::classification ? (s > 0.0 ? 1.0 : 0.0) : s);
      }
      return pred;
    };
    const auto cv = kfold_cv(truth, task, folds, seed, fit_predict);
    const double score = task == Task::classification ? cv.pooled.accuracy : cv.pooled.rmse;
    out.scores.push_back(score);
  }
  // Ascending scan with strict improvement keeps the smaller alpha on ties.
  std::size_t best = 0;
  for (std::size_t i = 1; i < out.scores.size(); ++i) {
    const bool improves = task == Task::classification ? out.scores[i] > out.scores[best]
                                                       : out.scores[i] < out.scores[best];
    if (improves) best = i;
  }
  out.alpha = out.grid[best];
  return out;
}

std::vector<double> predict(const RidgeModel& model, const Dataset& data) {
  const auto X = FeatureMatrix::from(data);
  std::vector<double> out(X.rows);
  for (std::size_t i = 0; i < X.rows; ++i) {
    const double s = model.score(X.row(i));
    out[i] = model.task == Task::classification ? 1.0 / (1.0 + std::exp(-s)) : s;
  }
  return out;
}

}  // namespace connectome

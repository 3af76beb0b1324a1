#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "connectome/nn/network.hpp"
#include "connectome/nn/optimizer.hpp"
#include "connectome/volume_io.hpp"

namespace connectome {

enum class Family { ridge, fcn, cnn3d, brainnet };
enum class FeatureKind { fingerprint, matrix, vector };

const char* to_string(Family f);
const char* to_string(FeatureKind k);
Family family_from_string(const std::string& s);
FeatureKind feature_kind_from_string(const std::string& s);
/// Feature representation each family consumes.
FeatureKind required_features(Family f);

/// Samples stacked along a leading axis, float storage.
struct Dataset {
  nn::Shape sample_shape;
  std::vector<float> x;
  std::vector<double> y;  // class (> 0 is positive) or age
  std::vector<std::string> ids;

  std::size_t size() const { return y.size(); }
  std::size_t sample_size() const { return nn::shape_size(sample_shape); }
  std::span<const float> sample(std::size_t i) const {
    return {x.data() + i * sample_size(), sample_size()};
  }
  Dataset subset(std::span<const std::size_t> rows) const;
  void validate() const;
};

// Ridge ----------------------------------------------------------------------

/// Dense row-major feature matrix in double precision.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  static FeatureMatrix from(const Dataset& d);
};

struct RidgeModel {
  std::vector<double> weights;
  double intercept = 0.0;
  double alpha = 1.0;
  Task task = Task::regression;
  std::string parcellation_id;

  double score(std::span<const double> x) const;
};

/// Minimizer of ||Xw - y||^2 + alpha ||w||^2. With `center`, X and y are
/// centered first and the intercept restores the means. Solved through the
/// smaller of the primal (p x p) and dual (n x n) symmetric systems.
RidgeModel ridge_fit(const FeatureMatrix& X, std::span<const double> y, double alpha, bool center = true);

/// `count` linearly spaced values on [lo, hi].
std::vector<double> ridge_alpha_grid(int count = 10, double lo = 0.1, double hi = 10.0);

struct AlphaSearch {
  double alpha = 0.0;
  std::vector<double> grid;
  std::vector<double> scores;  // CV accuracy (classification) or RMSE (regression)
};

/// Cross-validated alpha choice over an ascending grid; ties keep the smaller
/// alpha. Classification targets are encoded as +-1 before fitting.
AlphaSearch ridge_alpha_search(const FeatureMatrix& X, std::span<const double> y, Task task,
                               std::span<const double> grid, int folds = 5, std::uint64_t seed = 0);

/// Fits with +-1 encoding for classification.
RidgeModel train_ridge(const FeatureMatrix& X, std::span<const double> y, Task task, double alpha);

// Networks -------------------------------------------------------------------

struct NetModel {
  Family family = Family::fcn;
  Task task = Task::classification;
  std::string parcellation_id;
  nn::Network<float> net;
  // Regression targets are standardized for training: y_net = (y - shift) / scale.
  double target_shift = 0.0;
  double target_scale = 1.0;
};

std::vector<nn::LayerSpec> fcn_specs(Task task);
std::vector<nn::LayerSpec> cnn3d_specs(Task task);
std::vector<nn::LayerSpec> brainnet_specs(Task task);

NetModel build_fcn(int regions, Task task, std::uint64_t seed);
/// `input` is (R, nz, ny, nx); every spatial extent must survive three 2x pools.
NetModel build_cnn3d(const nn::Shape& input, Task task, std::uint64_t seed);
NetModel build_brainnet(int regions, Task task, std::uint64_t seed);
/// JSON array of layer objects, e.g. [{"kind": "dense", "units": 20}, ...].
std::string specs_to_json(const std::vector<nn::LayerSpec>& specs);
std::vector<nn::LayerSpec> specs_from_json(const std::string& text);

/// Custom architecture; the task head (sigmoid or nothing) is appended.
NetModel build_network(Family family, const nn::Shape& input, std::vector<nn::LayerSpec> body, Task task,
                       std::uint64_t seed);

struct TrainConfig {
  int batch_size = 64;
  nn::OptimizerConfig optimizer;
  int max_epochs = 100;
  int patience = 10;     // epochs without validation improvement; 0 disables
  long max_steps = 0;    // optimizer steps; 0 means unlimited
  int swa_window = 0;    // 0 disables weight averaging
  double val_fraction = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Hyperparameter defaults per family and task.
TrainConfig default_train_config(Family family, Task task);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;  // NaN without a validation split
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  long steps = 0;
  int best_epoch = -1;
  bool swa_applied = false;
};

/// Mini-batch training. Early stopping restores the parameters of the best
/// validation epoch; with SWA the final window's average is used instead.
TrainHistory train(NetModel& model, const Dataset& data, const TrainConfig& cfg);

/// Probability of the positive class or predicted age per sample.
std::vector<double> predict(NetModel& model, const Dataset& data);
std::vector<double> predict(const RidgeModel& model, const Dataset& data);

using Model = std::variant<RidgeModel, NetModel>;

Family family_of(const Model& m);
Task task_of(const Model& m);
const std::string& parcellation_of(const Model& m);
std::vector<double> predict(Model& m, const Dataset& data);

/// Checkpoint: one line "CXCKPT1 <json descriptor>\n" followed by the raw
/// little-endian payload (f32 parameters then buffers for networks, f64
/// weights then intercept for ridge).
void save_checkpoint(const std::filesystem::path& path, const Model& m);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace connectome

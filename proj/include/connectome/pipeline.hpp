#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "connectome/ensemble.hpp"
#include "connectome/models.hpp"

namespace connectome {

/// Settings shared by every command.
struct RunContext {
  int jobs = 1;
  /// Explicit seed; falls back to the config file, then CONNECTOME_SEED, then 0.
  std::optional<std::uint64_t> seed;
  std::string command_line;
};

/// Provenance written next to every artifact a command produces.
struct RunRecord {
  std::string command;
  std::string command_line;
  std::string config_digest;  // FNV-1a 64 of the canonical config text, hex
  std::vector<std::pair<std::string, std::uint64_t>> seeds;
  std::vector<std::pair<std::string, double>> timings;  // seconds
  std::vector<std::string> outputs;

  std::string to_json() const;
};

std::string fnv1a_hex(std::string_view text);
void write_run_record(const std::filesystem::path& path, const RunRecord& record);

/// CONNECTOME_SEED when set, otherwise `fallback`. Throws on a non-numeric value.
std::uint64_t env_seed(std::uint64_t fallback = 0);

// synth-gen ------------------------------------------------------------------

/// `config_json` may be empty for defaults.
RunRecord cmd_synth_gen(const RunContext& ctx, const std::string& config_json, const std::filesystem::path& out);

// parcellate -----------------------------------------------------------------

struct ParcellateOptions {
  std::filesystem::path mask;
  std::vector<int> scales;
  /// Explicit seeds; when empty, `count` consecutive seeds from the run seed.
  std::vector<std::uint64_t> seeds;
  int count = 1;
  bool check = false;
  std::filesystem::path out;
};

/// Writes <id>.cvol and <id>.json per (scale, seed) under `out`.
RunRecord cmd_parcellate(const RunContext& ctx, const ParcellateOptions& opt);

// extract --------------------------------------------------------------------

struct ExtractOptions {
  std::filesystem::path manifest;
  std::filesystem::path parcellation;  // label CVOL; a sibling .json sidecar supplies the id
  FeatureKind kind = FeatureKind::vector;
  std::optional<std::filesystem::path> mask;
  double scrub_threshold = 0.5;
  std::filesystem::path out;
};

RunRecord cmd_extract(const RunContext& ctx, const ExtractOptions& opt);

// train ----------------------------------------------------------------------

/// Everything `train` reads from a config file.
struct TrainSettings {
  Family family = Family::fcn;
  Task task = Task::classification;
  TrainConfig train;
  std::vector<nn::LayerSpec> layers;  // a missing task head is appended; empty for ridge
  std::vector<double> alpha_grid;     // ridge
  int alpha_folds = 5;                // ridge

  /// Full dump including defaults.
  std::string to_json() const;
};

TrainSettings default_train_settings(Family family, Task task);
/// Keys absent from `json` keep their defaults; unknown keys are rejected.
TrainSettings train_settings_from_json(Family family, Task task, const std::string& json);

struct TrainOptions {
  Family family = Family::fcn;
  Task task = Task::classification;
  std::filesystem::path features;
  std::string config_json;
  std::filesystem::path out;
};

/// Writes the checkpoint plus <out>.history.json and <out>.run.json.
RunRecord cmd_train(const RunContext& ctx, const TrainOptions& opt);

// predictions ----------------------------------------------------------------

struct Predictions {
  Task task = Task::classification;
  std::string source;  // family name or "ensemble"
  std::vector<std::string> parcellation_ids;
  std::vector<std::string> ids;
  std::vector<double> truth;
  std::vector<double> values;  // probability or age; the mean probability for ensembles
  std::vector<int> classes;    // ensembles only: majority vote, 0 or 1

  /// Per-subject input for `metric`: vote classes for ensemble accuracy, values otherwise.
  std::vector<double> metric_input(Metric metric) const;
  std::string to_json() const;
  static Predictions from_json(const std::string& text);
};

void write_predictions(const std::filesystem::path& path, const Predictions& p);
Predictions read_predictions(const std::filesystem::path& path);

/// Runs a checkpoint over a features directory, checking task, feature kind,
/// sample shape and parcellation id.
Predictions predict_features(const std::filesystem::path& checkpoint, const std::filesystem::path& features);

RunRecord cmd_predict(const RunContext& ctx, const std::filesystem::path& checkpoint,
                      const std::filesystem::path& features, const std::filesystem::path& out);

/// Majority vote or mean over members; all members must share task and subjects.
Predictions fuse(const std::vector<Predictions>& members);

/// Members are (checkpoint, features) pairs evaluated on `ctx.jobs` threads.
RunRecord cmd_ensemble_predict(const RunContext& ctx,
                               const std::vector<std::pair<std::filesystem::path, std::filesystem::path>>& members,
                               const std::filesystem::path& out);
RunRecord cmd_fuse_predictions(const RunContext& ctx, const std::vector<std::filesystem::path>& inputs,
                               const std::filesystem::path& out);

// evaluate / bootstrap -------------------------------------------------------

EvalReport evaluate(const Predictions& p);
std::string report_to_json(const EvalReport& r);
/// Human-readable "name value" lines.
std::string report_to_text(const EvalReport& r);

struct BootstrapOptions {
  std::filesystem::path a;
  std::filesystem::path b;
  Metric metric = Metric::accuracy;
  int replicates = 10000;
  std::filesystem::path out;
};

/// Writes differences.tsv (one metric(A) - metric(B) per replicate) and summary.json.
RunRecord cmd_bootstrap(const RunContext& ctx, const BootstrapOptions& opt, BootstrapResult* result = nullptr);

// saliency -------------------------------------------------------------------

struct SaliencyOptions {
  /// cnn3d checkpoints with their fingerprint feature directories.
  std::vector<std::pair<std::filesystem::path, std::filesystem::path>> members;
  std::vector<std::string> subjects;  // empty means all
  std::filesystem::path out;
};

/// Writes <id>.cvol (member mean of channel-max |gradient|) per subject and
/// mean.cvol over subjects.
RunRecord cmd_saliency(const RunContext& ctx, const SaliencyOptions& opt);

}  // namespace connectome

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "connectome/volume.hpp"
#include "connectome/volume_io.hpp"

namespace connectome {

/// Ball of voxels, center and radius in voxel units.
struct SynthBlob {
  std::array<int, 3> center{0, 0, 0};
  double radius = 3.0;
};

/// Two latent region signals a = z1, b = rho z1 + sqrt(1 - rho^2) z2 drive
/// blobs A (left) and B (right); blob voxels add noise_sd * N(0, 1), every
/// other voxel is pure noise. Classification sets rho by group; regression
/// draws rho ~ U(rho_min, rho_max) and age = intercept + slope rho + noise.
struct SynthConfig {
  std::array<int, 3> dims{24, 24, 24};
  double spacing = 3.0;
  int frames = 150;
  Task task = Task::classification;
  int subjects_per_group = 80;  // classification
  int subjects = 160;           // regression
  double rho_pos = 0.3;
  double rho_neg = -0.3;
  double rho_min = -0.6;
  double rho_max = 0.6;
  double noise_sd = 0.3;
  double age_intercept = 30.0;
  double age_slope = 10.0;
  double age_noise_sd = 2.0;
  std::optional<SynthBlob> blob_a;  // defaults scale with dims
  std::optional<SynthBlob> blob_b;
  std::uint64_t seed = 0;

  int subject_count() const;
  SynthBlob resolved_a() const;
  SynthBlob resolved_b() const;
  void validate() const;

  /// Full JSON dump including defaults; unknown keys are rejected.
  std::string to_json() const;
  static SynthConfig from_json(const std::string& text);
};

struct SynthLayout {
  GridMeta grid;
  MaskVolume mask;     // ellipsoid inscribed in the grid
  MaskVolume planted;  // A and B
  std::vector<std::size_t> blob_a;
  std::vector<std::size_t> blob_b;
};

/// Grid, gray mask and blob voxels. Throws when a blob leaves the mask, the
/// blobs overlap, or A/B are not in the left/right hemispheres.
SynthLayout synth_layout(const SynthConfig& cfg);

struct SynthSubject {
  std::string id;
  double label = 0.0;  // +-1 or age
  double rho = 0.0;
  double empirical_corr = 0.0;  // corr of mean A and mean B series
  BoldVolume bold;
};

/// Subject i drawn from its own stream derive_seed(cfg.seed, i).
SynthSubject synth_subject(const SynthConfig& cfg, const SynthLayout& layout, int index);

struct SynthTruth {
  SynthConfig config;
  std::size_t blob_a_voxels = 0;
  std::size_t blob_b_voxels = 0;
  /// Regression only: the planted age noise sd, the floor for any predictor.
  double bayes_rmse = 0.0;
  std::vector<std::string> ids;
  std::vector<double> labels;
  std::vector<double> rhos;
  std::vector<double> empirical_corrs;

  std::string to_json() const;
};

/// Writes mask.cvol, planted_mask.cvol, bold/<id>.cvol, manifest.json and
/// truth.json under `out`. Subjects are generated on `jobs` threads.
SynthTruth generate(const SynthConfig& cfg, const std::filesystem::path& out, int jobs = 1);

}  // namespace connectome

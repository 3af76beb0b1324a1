#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "connectome/models.hpp"
#include "connectome/volume.hpp"
#include "connectome/volume_io.hpp"

namespace connectome {

/// Per-sample tensor shape of a feature kind for an R-region parcellation:
/// fingerprint (R, nz, ny, nx), matrix (1, R, R), vector (R(R-1)/2).
nn::Shape feature_shape(FeatureKind kind, int regions, const GridMeta& grid);

/// One subject's features in float storage, laid out per feature_shape.
/// Fingerprints are zero outside `mask`. `degenerate`, when given, counts
/// constant-series voxels (fingerprint) or regions (matrix/vector).
std::vector<float> subject_features(FeatureKind kind, const BoldVolume& bold, const LabelVolume& labels,
                                    const MaskVolume& mask, std::size_t* degenerate = nullptr);

/// Features for a whole cohort plus what is needed to reuse them.
struct FeatureSet {
  FeatureKind kind = FeatureKind::vector;
  Task task = Task::classification;
  std::string parcellation_id;
  int regions = 0;
  GridMeta grid;
  MaskVolume mask;  // fingerprint mode only
  Dataset data;
};

/// Reads every subject's BOLD, scrubs frames when an fd series is present,
/// and computes the requested features on `jobs` threads. Without a mask the
/// parcellation support is used.
FeatureSet extract_features(const Manifest& manifest, const LabelVolume& labels, FeatureKind kind,
                            const std::string& parcellation_id, const MaskVolume* mask = nullptr,
                            int jobs = 1, double scrub_threshold = 0.5);

/// Directory layout: features.json index, mask.cvol, and per subject either
/// <id>.cvol (fingerprint, matrix) or one row of features.tsv (vector).
void write_features(const std::filesystem::path& dir, const FeatureSet& fs);
FeatureSet read_features(const std::filesystem::path& dir);

}  // namespace connectome

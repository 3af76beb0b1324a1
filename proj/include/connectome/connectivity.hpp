#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "connectome/volume.hpp"

namespace connectome {

/// Mean signal per region: data[r * frames + t] for region index r (label r+1).
struct RoiTimeSeries {
  int regions = 0;
  int frames = 0;
  std::vector<double> data;

  std::span<const double> row(int r) const {
    return {data.data() + static_cast<std::size_t>(r) * frames, static_cast<std::size_t>(frames)};
  }
};

/// R x R Pearson correlation matrix, row-major.
struct ConnectivityMatrix {
  int regions = 0;
  std::vector<double> values;

  double at(int i, int j) const { return values[static_cast<std::size_t>(i) * regions + j]; }
};

struct PearsonResult {
  double r = 0.0;
  bool degenerate = false;
};

/// Frame indices surviving motion scrubbing: every frame with fd > threshold
/// is dropped together with one frame before and two after.
std::vector<int> scrub_frames(std::span<const double> fd, double threshold = 0.5);

BoldVolume scrub(const BoldVolume& bold, std::span<const double> fd, double threshold = 0.5);

RoiTimeSeries roi_series(const BoldVolume& bold, const LabelVolume& labels);

/// Sample Pearson correlation. A zero-variance argument yields r = 0 with the
/// degenerate flag set.
PearsonResult pearson(std::span<const double> x, std::span<const double> y);

ConnectivityMatrix connectivity_matrix(const RoiTimeSeries& ts);

/// Strict upper triangle, row-major: (0,1), (0,2), ..., (R-2, R-1).
std::vector<double> vectorize_upper(const ConnectivityMatrix& m);

/// Voxel-level connectivity fingerprints. Channel r at voxel v is the Pearson
/// correlation of v's series with the mean series of target region r+1;
/// voxels outside `mask` are zero. `degenerate_voxels`, when given, receives
/// the number of masked voxels with constant series.
FingerprintVolume fingerprints(const BoldVolume& bold, const LabelVolume& targets,
                               const MaskVolume& mask, std::size_t* degenerate_voxels = nullptr);

RealVolume to_volume(const ConnectivityMatrix& m);
ConnectivityMatrix matrix_from_volume(const RealVolume& v);

}  // namespace connectome

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

namespace connectome {

/// Voxel grid geometry. Voxel (0,0,0) sits at `origin`; world coordinates are
/// origin + index * spacing, in millimeters.
struct GridMeta {
  std::array<int, 3> dims{1, 1, 1};
  std::array<double, 3> spacing{1.0, 1.0, 1.0};
  std::array<double, 3> origin{0.0, 0.0, 0.0};
  double midline_x = 0.0;

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }

  /// Linear index, x fastest.
  std::size_t index(int x, int y, int z) const {
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(dims[0]) * (static_cast<std::size_t>(y) +
                                                static_cast<std::size_t>(dims[1]) * z);
  }

  std::array<int, 3> coords(std::size_t i) const {
    const auto nx = static_cast<std::size_t>(dims[0]);
    const auto ny = static_cast<std::size_t>(dims[1]);
    return {static_cast<int>(i % nx), static_cast<int>((i / nx) % ny),
            static_cast<int>(i / (nx * ny))};
  }

  std::array<double, 3> world(std::size_t i) const {
    const auto c = coords(i);
    return {origin[0] + c[0] * spacing[0], origin[1] + c[1] * spacing[1],
            origin[2] + c[2] * spacing[2]};
  }

  /// Left hemisphere iff the voxel's world x lies strictly below the midline.
  bool is_left(std::size_t i) const {
    return origin[0] + coords(i)[0] * spacing[0] < midline_x;
  }

  double voxel_volume_mm3() const { return spacing[0] * spacing[1] * spacing[2]; }

  /// Throws Errc::format when dims or spacing are not positive.
  void validate() const;

  bool operator==(const GridMeta&) const = default;
};

/// Squared millimeter distance between two voxels of the same grid.
double distance_sq_mm(const GridMeta& meta, std::size_t a, std::size_t b);

struct MaskVolume {
  GridMeta meta;
  std::vector<std::uint8_t> data;

  static MaskVolume filled(const GridMeta& meta, bool value);
  bool at(std::size_t i) const { return data[i] != 0; }
  std::size_t count() const;
  std::vector<std::size_t> indices() const;
  void validate() const;
  bool operator==(const MaskVolume&) const = default;
};

struct LabelVolume {
  GridMeta meta;
  std::vector<std::int32_t> data;
  int num_regions = 0;

  /// Checks labels in [0, R]; with `require_all`, also that every 1..R occurs.
  void validate(bool require_all = true) const;
  MaskVolume support() const;
  bool operator==(const LabelVolume&) const = default;
};

/// Frame-major storage: data[t * voxels + v].
struct BoldVolume {
  GridMeta meta;
  int num_frames = 0;
  std::vector<float> data;

  float at(std::size_t voxel, int frame) const {
    return data[static_cast<std::size_t>(frame) * meta.voxel_count() + voxel];
  }
  std::vector<double> series(std::size_t voxel) const;
  void validate() const;
  bool operator==(const BoldVolume&) const = default;
};

/// Channel-major storage: data[r * voxels + v]. The same buffer is a row-major
/// (R, nz, ny, nx) tensor.
struct FingerprintVolume {
  GridMeta meta;
  int channels = 0;
  std::vector<float> data;

  float at(std::size_t voxel, int channel) const {
    return data[static_cast<std::size_t>(channel) * meta.voxel_count() + voxel];
  }
  void validate() const;
  bool operator==(const FingerprintVolume&) const = default;
};

/// Generic real-valued multi-channel grid: connectivity matrices (R, R, 1),
/// saliency maps, and anything else that is not one of the typed kinds.
struct RealVolume {
  GridMeta meta;
  int channels = 1;
  std::vector<float> data;

  void validate() const;
  bool operator==(const RealVolume&) const = default;
};

using Volume = std::variant<MaskVolume, LabelVolume, BoldVolume, FingerprintVolume, RealVolume>;

}  // namespace connectome

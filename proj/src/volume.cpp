#include "connectome/volume.hpp"

#include <cmath>
#include <string>

#include "connectome/error.hpp"

namespace connectome {

void GridMeta::validate() const {
  for (int a = 0; a < 3; ++a) {
    require(dims[a] >= 1, Errc::format, "grid dims must be >= 1, got " + std::to_string(dims[a]));
    require(spacing[a] > 0.0 && std::isfinite(spacing[a]), Errc::format,
            "grid spacing must be positive");
    require(std::isfinite(origin[a]), Errc::format, "grid origin must be finite");
  }
  require(std::isfinite(midline_x), Errc::format, "midline_x must be finite");
}

double distance_sq_mm(const GridMeta& meta, std::size_t a, std::size_t b) {
  const auto ca = meta.coords(a);
  const auto cb = meta.coords(b);
  double s = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double d = (ca[k] - cb[k]) * meta.spacing[k];
    s += d * d;
  }
  return s;
}

MaskVolume MaskVolume::filled(const GridMeta& meta, bool value) {
  return {meta, std::vector<std::uint8_t>(meta.voxel_count(), value ? 1 : 0)};
}

std::size_t MaskVolume::count() const {
  std::size_t n = 0;
  for (auto v : data) n += v != 0;
  return n;
}

std::vector<std::size_t> MaskVolume::indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (data[i]) out.push_back(i);
  return out;
}

void MaskVolume::validate() const {
  meta.validate();
  require(data.size() == meta.voxel_count(), Errc::shape, "mask data size does not match grid");
}

void LabelVolume::validate(bool require_all) const {
  meta.validate();
  require(data.size() == meta.voxel_count(), Errc::shape, "label data size does not match grid");
  require(num_regions >= 1, Errc::format, "label volume needs at least one region");
  std::vector<char> seen(static_cast<std::size_t>(num_regions) + 1, 0);
  for (auto l : data) {
    require(l >= 0 && l <= num_regions, Errc::format,
            "label " + std::to_string(l) + " outside [0, " + std::to_string(num_regions) + "]");
    seen[static_cast<std::size_t>(l)] = 1;
  }
  if (require_all) {
    for (int r = 1; r <= num_regions; ++r)
      require(seen[static_cast<std::size_t>(r)] != 0, Errc::format,
              "region " + std::to_string(r) + " is empty");
  }
}

MaskVolume LabelVolume::support() const {
  MaskVolume m{meta, std::vector<std::uint8_t>(data.size(), 0)};
  for (std::size_t i = 0; i < data.size(); ++i) m.data[i] = data[i] > 0;
  return m;
}

std::vector<double> BoldVolume::series(std::size_t voxel) const {
  std::vector<double> s(static_cast<std::size_t>(num_frames));
  const auto nv = meta.voxel_count();
  for (int t = 0; t < num_frames; ++t) s[t] = data[static_cast<std::size_t>(t) * nv + voxel];
  return s;
}

namespace {
void check_finite(const std::vector<float>& data, const char* what) {
  for (float v : data)
    require(std::isfinite(v), Errc::numeric, std::string(what) + " contains non-finite values");
}
}  // namespace

void BoldVolume::validate() const {
  meta.validate();
  require(num_frames >= 2, Errc::format, "BOLD volume needs at least 2 frames");
  require(data.size() == meta.voxel_count() * static_cast<std::size_t>(num_frames), Errc::shape,
          "BOLD data size does not match grid and frames");
  check_finite(data, "BOLD volume");
}

void FingerprintVolume::validate() const {
  meta.validate();
  require(channels >= 1, Errc::format, "fingerprint volume needs at least one channel");
  require(data.size() == meta.voxel_count() * static_cast<std::size_t>(channels), Errc::shape,
          "fingerprint data size does not match grid and channels");
  check_finite(data, "fingerprint volume");
}

void RealVolume::validate() const {
  meta.validate();
  require(channels >= 1, Errc::format, "volume needs at least one channel");
  require(data.size() == meta.voxel_count() * static_cast<std::size_t>(channels), Errc::shape,
          "volume data size does not match grid and channels");
  check_finite(data, "volume");
}

}  // namespace connectome

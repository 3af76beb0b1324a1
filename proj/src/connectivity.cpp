#include "connectome/connectivity.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "connectome/error.hpp"

namespace connectome {

namespace {

double clamp_unit(double r) { return std::clamp(r, -1.0, 1.0); }

// Centers `x` in place and returns its sum of squares; zero when constant.
double center(std::span<double> x) {
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  if (*lo == *hi) {
    std::fill(x.begin(), x.end(), 0.0);
    return 0.0;
  }
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double ss = 0.0;
  for (double& v : x) {
    v -= mean;
    ss += v * v;
  }
  return ss;
}

}  // namespace

std::vector<int> scrub_frames(std::span<const double> fd, double threshold) {
  const int T = static_cast<int>(fd.size());
  std::vector<char> drop(fd.size(), 0);
  for (int f = 0; f < T; ++f) {
    if (!(fd[f] > threshold)) continue;
    for (int g = f - 1; g <= f + 2; ++g)
      if (g >= 0 && g < T) drop[g] = 1;
  }
  std::vector<int> kept;
  for (int f = 0; f < T; ++f)
    if (!drop[f]) kept.push_back(f);
  return kept;
}

BoldVolume scrub(const BoldVolume& bold, std::span<const double> fd, double threshold) {
  require(fd.size() == static_cast<std::size_t>(bold.num_frames), Errc::shape,
          "fd length " + std::to_string(fd.size()) + " differs from frame count " +
              std::to_string(bold.num_frames));
  const auto kept = scrub_frames(fd, threshold);
  require(kept.size() >= 2, Errc::invalid_argument,
          "scrubbing leaves fewer than 2 frames (" + std::to_string(kept.size()) + ")");
  const auto nv = bold.meta.voxel_count();
  BoldVolume out{bold.meta, static_cast<int>(kept.size()), {}};
  out.data.reserve(nv * kept.size());
  for (int f : kept) {
    const auto* src = bold.data.data() + static_cast<std::size_t>(f) * nv;
    out.data.insert(out.data.end(), src, src + nv);
  }
  return out;
}

RoiTimeSeries roi_series(const BoldVolume& bold, const LabelVolume& labels) {
  require(bold.meta == labels.meta, Errc::shape, "BOLD and label grids differ");
  require(labels.num_regions >= 1, Errc::invalid_argument, "label volume has no regions");
  const int R = labels.num_regions;
  const int T = bold.num_frames;
  const auto nv = bold.meta.voxel_count();

  std::vector<std::size_t> counts(static_cast<std::size_t>(R), 0);
  for (auto l : labels.data) {
    require(l >= 0 && l <= R, Errc::format, "label outside [0, R]");
    if (l > 0) ++counts[static_cast<std::size_t>(l - 1)];
  }
  for (int r = 0; r < R; ++r)
    require(counts[r] > 0, Errc::invalid_argument, "region " + std::to_string(r + 1) + " is empty");

  RoiTimeSeries ts{R, T, std::vector<double>(static_cast<std::size_t>(R) * T, 0.0)};
  for (int t = 0; t < T; ++t) {
    const float* frame = bold.data.data() + static_cast<std::size_t>(t) * nv;
    for (std::size_t v = 0; v < nv; ++v) {
      const auto l = labels.data[v];
      if (l > 0) ts.data[static_cast<std::size_t>(l - 1) * T + t] += frame[v];
    }
  }
  for (int r = 0; r < R; ++r)
    for (int t = 0; t < T; ++t) ts.data[static_cast<std::size_t>(r) * T + t] /= counts[r];
  return ts;
}

PearsonResult pearson(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), Errc::shape, "pearson: length mismatch");
  require(x.size() >= 2, Errc::invalid_argument, "pearson: need at least 2 samples");
  std::vector<double> cx(x.begin(), x.end()), cy(y.begin(), y.end());
  const double sx = center(cx);
  const double sy = center(cy);
  if (sx == 0.0 || sy == 0.0) return {0.0, true};
  double sxy = 0.0;
  for (std::size_t i = 0; i < cx.size(); ++i) sxy += cx[i] * cy[i];
  return {clamp_unit(sxy / std::sqrt(sx * sy)), false};
}

ConnectivityMatrix connectivity_matrix(const RoiTimeSeries& ts) {
  require(ts.frames >= 2, Errc::invalid_argument, "need at least 2 frames");
  const int R = ts.regions;
  const auto T = static_cast<std::size_t>(ts.frames);

  // Normalize each row once; entry (i, j) is then a dot product.
  std::vector<double> z(ts.data);
  std::vector<char> flat(static_cast<std::size_t>(R), 0);
  for (int r = 0; r < R; ++r) {
    std::span<double> row(z.data() + r * T, T);
    const double ss = center(row);
    if (ss == 0.0) {
      flat[r] = 1;
      continue;
    }
    const double inv = 1.0 / std::sqrt(ss);
    for (double& v : row) v *= inv;
  }

  ConnectivityMatrix m{R, std::vector<double>(static_cast<std::size_t>(R) * R, 0.0)};
  for (int i = 0; i < R; ++i) {
    m.values[static_cast<std::size_t>(i) * R + i] = 1.0;
    for (int j = i + 1; j < R; ++j) {
      double r = 0.0;
      if (!flat[i] && !flat[j]) {
        const double* a = z.data() + i * T;
        const double* b = z.data() + j * T;
        for (std::size_t t = 0; t < T; ++t) r += a[t] * b[t];
        r = clamp_unit(r);
      }
      m.values[static_cast<std::size_t>(i) * R + j] = r;
      m.values[static_cast<std::size_t>(j) * R + i] = r;
    }
  }
  return m;
}

std::vector<double> vectorize_upper(const ConnectivityMatrix& m) {
  const int R = m.regions;
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(R) * (R - 1) / 2);
  for (int i = 0; i < R; ++i)
    for (int j = i + 1; j < R; ++j) out.push_back(m.at(i, j));
  return out;
}

FingerprintVolume fingerprints(const BoldVolume& bold, const LabelVolume& targets,
                               const MaskVolume& mask, std::size_t* degenerate_voxels) {
  require(bold.meta == mask.meta, Errc::shape, "BOLD and mask grids differ");
  const auto ts = roi_series(bold, targets);
  const int R = ts.regions;
  const int T = ts.frames;
  const auto nv = bold.meta.voxel_count();

  std::vector<double> roi(ts.data);
  std::vector<char> roi_flat(static_cast<std::size_t>(R), 0);
  for (int r = 0; r < R; ++r) {
    std::span<double> row(roi.data() + static_cast<std::size_t>(r) * T, static_cast<std::size_t>(T));
    const double ss = center(row);
    if (ss == 0.0) {
      roi_flat[r] = 1;
      continue;
    }
    const double inv = 1.0 / std::sqrt(ss);
    for (double& v : row) v *= inv;
  }

  FingerprintVolume fp{bold.meta, R, std::vector<float>(nv * static_cast<std::size_t>(R), 0.0f)};
  std::vector<double> x(static_cast<std::size_t>(T));
  std::size_t degenerate = 0;
  for (std::size_t v = 0; v < nv; ++v) {
    if (!mask.data[v]) continue;
    for (int t = 0; t < T; ++t) x[t] = bold.data[static_cast<std::size_t>(t) * nv + v];
    const double ss = center(x);
    if (ss == 0.0) {
      ++degenerate;
      continue;
    }
    const double inv = 1.0 / std::sqrt(ss);
    for (int r = 0; r < R; ++r) {
      if (roi_flat[r]) continue;
      const double* row = roi.data() + static_cast<std::size_t>(r) * T;
      double dot = 0.0;
      for (int t = 0; t < T; ++t) dot += x[t] * row[t];
      fp.data[static_cast<std::size_t>(r) * nv + v] = static_cast<float>(clamp_unit(dot * inv));
    }
  }
  if (degenerate_voxels) *degenerate_voxels = degenerate;
  return fp;
}

RealVolume to_volume(const ConnectivityMatrix& m) {
  RealVolume v;
  v.meta.dims = {m.regions, m.regions, 1};
  v.channels = 1;
  v.data.resize(m.values.size());
  // x fastest: element (x=j, y=i) holds m(i, j).
  for (std::size_t k = 0; k < m.values.size(); ++k) v.data[k] = static_cast<float>(m.values[k]);
  return v;
}

ConnectivityMatrix matrix_from_volume(const RealVolume& v) {
  require(v.meta.dims[0] == v.meta.dims[1] && v.meta.dims[2] == 1 && v.channels == 1, Errc::shape,
          "connectivity matrix volume must have dims (R, R, 1)");
  ConnectivityMatrix m{v.meta.dims[0], std::vector<double>(v.data.begin(), v.data.end())};
  return m;
}

}  // namespace connectome

#include "connectome/parcellation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <unordered_map>

#include <json.hpp>

#include "connectome/error.hpp"
#include "connectome/rng.hpp"

namespace connectome {

namespace {

struct Offset {
  int dx, dy, dz;
};

// Integer voxel offsets whose millimeter length lies in [d, 2d].
std::vector<Offset> annulus_offsets(const GridMeta& meta, double d) {
  std::vector<Offset> out;
  const double lo = d * d;
  const double hi = 4.0 * d * d;
  std::array<int, 3> reach{};
  for (int a = 0; a < 3; ++a) reach[a] = static_cast<int>(std::floor(2.0 * d / meta.spacing[a]));
  for (int dz = -reach[2]; dz <= reach[2]; ++dz)
    for (int dy = -reach[1]; dy <= reach[1]; ++dy)
      for (int dx = -reach[0]; dx <= reach[0]; ++dx) {
        const double x = dx * meta.spacing[0], y = dy * meta.spacing[1], z = dz * meta.spacing[2];
        const double r2 = x * x + y * y + z * z;
        if (r2 >= lo && r2 <= hi) out.push_back({dx, dy, dz});
      }
  return out;
}

// Uniform hash grid with cell edge d: any two points closer than d lie in
// neighbouring cells.
class CenterGrid {
 public:
  CenterGrid(const GridMeta& meta, double d) : meta_(meta), cell_(d) {}

  bool far_enough(std::size_t v, double d) const {
    const auto key = cell_of(v);
    const double d2 = d * d;
    for (int a = -1; a <= 1; ++a)
      for (int b = -1; b <= 1; ++b)
        for (int c = -1; c <= 1; ++c) {
          auto it = cells_.find(pack({key[0] + a, key[1] + b, key[2] + c}));
          if (it == cells_.end()) continue;
          for (auto other : it->second)
            if (distance_sq_mm(meta_, v, other) < d2) return false;
        }
    return true;
  }

  void insert(std::size_t v) { cells_[pack(cell_of(v))].push_back(v); }

 private:
  std::array<long long, 3> cell_of(std::size_t v) const {
    const auto c = meta_.coords(v);
    return {static_cast<long long>(std::floor(c[0] * meta_.spacing[0] / cell_)),
            static_cast<long long>(std::floor(c[1] * meta_.spacing[1] / cell_)),
            static_cast<long long>(std::floor(c[2] * meta_.spacing[2] / cell_))};
  }
  static long long pack(std::array<long long, 3> k) {
    return ((k[0] + 4096) << 40) ^ ((k[1] + 4096) << 20) ^ (k[2] + 4096);
  }

  const GridMeta& meta_;
  double cell_;
  std::unordered_map<long long, std::vector<std::size_t>> cells_;
};

// One Poisson disk pass over a single hemisphere's voxels.
std::vector<std::size_t> sample_hemisphere(const MaskVolume& mask,
                                           const std::vector<std::size_t>& voxels,
                                           const std::vector<std::uint8_t>& in_hemi, double d,
                                           int attempts, Rng& rng) {
  const auto& meta = mask.meta;
  const auto offsets = annulus_offsets(meta, d);
  CenterGrid grid(meta, d);

  std::vector<std::size_t> centers;
  std::vector<std::size_t> active;
  const auto first = voxels[rng.below(voxels.size())];
  centers.push_back(first);
  active.push_back(first);
  grid.insert(first);

  std::vector<std::size_t> annulus;
  while (!active.empty()) {
    const auto slot = rng.below(active.size());
    const auto c = active[slot];
    const auto cc = meta.coords(c);

    annulus.clear();
    for (const auto& o : offsets) {
      const int x = cc[0] + o.dx, y = cc[1] + o.dy, z = cc[2] + o.dz;
      if (x < 0 || y < 0 || z < 0 || x >= meta.dims[0] || y >= meta.dims[1] || z >= meta.dims[2])
        continue;
      const auto v = meta.index(x, y, z);
      if (in_hemi[v]) annulus.push_back(v);
    }

    bool accepted = false;
    for (int k = 0; k < attempts && !annulus.empty(); ++k) {
      const auto cand = annulus[rng.below(annulus.size())];
      if (grid.far_enough(cand, d)) {
        centers.push_back(cand);
        active.push_back(cand);
        grid.insert(cand);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      active[slot] = active.back();
      active.pop_back();
    }
  }
  return centers;
}

struct HemisphereSample {
  std::vector<std::size_t> centers;
  double radius = 0.0;
  bool converged = true;
  int iterations = 0;
};

HemisphereSample sample_with_refinement(const MaskVolume& mask,
                                        const std::vector<std::size_t>& voxels, int target,
                                        const SamplingConfig& cfg, Rng& rng) {
  HemisphereSample best;
  if (voxels.empty() || target == 0) return best;

  std::vector<std::uint8_t> in_hemi(mask.data.size(), 0);
  for (auto v : voxels) in_hemi[v] = 1;

  const double volume = static_cast<double>(voxels.size()) * mask.meta.voxel_volume_mm3();
  double d = std::cbrt(cfg.packing * volume / target);
  const double tol = cfg.region_tolerance * target;
  double best_gap = std::numeric_limits<double>::infinity();

  for (int it = 1; it <= cfg.max_radius_iterations; ++it) {
    auto centers = sample_hemisphere(mask, voxels, in_hemi, d, cfg.annulus_attempts, rng);
    const double realized = static_cast<double>(centers.size());
    const double gap = std::abs(realized - target);
    if (gap < best_gap) {
      best_gap = gap;
      best.centers = std::move(centers);
      best.radius = d;
    }
    best.iterations = it;
    if (gap <= tol) {
      best.converged = true;
      return best;
    }
    d *= std::cbrt(realized / target);
  }
  best.converged = false;
  return best;
}

}  // namespace

void SamplingConfig::validate() const {
  require(target_regions >= 1, Errc::invalid_argument, "target region count must be >= 1");
  require(annulus_attempts >= 1, Errc::invalid_argument, "annulus attempts must be >= 1");
  require(region_tolerance > 0.0 && region_tolerance < 1.0, Errc::invalid_argument,
          "region tolerance must lie in (0, 1)");
  require(max_radius_iterations >= 1, Errc::invalid_argument, "radius iterations must be >= 1");
  require(packing > 0.0, Errc::invalid_argument, "packing constant must be positive");
}

double estimate_radius(const MaskVolume& mask, int regions, double packing) {
  mask.validate();
  const auto n = mask.count();
  require(n > 0, Errc::invalid_argument, "mask is empty");
  require(regions >= 1, Errc::invalid_argument, "region count must be >= 1");
  require(static_cast<std::size_t>(regions) <= n, Errc::invalid_argument,
          "region count " + std::to_string(regions) + " exceeds masked voxel count " +
              std::to_string(n));
  const double volume = static_cast<double>(n) * mask.meta.voxel_volume_mm3();
  return std::cbrt(packing * volume / regions);
}

ParcellationResult sample_parcellation(const MaskVolume& mask, const SamplingConfig& cfg) {
  cfg.validate();
  mask.validate();
  const auto& meta = mask.meta;

  std::array<std::vector<std::size_t>, 2> hemi;
  for (std::size_t v = 0; v < mask.data.size(); ++v)
    if (mask.data[v]) hemi[meta.is_left(v) ? 0 : 1].push_back(v);
  const std::size_t total = hemi[0].size() + hemi[1].size();
  require(total > 0, Errc::invalid_argument, "mask is empty");
  require(static_cast<std::size_t>(cfg.target_regions) <= total, Errc::invalid_argument,
          "region count exceeds masked voxel count");
  const int nonempty = (hemi[0].empty() ? 0 : 1) + (hemi[1].empty() ? 0 : 1);
  require(cfg.target_regions >= nonempty, Errc::invalid_argument,
          "need at least one region per non-empty hemisphere");

  // Proportional allocation, at least one center per non-empty hemisphere.
  const int R = cfg.target_regions;
  int left = static_cast<int>(std::lround(static_cast<double>(R) * hemi[0].size() / total));
  left = std::clamp(left, hemi[0].empty() ? 0 : 1, hemi[1].empty() ? R : R - 1);
  const std::array<int, 2> targets{left, R - left};

  ParcellationResult out;
  out.target_regions = R;
  out.seed = cfg.seed;
  out.hemisphere_targets = targets;
  out.radius_mm = std::numeric_limits<double>::infinity();

  for (int h = 0; h < 2; ++h) {
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(h + 1)));
    auto s = sample_with_refinement(mask, hemi[h], targets[h], cfg, rng);
    out.hemisphere_radius_mm[h] = s.radius;
    if (!s.centers.empty()) out.radius_mm = std::min(out.radius_mm, s.radius);
    out.converged = out.converged && s.converged;
    out.iterations = std::max(out.iterations, s.iterations);
    for (auto c : s.centers) {
      out.centers.push_back(c);
      out.hemisphere_of.push_back(h == 0 ? Hemisphere::left : Hemisphere::right);
    }
  }

  // Nearest same-hemisphere center; strict comparison keeps the lowest index.
  out.labels.meta = meta;
  out.labels.data.assign(mask.data.size(), 0);
  out.labels.num_regions = out.realized_regions();
  std::array<std::vector<std::size_t>, 2> by_hemi;
  for (std::size_t i = 0; i < out.centers.size(); ++i)
    by_hemi[out.hemisphere_of[i] == Hemisphere::left ? 0 : 1].push_back(i);
  for (int h = 0; h < 2; ++h) {
    for (auto v : hemi[h]) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      for (auto ci : by_hemi[h]) {
        const double d2 = distance_sq_mm(meta, v, out.centers[ci]);
        if (d2 < best) {
          best = d2;
          arg = ci;
        }
      }
      out.labels.data[v] = static_cast<std::int32_t>(arg + 1);
    }
  }
  return out;
}

ParcelStats parcel_stats(const LabelVolume& labels) {
  labels.validate(false);
  std::vector<double> counts(static_cast<std::size_t>(labels.num_regions), 0.0);
  for (auto l : labels.data)
    if (l > 0) counts[static_cast<std::size_t>(l - 1)] += 1.0;
  const double cm3 = labels.meta.voxel_volume_mm3() / 1000.0;
  std::vector<double> vols;
  for (double c : counts) vols.push_back(c * cm3);

  ParcelStats s;
  s.regions = labels.num_regions;
  double sum = 0.0;
  for (double v : vols) sum += v;
  s.total_cm3 = sum;
  const double mean = sum / vols.size();
  double ss = 0.0;
  for (double v : vols) ss += (v - mean) * (v - mean);
  s.std_cm3 = std::sqrt(ss / vols.size());
  std::sort(vols.begin(), vols.end());
  const auto n = vols.size();
  s.median_cm3 = n % 2 ? vols[n / 2] : 0.5 * (vols[n / 2 - 1] + vols[n / 2]);
  s.min_cm3 = vols.front();
  s.max_cm3 = vols.back();
  return s;
}

ParcellationCheck check_parcellation(const MaskVolume& mask, const ParcellationResult& p) {
  ParcellationCheck chk;
  const auto& meta = mask.meta;
  const int R = p.realized_regions();
  const auto& lab = p.labels.data;

  for (std::size_t v = 0; v < mask.data.size(); ++v) {
    const bool in = mask.data[v] != 0;
    if (in && (lab[v] < 1 || lab[v] > R)) {
      chk.coverage = false;
      chk.problems.push_back("masked voxel " + std::to_string(v) + " unlabeled");
    }
    if (!in && lab[v] != 0) {
      chk.coverage = false;
      chk.problems.push_back("unmasked voxel " + std::to_string(v) + " labeled");
    }
  }

  const double d2 = p.radius_mm * p.radius_mm;
  for (int a = 0; a < R; ++a)
    for (int b = a + 1; b < R; ++b) {
      if (p.hemisphere_of[a] != p.hemisphere_of[b]) continue;
      if (distance_sq_mm(meta, p.centers[a], p.centers[b]) < d2) {
        chk.separation = false;
        chk.problems.push_back("centers " + std::to_string(a) + "," + std::to_string(b) +
                               " closer than d");
      }
    }

  std::vector<int> side(static_cast<std::size_t>(R) + 1, -1);
  for (std::size_t v = 0; v < lab.size(); ++v) {
    if (lab[v] <= 0 || lab[v] > R) continue;
    const int s = meta.is_left(v) ? 0 : 1;
    auto& seen = side[static_cast<std::size_t>(lab[v])];
    if (seen == -1) seen = s;
    if (seen != s) {
      chk.hemisphere_purity = false;
      chk.problems.push_back("label " + std::to_string(lab[v]) + " crosses midline");
      seen = s;
    }
  }
  for (int c = 0; c < R; ++c) {
    const int s = meta.is_left(p.centers[c]) ? 0 : 1;
    if ((p.hemisphere_of[c] == Hemisphere::left) != (s == 0)) {
      chk.hemisphere_purity = false;
      chk.problems.push_back("center " + std::to_string(c) + " on wrong side");
    }
  }

  for (std::size_t v = 0; v < lab.size() && chk.coverage; ++v) {
    if (!mask.data[v]) continue;
    const auto own = static_cast<std::size_t>(lab[v] - 1);
    const double mine = distance_sq_mm(meta, v, p.centers[own]);
    const bool left = meta.is_left(v);
    for (int c = 0; c < R; ++c) {
      if ((p.hemisphere_of[c] == Hemisphere::left) != left) continue;
      const double other = distance_sq_mm(meta, v, p.centers[c]);
      if (other < mine || (other == mine && static_cast<std::size_t>(c) < own)) {
        chk.nearest_assignment = false;
        chk.problems.push_back("voxel " + std::to_string(v) + " not assigned to nearest center");
        break;
      }
    }
  }
  return chk;
}

std::string parcellation_id(int target_regions, std::uint64_t seed) {
  return "sp-R" + std::to_string(target_regions) + "-s" + std::to_string(seed);
}

void write_parcellation_sidecar(const std::filesystem::path& path, const ParcellationResult& p,
                                const std::string& id) {
  nlohmann::json j;
  j["parcellation_id"] = id;
  j["seed"] = p.seed;
  j["target_regions"] = p.target_regions;
  j["realized_regions"] = p.realized_regions();
  j["radius_mm"] = p.radius_mm;
  j["hemisphere_radius_mm"] = p.hemisphere_radius_mm;
  j["hemisphere_targets"] = p.hemisphere_targets;
  j["converged"] = p.converged;
  j["iterations"] = p.iterations;
  auto centers = nlohmann::json::array();
  for (std::size_t i = 0; i < p.centers.size(); ++i) {
    const auto c = p.labels.meta.coords(p.centers[i]);
    centers.push_back({{"label", i + 1},
                       {"voxel", c},
                       {"hemisphere", p.hemisphere_of[i] == Hemisphere::left ? "L" : "R"}});
  }
  j["centers"] = std::move(centers);
  std::ofstream os(path);
  require(static_cast<bool>(os), Errc::io, "cannot write " + path.string());
  os << j.dump(2) << '\n';
}

}  // namespace connectome

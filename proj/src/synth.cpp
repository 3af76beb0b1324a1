#include "connectome/synth.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include <json.hpp>

#include "connectome/connectivity.hpp"
#include "connectome/error.hpp"
#include "connectome/rng.hpp"
#include "parallel.hpp"

namespace connectome {

namespace fs = std::filesystem;

int SynthConfig::subject_count() const {
  return task == Task::classification ? 2 * subjects_per_group : subjects;
}

SynthBlob SynthConfig::resolved_a() const {
  if (blob_a) return *blob_a;
  const int m = std::min({dims[0], dims[1], dims[2]});
  return {{static_cast<int>(std::lround(0.27 * (dims[0] - 1))), (dims[1] - 1) / 2, (dims[2] - 1) / 2},
          std::max(1.5, 0.125 * m)};
}

SynthBlob SynthConfig::resolved_b() const {
  if (blob_b) return *blob_b;
  const int m = std::min({dims[0], dims[1], dims[2]});
  return {{static_cast<int>(std::lround(0.73 * (dims[0] - 1))), (dims[1] - 1) / 2, (dims[2] - 1) / 2},
          std::max(1.5, 0.125 * m)};
}

void SynthConfig::validate() const {
  for (int d : dims) require(d >= 4, Errc::invalid_argument, "synth dims must be >= 4");
  require(spacing > 0.0, Errc::invalid_argument, "synth spacing must be positive");
  require(frames >= 3, Errc::invalid_argument, "synth needs at least 3 frames");
  require(subject_count() >= 1, Errc::invalid_argument, "synth needs at least one subject");
  for (double r : {rho_pos, rho_neg, rho_min, rho_max})
    require(std::abs(r) < 1.0, Errc::invalid_argument, "coupling must satisfy |rho| < 1");
  require(rho_min <= rho_max, Errc::invalid_argument, "rho_min must not exceed rho_max");
  require(noise_sd >= 0.0 && age_noise_sd >= 0.0, Errc::invalid_argument, "noise sd must be >= 0");
  require(resolved_a().radius > 0.0 && resolved_b().radius > 0.0, Errc::invalid_argument,
          "blob radius must be positive");
}

namespace {

nlohmann::json blob_json(const SynthBlob& b) { return {{"center", b.center}, {"radius", b.radius}}; }

SynthBlob blob_from(const nlohmann::json& j) {
  for (const auto& [k, v] : j.items())
    require(k == "center" || k == "radius", Errc::format, "unknown blob key '" + k + "'");
  return {j.at("center").get<std::array<int, 3>>(), j.at("radius").get<double>()};
}

nlohmann::json config_json(const SynthConfig& c) {
  return {{"dims", c.dims},
          {"spacing", c.spacing},
          {"frames", c.frames},
          {"task", to_string(c.task)},
          {"subjects_per_group", c.subjects_per_group},
          {"subjects", c.subjects},
          {"rho_pos", c.rho_pos},
          {"rho_neg", c.rho_neg},
          {"rho_min", c.rho_min},
          {"rho_max", c.rho_max},
          {"noise_sd", c.noise_sd},
          {"age_intercept", c.age_intercept},
          {"age_slope", c.age_slope},
          {"age_noise_sd", c.age_noise_sd},
          {"blob_a", blob_json(c.resolved_a())},
          {"blob_b", blob_json(c.resolved_b())},
          {"seed", c.seed}};
}

}  // namespace

std::string SynthConfig::to_json() const { return config_json(*this).dump(2); }

SynthConfig SynthConfig::from_json(const std::string& text) {
  SynthConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    require(j.is_object(), Errc::format, "synth config must be a JSON object");
    for (const auto& [k, v] : j.items()) {
      if (k == "dims") c.dims = v.get<std::array<int, 3>>();
      else if (k == "spacing") c.spacing = v.get<double>();
      else if (k == "frames") c.frames = v.get<int>();
      else if (k == "task") c.task = task_from_string(v.get<std::string>());
      else if (k == "subjects_per_group") c.subjects_per_group = v.get<int>();
      else if (k == "subjects") c.subjects = v.get<int>();
      else if (k == "rho_pos") c.rho_pos = v.get<double>();
      else if (k == "rho_neg") c.rho_neg = v.get<double>();
      else if (k == "rho_min") c.rho_min = v.get<double>();
      else if (k == "rho_max") c.rho_max = v.get<double>();
      else if (k == "noise_sd") c.noise_sd = v.get<double>();
      else if (k == "age_intercept") c.age_intercept = v.get<double>();
      else if (k == "age_slope") c.age_slope = v.get<double>();
      else if (k == "age_noise_sd") c.age_noise_sd = v.get<double>();
      else if (k == "blob_a") c.blob_a = blob_from(v);
      else if (k == "blob_b") c.blob_b = blob_from(v);
      else if (k == "seed") c.seed = v.get<std::uint64_t>();
      else fail(Errc::format, "unknown synth config key '" + k + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::format, std::string("bad synth config: ") + e.what());
  }
  c.validate();
  return c;
}

SynthLayout synth_layout(const SynthConfig& cfg) {
  cfg.validate();
  SynthLayout L;
  L.grid.dims = cfg.dims;
  L.grid.spacing = {cfg.spacing, cfg.spacing, cfg.spacing};
  for (int a = 0; a < 3; ++a) L.grid.origin[a] = -0.5 * (cfg.dims[a] - 1) * cfg.spacing;
  L.grid.midline_x = 0.0;

  const auto nv = L.grid.voxel_count();
  L.mask = MaskVolume::filled(L.grid, false);
  for (std::size_t v = 0; v < nv; ++v) {
    const auto c = L.grid.coords(v);
    double r2 = 0.0;
    for (int a = 0; a < 3; ++a) {
      const double u = (c[a] - 0.5 * (cfg.dims[a] - 1)) / (0.47 * cfg.dims[a]);
      r2 += u * u;
    }
    L.mask.data[v] = r2 <= 1.0;
  }

  auto ball = [&](const SynthBlob& b, const char* name, bool left) {
    std::vector<std::size_t> out;
    for (std::size_t v = 0; v < nv; ++v) {
      const auto c = L.grid.coords(v);
      double d2 = 0.0;
      for (int a = 0; a < 3; ++a) d2 += static_cast<double>(c[a] - b.center[a]) * (c[a] - b.center[a]);
      if (d2 > b.radius * b.radius) continue;
      require(L.mask.at(v), Errc::invalid_argument, std::string("blob ") + name + " leaves the gray mask");
      require(L.grid.is_left(v) == left, Errc::invalid_argument,
              std::string("blob ") + name + " crosses into the " + (left ? "right" : "left") + " hemisphere");
      out.push_back(v);
    }
    for (int a = 0; a < 3; ++a)
      require(b.center[a] >= 0 && b.center[a] < cfg.dims[a], Errc::invalid_argument,
              std::string("blob ") + name + " center outside the grid");
    require(!out.empty(), Errc::invalid_argument, std::string("blob ") + name + " is empty");
    return out;
  };
  L.blob_a = ball(cfg.resolved_a(), "A", true);
  L.blob_b = ball(cfg.resolved_b(), "B", false);

  L.planted = MaskVolume::filled(L.grid, false);
  for (auto v : L.blob_a) L.planted.data[v] = 1;
  for (auto v : L.blob_b) {
    require(!L.planted.data[v], Errc::invalid_argument, "blobs A and B overlap");
    L.planted.data[v] = 1;
  }
  return L;
}

SynthSubject synth_subject(const SynthConfig& cfg, const SynthLayout& L, int index) {
  require(index >= 0 && index < cfg.subject_count(), Errc::invalid_argument, "subject index out of range");
  Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(index)));
  SynthSubject s;
  char id[32];
  std::snprintf(id, sizeof(id), "sub-%04d", index);
  s.id = id;

  if (cfg.task == Task::classification) {
    const bool pos = index % 2 == 0;
    s.rho = pos ? cfg.rho_pos : cfg.rho_neg;
    s.label = pos ? 1.0 : -1.0;
  } else {
    s.rho = rng.uniform(cfg.rho_min, cfg.rho_max);
    s.label = cfg.age_intercept + cfg.age_slope * s.rho + cfg.age_noise_sd * rng.normal();
  }

  const int T = cfg.frames;
  std::vector<double> a(T), b(T);
  const double c = std::sqrt(1.0 - s.rho * s.rho);
  for (int t = 0; t < T; ++t) {
    const double z1 = rng.normal(), z2 = rng.normal();
    a[t] = z1;
    b[t] = s.rho * z1 + c * z2;
  }

  const auto nv = L.grid.voxel_count();
  std::vector<std::int8_t> region(nv, 0);
  for (auto v : L.blob_a) region[v] = 1;
  for (auto v : L.blob_b) region[v] = 2;
  s.bold = BoldVolume{L.grid, T, std::vector<float>(nv * static_cast<std::size_t>(T))};
  std::vector<double> ma(T, 0.0), mb(T, 0.0);
  for (int t = 0; t < T; ++t) {
    float* frame = s.bold.data.data() + static_cast<std::size_t>(t) * nv;
    for (std::size_t v = 0; v < nv; ++v) {
      double val = cfg.noise_sd * rng.normal();
      if (region[v] == 1) val += a[t];
      if (region[v] == 2) val += b[t];
      frame[v] = static_cast<float>(val);
      if (region[v] == 1) ma[t] += frame[v];
      if (region[v] == 2) mb[t] += frame[v];
    }
  }
  s.empirical_corr = pearson(ma, mb).r;
  return s;
}

std::string SynthTruth::to_json() const {
  nlohmann::json j;
  j["config"] = config_json(config);
  j["task"] = to_string(config.task);
  j["blob_a_voxels"] = blob_a_voxels;
  j["blob_b_voxels"] = blob_b_voxels;
  if (config.task == Task::regression) j["bayes_rmse"] = bayes_rmse;
  auto subs = nlohmann::json::array();
  for (std::size_t i = 0; i < ids.size(); ++i)
    subs.push_back({{"id", ids[i]}, {config.task == Task::classification ? "label" : "age", labels[i]},
                    {"rho", rhos[i]}, {"empirical_corr", empirical_corrs[i]}});
  j["subjects"] = subs;
  return j.dump(2);
}

SynthTruth generate(const SynthConfig& cfg, const fs::path& out, int jobs) {
  const auto L = synth_layout(cfg);
  std::error_code ec;
  fs::create_directories(out / "bold", ec);
  require(!ec, Errc::io, "cannot create " + (out / "bold").string() + ": " + ec.message());
  write_volume(out / "mask.cvol", L.mask);
  write_volume(out / "planted_mask.cvol", L.planted);

  const int n = cfg.subject_count();
  SynthTruth truth;
  truth.config = cfg;
  truth.blob_a_voxels = L.blob_a.size();
  truth.blob_b_voxels = L.blob_b.size();
  if (cfg.task == Task::regression) truth.bayes_rmse = cfg.age_noise_sd;
  truth.ids.resize(n);
  truth.labels.resize(n);
  truth.rhos.resize(n);
  truth.empirical_corrs.resize(n);

  auto work = [&](std::size_t begin, std::size_t end) {
    for (auto i = begin; i < end; ++i) {
      auto s = synth_subject(cfg, L, static_cast<int>(i));
      write_volume(out / "bold" / (s.id + ".cvol"), s.bold);
      truth.ids[i] = s.id;
      truth.labels[i] = s.label;
      truth.rhos[i] = s.rho;
      truth.empirical_corrs[i] = s.empirical_corr;
    }
  };
  detail::parallel_ranges(static_cast<std::size_t>(n), jobs, work);

  Manifest m;
  m.task = cfg.task;
  m.grid = L.grid;
  for (int i = 0; i < n; ++i)
    m.subjects.push_back({truth.ids[i], fs::path("bold") / (truth.ids[i] + ".cvol"), truth.labels[i], std::nullopt});
  write_manifest(out / "manifest.json", m);

  std::ofstream tf(out / "truth.json");
  require(static_cast<bool>(tf), Errc::io, "cannot write truth record");
  tf << truth.to_json() << '\n';
  return truth;
}

}  // namespace connectome

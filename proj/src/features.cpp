#include "connectome/features.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "connectome/connectivity.hpp"
#include "connectome/error.hpp"
#include "parallel.hpp"

namespace connectome {

namespace fs = std::filesystem;

nn::Shape feature_shape(FeatureKind kind, int regions, const GridMeta& grid) {
  require(regions >= 1, Errc::invalid_argument, "feature shape needs R >= 1");
  const auto R = static_cast<std::size_t>(regions);
  switch (kind) {
    case FeatureKind::fingerprint:
      return {R, static_cast<std::size_t>(grid.dims[2]), static_cast<std::size_t>(grid.dims[1]),
              static_cast<std::size_t>(grid.dims[0])};
    case FeatureKind::matrix: return {1, R, R};
    case FeatureKind::vector:
      require(regions >= 2, Errc::invalid_argument, "vector features need R >= 2");
      return {R * (R - 1) / 2};
  }
  fail(Errc::internal, "unhandled feature kind");
}

std::vector<float> subject_features(FeatureKind kind, const BoldVolume& bold, const LabelVolume& labels,
                                    const MaskVolume& mask, std::size_t* degenerate) {
  if (kind == FeatureKind::fingerprint) return fingerprints(bold, labels, mask, degenerate).data;

  const auto ts = roi_series(bold, labels);
  if (degenerate) {
    *degenerate = 0;
    for (int r = 0; r < ts.regions; ++r) {
      const auto row = ts.row(r);
      const auto [lo, hi] = std::minmax_element(row.begin(), row.end());
      *degenerate += *lo == *hi;
    }
  }
  const auto m = connectivity_matrix(ts);
  const auto values = kind == FeatureKind::matrix ? m.values : vectorize_upper(m);
  return {values.begin(), values.end()};
}

FeatureSet extract_features(const Manifest& manifest, const LabelVolume& labels, FeatureKind kind,
                            const std::string& parcellation_id, const MaskVolume* mask, int jobs,
                            double scrub_threshold) {
  validate_manifest(manifest);
  labels.validate(true);
  require(labels.meta == manifest.grid, Errc::shape, "parcellation grid differs from the manifest grid");
  FeatureSet out;
  out.kind = kind;
  out.task = manifest.task;
  out.parcellation_id = parcellation_id;
  out.regions = labels.num_regions;
  out.grid = manifest.grid;
  out.mask = mask ? *mask : labels.support();
  require(out.mask.meta == manifest.grid, Errc::shape, "mask grid differs from the manifest grid");
  out.data.sample_shape = feature_shape(kind, labels.num_regions, manifest.grid);

  const std::size_t n = manifest.subjects.size();
  const std::size_t width = out.data.sample_size();
  out.data.x.assign(n * width, 0.0f);
  for (const auto& s : manifest.subjects) {
    out.data.y.push_back(s.label);
    out.data.ids.push_back(s.id);
  }

  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto& s = manifest.subjects[i];
      auto bold = read_bold(s.bold_path);
      if (s.fd_series) bold = scrub(bold, *s.fd_series, scrub_threshold);
      const auto f = subject_features(kind, bold, labels, out.mask);
      std::copy(f.begin(), f.end(), out.data.x.begin() + static_cast<std::ptrdiff_t>(i * width));
    }
  };
  detail::parallel_ranges(n, jobs, work);
  return out;
}

namespace {

std::string fmt_float(float v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

std::string fmt_double(double v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

template <typename T>
T parse_number(const std::string& s, const std::string& where) {
  T v{};
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  require(r.ec == std::errc{} && r.ptr == s.data() + s.size(), Errc::format,
          "bad number '" + s + "' in " + where);
  return v;
}

nlohmann::json grid_json(const GridMeta& g) {
  return {{"dims", g.dims}, {"spacing", g.spacing}, {"origin", g.origin}, {"midline_x", g.midline_x}};
}

GridMeta grid_from(const nlohmann::json& j) {
  GridMeta g;
  g.dims = j.at("dims").get<std::array<int, 3>>();
  g.spacing = j.at("spacing").get<std::array<double, 3>>();
  g.origin = j.at("origin").get<std::array<double, 3>>();
  g.midline_x = j.at("midline_x").get<double>();
  return g;
}

}  // namespace

void write_features(const fs::path& dir, const FeatureSet& f) {
  f.data.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, Errc::io, "cannot create " + dir.string() + ": " + ec.message());

  nlohmann::json j;
  j["kind"] = to_string(f.kind);
  j["task"] = to_string(f.task);
  j["parcellation_id"] = f.parcellation_id;
  j["regions"] = f.regions;
  j["sample_shape"] = f.data.sample_shape;
  j["grid"] = grid_json(f.grid);
  auto subs = nlohmann::json::array();
  const auto R = f.regions;
  for (std::size_t i = 0; i < f.data.size(); ++i) {
    nlohmann::json s{{"id", f.data.ids[i]}, {"label", f.data.y[i]}};
    const auto x = f.data.sample(i);
    if (f.kind == FeatureKind::fingerprint) {
      s["file"] = f.data.ids[i] + ".cvol";
      write_volume(dir / s["file"].get<std::string>(),
                   FingerprintVolume{f.grid, R, std::vector<float>(x.begin(), x.end())});
    } else if (f.kind == FeatureKind::matrix) {
      s["file"] = f.data.ids[i] + ".cvol";
      GridMeta g;
      g.dims = {R, R, 1};
      write_volume(dir / s["file"].get<std::string>(), RealVolume{g, 1, std::vector<float>(x.begin(), x.end())});
    }
    subs.push_back(std::move(s));
  }
  j["subjects"] = std::move(subs);
  if (f.kind == FeatureKind::fingerprint) write_volume(dir / "mask.cvol", f.mask);

  if (f.kind == FeatureKind::vector) {
    std::ofstream os(dir / "features.tsv");
    require(static_cast<bool>(os), Errc::io, "cannot write features.tsv");
    for (std::size_t i = 0; i < f.data.size(); ++i) {
      os << f.data.ids[i] << '\t' << fmt_double(f.data.y[i]);
      for (float v : f.data.sample(i)) os << '\t' << fmt_float(v);
      os << '\n';
    }
  }
  std::ofstream idx(dir / "features.json");
  require(static_cast<bool>(idx), Errc::io, "cannot write features.json");
  idx << j.dump(2) << '\n';
}

FeatureSet read_features(const fs::path& dir) {
  std::ifstream idx(dir / "features.json");
  require(static_cast<bool>(idx), Errc::io, "no features.json in " + dir.string());
  FeatureSet f;
  try {
    const auto j = nlohmann::json::parse(idx);
    f.kind = feature_kind_from_string(j.at("kind").get<std::string>());
    f.task = task_from_string(j.at("task").get<std::string>());
    f.parcellation_id = j.value("parcellation_id", std::string());
    f.regions = j.at("regions").get<int>();
    f.grid = grid_from(j.at("grid"));
    f.data.sample_shape = j.at("sample_shape").get<nn::Shape>();
    require(f.data.sample_shape == feature_shape(f.kind, f.regions, f.grid), Errc::format,
            "features.json sample_shape disagrees with its kind and region count");
    for (const auto& s : j.at("subjects")) {
      f.data.ids.push_back(s.at("id").get<std::string>());
      f.data.y.push_back(s.at("label").get<double>());
    }
    const auto width = f.data.sample_size();
    if (f.kind == FeatureKind::vector) {
      std::ifstream is(dir / "features.tsv");
      require(static_cast<bool>(is), Errc::io, "no features.tsv in " + dir.string());
      std::string line;
      std::size_t row = 0;
      while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tok;
        std::getline(ls, tok, '\t');
        require(row < f.data.size() && tok == f.data.ids[row], Errc::format,
                "features.tsv rows do not follow features.json");
        std::getline(ls, tok, '\t');
        std::size_t count = 0;
        while (std::getline(ls, tok, '\t')) {
          f.data.x.push_back(parse_number<float>(tok, "features.tsv"));
          ++count;
        }
        require(count == width, Errc::format, "features.tsv row has " + std::to_string(count) +
                                                  " values, expected " + std::to_string(width));
        ++row;
      }
      require(row == f.data.size(), Errc::format, "features.tsv is missing rows");
    } else {
      for (const auto& s : j.at("subjects")) {
        const auto path = dir / s.at("file").get<std::string>();
        if (f.kind == FeatureKind::fingerprint) {
          const auto v = read_fingerprint(path);
          require(v.meta == f.grid && v.channels == f.regions, Errc::shape, path.string() + " does not match the index");
          f.data.x.insert(f.data.x.end(), v.data.begin(), v.data.end());
        } else {
          const auto v = read_real(path);
          require(v.data.size() == width, Errc::shape, path.string() + " does not match the index");
          f.data.x.insert(f.data.x.end(), v.data.begin(), v.data.end());
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::format, "bad features.json in " + dir.string() + ": " + e.what());
  }
  f.mask = fs::exists(dir / "mask.cvol") ? read_mask(dir / "mask.cvol") : MaskVolume::filled(f.grid, true);
  f.data.validate();
  return f;
}

}  // namespace connectome

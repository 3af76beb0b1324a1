#include "connectome/volume_io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "connectome/error.hpp"
#include "le_io.hpp"

namespace connectome {

namespace fs = std::filesystem;
using detail::read_le;
using detail::write_le;

namespace {

constexpr const char* kMagic = "CVOL1";
// Header lines longer than this are treated as corrupt.
constexpr std::size_t kMaxHeader = 4096;

std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  require(res.ec == std::errc{} && res.ptr == s.data() + s.size(), Errc::format,
          "bad number in header: '" + s + "'");
  return v;
}

long long parse_int(const std::string& s) {
  long long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  require(res.ec == std::errc{} && res.ptr == s.data() + s.size(), Errc::format,
          "bad integer in header: '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

template <typename T>
std::array<T, 3> parse_triple(const std::string& s, bool integral) {
  auto parts = split(s, ',');
  require(parts.size() == 3, Errc::format, "expected three comma-separated values: '" + s + "'");
  std::array<T, 3> out{};
  for (int i = 0; i < 3; ++i) {
    if (integral) {
      const auto v = parse_int(parts[i]);
      require(v >= -(1LL << 31) && v < (1LL << 31), Errc::format, "header value out of range");
      out[i] = static_cast<T>(v);
    } else {
      out[i] = static_cast<T>(parse_double(parts[i]));
    }
  }
  return out;
}

const char* dtype_of(VolumeKind k) {
  switch (k) {
    case VolumeKind::mask: return "u8";
    case VolumeKind::label: return "i32";
    default: return "f32";
  }
}

std::string read_header_line(std::istream& is, const fs::path& path) {
  std::string line;
  char c;
  while (is.get(c)) {
    if (c == '\n') return line;
    line.push_back(c);
    require(line.size() <= kMaxHeader, Errc::format, "CVOL header too long in " + path.string());
  }
  fail(Errc::format, "missing CVOL header terminator in " + path.string());
}

VolumeHeader header_of(const Volume& v) {
  VolumeHeader h;
  h.kind = kind_of(v);
  std::visit(
      [&](const auto& vol) {
        using V = std::decay_t<decltype(vol)>;
        h.meta = vol.meta;
        if constexpr (std::is_same_v<V, BoldVolume>) {
          h.channels = vol.num_frames;
        } else if constexpr (std::is_same_v<V, FingerprintVolume> || std::is_same_v<V, RealVolume>) {
          h.channels = vol.channels;
        } else if constexpr (std::is_same_v<V, LabelVolume>) {
          h.channels = 1;
          h.regions = vol.num_regions;
        } else {
          h.channels = 1;
        }
      },
      v);
  return h;
}

}  // namespace

std::size_t VolumeHeader::element_size() const {
  switch (kind) {
    case VolumeKind::mask: return 1;
    default: return 4;
  }
}

const char* to_string(VolumeKind kind) {
  switch (kind) {
    case VolumeKind::mask: return "mask";
    case VolumeKind::label: return "label";
    case VolumeKind::bold: return "bold";
    case VolumeKind::fingerprint: return "fingerprint";
    case VolumeKind::real: return "real";
  }
  return "real";
}

VolumeKind volume_kind_from_string(const std::string& s) {
  static const std::map<std::string, VolumeKind> kinds{{"mask", VolumeKind::mask},
                                                       {"label", VolumeKind::label},
                                                       {"bold", VolumeKind::bold},
                                                       {"fingerprint", VolumeKind::fingerprint},
                                                       {"real", VolumeKind::real}};
  auto it = kinds.find(s);
  require(it != kinds.end(), Errc::format, "unknown volume kind '" + s + "'");
  return it->second;
}

VolumeKind kind_of(const Volume& v) {
  return static_cast<VolumeKind>(v.index());
}

std::string format_header(const VolumeHeader& h) {
  std::ostringstream os;
  os << kMagic << " kind=" << to_string(h.kind) << " dtype=" << dtype_of(h.kind)
     << " dims=" << h.meta.dims[0] << ',' << h.meta.dims[1] << ',' << h.meta.dims[2]
     << " channels=" << h.channels << " spacing=" << fmt_double(h.meta.spacing[0]) << ','
     << fmt_double(h.meta.spacing[1]) << ',' << fmt_double(h.meta.spacing[2])
     << " origin=" << fmt_double(h.meta.origin[0]) << ',' << fmt_double(h.meta.origin[1]) << ','
     << fmt_double(h.meta.origin[2]) << " midline_x=" << fmt_double(h.meta.midline_x);
  if (h.regions) os << " regions=" << *h.regions;
  return os.str();
}

VolumeHeader parse_header(const std::string& line) {
  auto tokens = split(line, ' ');
  require(!tokens.empty() && tokens[0] == kMagic, Errc::format, "bad magic, expected CVOL1");
  std::map<std::string, std::string> fields;
  for (std::size_t i = 1; i < tokens.size(); ++i) {
    if (tokens[i].empty()) continue;
    const auto eq = tokens[i].find('=');
    require(eq != std::string::npos, Errc::format, "malformed header token '" + tokens[i] + "'");
    fields[tokens[i].substr(0, eq)] = tokens[i].substr(eq + 1);
  }
  auto get = [&](const char* key) -> const std::string& {
    auto it = fields.find(key);
    require(it != fields.end(), Errc::format, std::string("header missing field '") + key + "'");
    return it->second;
  };

  VolumeHeader h;
  const auto& dtype = get("dtype");
  require(dtype == "u8" || dtype == "i32" || dtype == "f32", Errc::format,
          "unknown dtype '" + dtype + "'");
  if (auto it = fields.find("kind"); it != fields.end()) {
    h.kind = volume_kind_from_string(it->second);
  } else {
    h.kind = dtype == "u8" ? VolumeKind::mask : dtype == "i32" ? VolumeKind::label : VolumeKind::real;
  }
  require(dtype == std::string(dtype_of(h.kind)), Errc::format,
          "dtype " + dtype + " inconsistent with kind " + to_string(h.kind));
  h.meta.dims = parse_triple<int>(get("dims"), true);
  h.meta.spacing = parse_triple<double>(get("spacing"), false);
  h.meta.origin = parse_triple<double>(get("origin"), false);
  if (auto it = fields.find("midline_x"); it != fields.end()) h.meta.midline_x = parse_double(it->second);
  const auto channels = parse_int(get("channels"));
  require(channels >= 1 && channels < (1LL << 31), Errc::format, "channels must be >= 1");
  h.channels = static_cast<int>(channels);
  if (auto it = fields.find("regions"); it != fields.end()) {
    const auto r = parse_int(it->second);
    require(r >= 1 && r < (1LL << 31), Errc::format, "regions must be >= 1");
    h.regions = static_cast<int>(r);
  }
  h.meta.validate();
  if (h.kind == VolumeKind::mask || h.kind == VolumeKind::label)
    require(h.channels == 1, Errc::format, "mask and label volumes have exactly one channel");
  if (h.kind == VolumeKind::bold)
    require(h.channels >= 2, Errc::format, "BOLD volume needs at least 2 frames");
  return h;
}

void write_volume(const fs::path& path, const Volume& volume) {
  std::visit([](const auto& v) { v.validate(); }, volume);
  const auto header = header_of(volume);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(os), Errc::io, "cannot open " + path.string() + " for writing");
  os << format_header(header) << '\n';
  std::visit([&](const auto& v) { write_le(os, v.data); }, volume);
  os.flush();
  require(static_cast<bool>(os), Errc::io, "write failed for " + path.string());
}

VolumeHeader read_volume_header(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), Errc::io, "cannot open " + path.string());
  return parse_header(read_header_line(is, path));
}

Volume read_volume(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), Errc::io, "cannot open " + path.string());
  const auto h = parse_header(read_header_line(is, path));
  const std::size_t count = h.meta.voxel_count() * static_cast<std::size_t>(h.channels);

  Volume out;
  switch (h.kind) {
    case VolumeKind::mask: {
      MaskVolume m{h.meta, {}};
      read_le(is, m.data, count);
      for (auto& b : m.data) require(b <= 1, Errc::format, "mask values must be 0 or 1");
      out = std::move(m);
      break;
    }
    case VolumeKind::label: {
      LabelVolume l{h.meta, {}, 0};
      read_le(is, l.data, count);
      int max_label = 0;
      for (auto v : l.data) max_label = std::max(max_label, static_cast<int>(v));
      l.num_regions = h.regions.value_or(std::max(max_label, 1));
      l.validate(false);
      out = std::move(l);
      break;
    }
    case VolumeKind::bold: {
      BoldVolume b{h.meta, h.channels, {}};
      read_le(is, b.data, count);
      b.validate();
      out = std::move(b);
      break;
    }
    case VolumeKind::fingerprint: {
      FingerprintVolume f{h.meta, h.channels, {}};
      read_le(is, f.data, count);
      f.validate();
      out = std::move(f);
      break;
    }
    case VolumeKind::real: {
      RealVolume r{h.meta, h.channels, {}};
      read_le(is, r.data, count);
      r.validate();
      out = std::move(r);
      break;
    }
  }
  char extra;
  require(!is.get(extra), Errc::format, "trailing bytes after payload in " + path.string());
  return out;
}

namespace {
template <typename V>
V read_as(const fs::path& path, const char* what) {
  auto v = read_volume(path);
  auto* p = std::get_if<V>(&v);
  require(p != nullptr, Errc::format,
          path.string() + " is a " + to_string(kind_of(v)) + " volume, expected " + what);
  return std::move(*p);
}
}  // namespace

MaskVolume read_mask(const fs::path& path) { return read_as<MaskVolume>(path, "mask"); }
LabelVolume read_labels(const fs::path& path) { return read_as<LabelVolume>(path, "label"); }
BoldVolume read_bold(const fs::path& path) { return read_as<BoldVolume>(path, "bold"); }
FingerprintVolume read_fingerprint(const fs::path& path) {
  return read_as<FingerprintVolume>(path, "fingerprint");
}
RealVolume read_real(const fs::path& path) { return read_as<RealVolume>(path, "real"); }

// Manifests ------------------------------------------------------------------

const char* to_string(Task task) {
  return task == Task::classification ? "classification" : "regression";
}

Task task_from_string(const std::string& s) {
  if (s == "classification" || s == "cls") return Task::classification;
  if (s == "regression" || s == "reg") return Task::regression;
  fail(Errc::invalid_argument, "unknown task '" + s + "'");
}

namespace {

GridMeta grid_from_json(const nlohmann::json& j) {
  GridMeta g;
  g.dims = j.at("dims").get<std::array<int, 3>>();
  if (j.contains("spacing")) g.spacing = j.at("spacing").get<std::array<double, 3>>();
  if (j.contains("origin")) g.origin = j.at("origin").get<std::array<double, 3>>();
  g.midline_x = j.value("midline_x", 0.0);
  g.validate();
  return g;
}

nlohmann::json grid_to_json(const GridMeta& g) {
  return {{"dims", g.dims}, {"spacing", g.spacing}, {"origin", g.origin}, {"midline_x", g.midline_x}};
}

}  // namespace

void validate_manifest(const Manifest& m) {
  require(m.subjects.size() >= 2, Errc::format, "manifest needs at least 2 subjects");
  std::set<std::string> ids;
  bool has_pos = false, has_neg = false;
  for (const auto& s : m.subjects) {
    require(ids.insert(s.id).second, Errc::format, "duplicate subject id '" + s.id + "'");
    require(std::isfinite(s.label), Errc::format, "non-finite label for " + s.id);
    if (m.task == Task::classification) {
      require(s.label == 1.0 || s.label == -1.0, Errc::format,
              "classification labels must be +1 or -1 (subject " + s.id + ")");
      (s.label > 0 ? has_pos : has_neg) = true;
    }
  }
  if (m.task == Task::classification)
    require(has_pos && has_neg, Errc::format, "classification manifest contains a single class");
}

Manifest read_manifest(const fs::path& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), Errc::io, "cannot open manifest " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::format, "manifest parse error: " + std::string(e.what()));
  }

  Manifest m;
  try {
    m.task = task_from_string(j.at("task").get<std::string>());
    m.grid = grid_from_json(j.at("grid"));
    const auto base = path.parent_path();
    for (const auto& sj : j.at("subjects")) {
      SubjectRecord s;
      s.id = sj.at("id").get<std::string>();
      fs::path bold = sj.at("bold").get<std::string>();
      s.bold_path = bold.is_absolute() ? bold : base / bold;
      const bool has_label = sj.contains("label");
      const bool has_age = sj.contains("age");
      require(has_label != has_age, Errc::format,
              "subject " + s.id + " must carry exactly one of 'label' or 'age'");
      require(has_label == (m.task == Task::classification), Errc::format,
              "subject " + s.id + " label kind does not match manifest task");
      s.label = has_label ? sj.at("label").get<double>() : sj.at("age").get<double>();
      if (sj.contains("fd")) s.fd_series = sj.at("fd").get<std::vector<double>>();
      m.subjects.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::format, "manifest field error: " + std::string(e.what()));
  }
  validate_manifest(m);

  for (const auto& s : m.subjects) {
    require(fs::exists(s.bold_path), Errc::io, "missing BOLD file " + s.bold_path.string());
    const auto h = read_volume_header(s.bold_path);
    require(h.kind == VolumeKind::bold, Errc::format, s.bold_path.string() + " is not a BOLD volume");
    require(h.meta == m.grid, Errc::shape, "grid mismatch for subject " + s.id);
    if (s.fd_series)
      require(s.fd_series->size() == static_cast<std::size_t>(h.channels), Errc::format,
              "fd series length differs from frame count for " + s.id);
  }
  return m;
}

void write_manifest(const fs::path& path, const Manifest& m) {
  validate_manifest(m);
  nlohmann::json j;
  j["task"] = to_string(m.task);
  j["grid"] = grid_to_json(m.grid);
  j["subjects"] = nlohmann::json::array();
  for (const auto& s : m.subjects) {
    nlohmann::json sj{{"id", s.id}, {"bold", s.bold_path.generic_string()}};
    sj[m.task == Task::classification ? "label" : "age"] = s.label;
    if (s.fd_series) sj["fd"] = *s.fd_series;
    j["subjects"].push_back(std::move(sj));
  }
  std::ofstream os(path);
  require(static_cast<bool>(os), Errc::io, "cannot write manifest " + path.string());
  os << j.dump(2) << '\n';
}

}  // namespace connectome

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "connectome/volume.hpp"

namespace connectome {

/// CVOL on-disk format.
///
/// One UTF-8 header line of space-separated tokens, terminated by '\n':
///
///   CVOL1 kind=<k> dtype=<u8|i32|f32> dims=nx,ny,nz channels=C
///         spacing=sx,sy,sz origin=ox,oy,oz midline_x=m [regions=R]
///
/// The magic token comes first; the remaining key=value fields may appear in
/// any order. kind is one of mask, label, bold, fingerprint, real. The payload
/// follows immediately: nx*ny*nz*C little-endian values, x fastest, then y,
/// then z, then channel (frame for BOLD). Reals are written in shortest
/// round-trip decimal form.
enum class VolumeKind { mask, label, bold, fingerprint, real };

struct VolumeHeader {
  VolumeKind kind = VolumeKind::real;
  GridMeta meta;
  int channels = 1;
  std::optional<int> regions;

  std::size_t element_size() const;
  std::size_t payload_bytes() const { return meta.voxel_count() * channels * element_size(); }
};

const char* to_string(VolumeKind kind);
VolumeKind volume_kind_from_string(const std::string& s);
VolumeKind kind_of(const Volume& v);

std::string format_header(const VolumeHeader& h);
VolumeHeader parse_header(const std::string& line);

void write_volume(const std::filesystem::path& path, const Volume& volume);
Volume read_volume(const std::filesystem::path& path);
VolumeHeader read_volume_header(const std::filesystem::path& path);

MaskVolume read_mask(const std::filesystem::path& path);
LabelVolume read_labels(const std::filesystem::path& path);
BoldVolume read_bold(const std::filesystem::path& path);
FingerprintVolume read_fingerprint(const std::filesystem::path& path);
RealVolume read_real(const std::filesystem::path& path);

// Manifests ------------------------------------------------------------------

enum class Task { classification, regression };

const char* to_string(Task task);
Task task_from_string(const std::string& s);

struct SubjectRecord {
  std::string id;
  std::filesystem::path bold_path;
  /// Class in {-1, +1} for classification, age in years for regression.
  double label = 0.0;
  std::optional<std::vector<double>> fd_series;
};

struct Manifest {
  Task task = Task::classification;
  std::vector<SubjectRecord> subjects;
  GridMeta grid;
};

/// JSON manifest: {"task", "grid": {dims, spacing, origin, midline_x},
/// "subjects": [{"id", "bold", "label" | "age", "fd"?}]}. Relative bold paths
/// are resolved against the manifest directory; every BOLD header is checked
/// against the manifest grid.
Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);
void validate_manifest(const Manifest& manifest);

}  // namespace connectome

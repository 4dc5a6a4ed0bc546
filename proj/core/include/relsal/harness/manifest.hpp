#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "relsal/image_io.hpp"
#include "relsal/raster.hpp"

namespace relsal::harness {

inline constexpr int kDefaultObservers = 12;

/// One line of a manifest. Paths are resolved against the manifest's directory.
struct ManifestRecord {
  std::string id;
  std::filesystem::path image;
  std::filesystem::path agreement;
  std::filesystem::path instances;
  std::optional<int> count;
  int n_observers = kDefaultObservers;
};

struct DatasetManifest {
  std::filesystem::path source;
  std::vector<ManifestRecord> records;
};

/// An image with its annotations, in memory.
struct LabeledImage {
  std::string id;
  ImageData image;
  AgreementMap agreement;
  InstanceMap instances;
  std::optional<int> count;
};

/// Parses a JSON-lines manifest: one object per line with keys "id", "image",
/// "agreement", "instances" and optional "count" and "n_observers". Blank lines are
/// skipped. Every referenced file must exist and the three rasters of a record must
/// share dimensions. Throws IoError / ShapeError / RangeError naming the offending record.
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Writes records with paths relative to the manifest's directory where possible.
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRecord>& records);

LabeledImage load_record(const ManifestRecord& record);

}  // namespace relsal::harness

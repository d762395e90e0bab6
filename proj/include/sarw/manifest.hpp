#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sarw {

/// One dataset sample as listed in manifest.json.
struct ManifestEntry {
  std::string id;
  std::string vh;  // path relative to the dataset root
  std::string vv;
  std::vector<int> labels;  // multi-label indices; empty = unlabeled
  bool has_labels = false;
  std::string split;  // "train" | "val" | "test"
  std::string footprint;
  std::optional<bool> flood;
  std::string timestamp;
};

struct DatasetManifest {
  std::filesystem::path root;
  std::vector<ManifestEntry> entries;

  std::vector<const ManifestEntry*> split_entries(const std::string& split) const;
  size_t count_split(const std::string& split) const;
};

/// Loads and validates `manifest.json` under `root`. Checks id uniqueness,
/// split names, and that every referenced raster exists.
DatasetManifest scan_manifest(const std::filesystem::path& root);

/// Writes `manifest.json` for a generated dataset.
void save_manifest(const DatasetManifest& manifest);

}  // namespace sarw

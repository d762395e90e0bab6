#include "sarw/manifest.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "sarw/error.hpp"

namespace sarw {

using nlohmann::json;

std::vector<const ManifestEntry*> DatasetManifest::split_entries(const std::string& split) const {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : entries)
    if (e.split == split) out.push_back(&e);
  return out;
}

size_t DatasetManifest::count_split(const std::string& split) const {
  return split_entries(split).size();
}

DatasetManifest scan_manifest(const std::filesystem::path& root) {
  const auto path = root / "manifest.json";
  std::ifstream in(path);
  if (!in) throw DataError("manifest not found: " + path.string());

  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw DataError("malformed manifest " + path.string() + ": " + e.what());
  }

  if (!doc.is_object() || doc.value("version", 0) != 1)
    throw DataError("manifest " + path.string() + ": missing or unsupported version");
  if (!doc.contains("entries") || !doc["entries"].is_array())
    throw DataError("manifest " + path.string() + ": missing entries array");

  DatasetManifest manifest;
  manifest.root = root;
  std::set<std::string> seen_ids;
  static const std::set<std::string> kSplits = {"train", "val", "test"};

  for (const auto& j : doc["entries"]) {
    ManifestEntry e;
    try {
      e.id = j.at("id").get<std::string>();
      e.vh = j.at("vh").get<std::string>();
      e.vv = j.at("vv").get<std::string>();
      e.split = j.at("split").get<std::string>();
      if (j.contains("labels")) {
        e.labels = j["labels"].get<std::vector<int>>();
        e.has_labels = true;
      }
      if (j.contains("footprint")) e.footprint = j["footprint"].get<std::string>();
      if (j.contains("flood")) e.flood = j["flood"].get<bool>();
      if (j.contains("timestamp")) e.timestamp = j["timestamp"].get<std::string>();
    } catch (const json::exception& ex) {
      throw DataError("manifest entry malformed: " + std::string(ex.what()));
    }
    if (!kSplits.count(e.split))
      throw DataError("manifest entry '" + e.id + "': unknown split '" + e.split + "'");
    if (!seen_ids.insert(e.id).second)
      throw DataError("manifest has duplicate id '" + e.id + "'");
    for (const auto* rel : {&e.vh, &e.vv}) {
      const auto file = root / *rel;
      if (!std::filesystem::exists(file))
        throw DataError("manifest entry '" + e.id + "' references missing raster: " +
                        file.string());
    }
    manifest.entries.push_back(std::move(e));
  }
  return manifest;
}

void save_manifest(const DatasetManifest& manifest) {
  json entries = json::array();
  for (const auto& e : manifest.entries) {
    json j = {{"id", e.id}, {"vh", e.vh}, {"vv", e.vv}, {"split", e.split}};
    if (e.has_labels) j["labels"] = e.labels;
    if (!e.footprint.empty()) j["footprint"] = e.footprint;
    if (e.flood.has_value()) j["flood"] = *e.flood;
    if (!e.timestamp.empty()) j["timestamp"] = e.timestamp;
    entries.push_back(std::move(j));
  }
  const json doc = {{"version", 1}, {"entries", entries}};
  const auto path = manifest.root / "manifest.json";
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest: " + path.string());
  out << doc.dump(2) << "\n";
}

}  // namespace sarw

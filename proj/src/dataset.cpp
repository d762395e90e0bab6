#include "sarw/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "sarw/radiometry.hpp"
#include "sarw/tile_io.hpp"

namespace sarw {

namespace {

void scrub_channel(GridF& g, int* nan_count) {
  for (auto& x : g.v) {
    if (std::isnan(x)) {
      x = kDbClampMin;
      if (nan_count) ++*nan_count;
    }
  }
}

}  // namespace

SarPatch load_patch(const DatasetManifest& manifest, const ManifestEntry& entry,
                    LoadStats* stats) {
  SarPatch p;
  p.id = entry.id;
  p.vh_db = read_tile(manifest.root / entry.vh);
  p.vv_db = read_tile(manifest.root / entry.vv);
  if (!p.vh_db.same_shape(p.vv_db))
    throw DataError("patch '" + entry.id + "': channel dimensions differ (" +
                    std::to_string(p.vh_db.rows) + "x" + std::to_string(p.vh_db.cols) + " vs " +
                    std::to_string(p.vv_db.rows) + "x" + std::to_string(p.vv_db.cols) + ")");
  int nans = 0;
  scrub_channel(p.vh_db, &nans);
  scrub_channel(p.vv_db, &nans);
  if (stats) stats->nan_replaced += nans;
  clamp_db_inplace(p.vh_db);
  clamp_db_inplace(p.vv_db);
  return p;
}

const ManifestEntry& find_entry(const DatasetManifest& manifest, const std::string& id) {
  for (const auto& e : manifest.entries)
    if (e.id == id) return e;
  throw DataError("no manifest entry with id '" + id + "'");
}

namespace {

GridF resize_bilinear(const GridF& src, int target) {
  GridF dst(target, target);
  const double sy = static_cast<double>(src.rows) / target;
  const double sx = static_cast<double>(src.cols) / target;
  for (int r = 0; r < target; ++r) {
    // Pixel-center alignment; edge samples clamp to the border.
    double fy = (r + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(src.rows - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.rows - 1);
    const double wy = fy - y0;
    for (int c = 0; c < target; ++c) {
      double fx = (c + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(src.cols - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.cols - 1);
      const double wx = fx - x0;
      const double top = (1.0 - wx) * src.at(y0, x0) + wx * src.at(y0, x1);
      const double bot = (1.0 - wx) * src.at(y1, x0) + wx * src.at(y1, x1);
      dst.at(r, c) = static_cast<float>((1.0 - wy) * top + wy * bot);
    }
  }
  return dst;
}

}  // namespace

SarPatch resize_patch(const SarPatch& p, int target) {
  if (target < 1) throw ConfigError("resize_patch: target must be >= 1");
  p.check_consistent();
  if (target == p.height() && target == p.width()) return p;
  SarPatch out;
  out.id = p.id;
  out.vh_db = resize_bilinear(p.vh_db, target);
  out.vv_db = resize_bilinear(p.vv_db, target);
  return out;
}

namespace {

struct Welford {
  long long n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  double variance() const { return n > 1 ? m2 / static_cast<double>(n) : 0.0; }
};

}  // namespace

namespace {

StandardizationStats finish_stats(const Welford& vh, const Welford& vv,
                                  const std::string& what) {
  StandardizationStats stats;
  stats.mean_vh = vh.mean;
  stats.mean_vv = vv.mean;
  stats.std_vh = std::sqrt(vh.variance());
  stats.std_vv = std::sqrt(vv.variance());
  if (stats.std_vh <= 0.0 || stats.std_vv <= 0.0)
    throw DataError("compute_standardization: zero variance in " + what);
  return stats;
}

}  // namespace

StandardizationStats compute_standardization(const DatasetManifest& manifest,
                                             const std::string& split) {
  const auto entries = manifest.split_entries(split);
  if (entries.empty())
    throw DataError("compute_standardization: split '" + split + "' is empty");

  Welford vh, vv;
  for (const auto* e : entries) {
    const SarPatch p = load_patch(manifest, *e);
    for (float x : p.vh_db.v) vh.add(x);
    for (float x : p.vv_db.v) vv.add(x);
  }
  return finish_stats(vh, vv, "split '" + split + "'");
}

StandardizationStats compute_standardization(const std::vector<SarPatch>& patches) {
  if (patches.empty()) throw DataError("compute_standardization: empty patch set");
  Welford vh, vv;
  for (const auto& p : patches) {
    for (float x : p.vh_db.v) vh.add(x);
    for (float x : p.vv_db.v) vv.add(x);
  }
  return finish_stats(vh, vv, "patch set");
}

StandardizedPatch standardize(const SarPatch& p, const StandardizationStats& stats) {
  p.check_consistent();
  StandardizedPatch out;
  out.id = p.id;
  out.vh = GridF(p.height(), p.width());
  out.vv = GridF(p.height(), p.width());
  const double ivh = 1.0 / stats.std_vh;
  const double ivv = 1.0 / stats.std_vv;
  for (size_t i = 0; i < p.vh_db.v.size(); ++i) {
    out.vh.v[i] = static_cast<float>((p.vh_db.v[i] - stats.mean_vh) * ivh);
    out.vv.v[i] = static_cast<float>((p.vv_db.v[i] - stats.mean_vv) * ivv);
  }
  return out;
}

SarPatch unstandardize(const StandardizedPatch& p, const StandardizationStats& stats) {
  SarPatch out;
  out.id = p.id;
  out.vh_db = GridF(p.height(), p.width());
  out.vv_db = GridF(p.height(), p.width());
  for (size_t i = 0; i < p.vh.v.size(); ++i) {
    out.vh_db.v[i] = static_cast<float>(p.vh.v[i] * stats.std_vh + stats.mean_vh);
    out.vv_db.v[i] = static_cast<float>(p.vv.v[i] * stats.std_vv + stats.mean_vv);
  }
  return out;
}

double zero_coverage_fraction(const SarPatch& p) {
  p.check_consistent();
  if (p.vh_db.v.empty()) return 0.0;
  size_t zeros = 0;
  for (size_t i = 0; i < p.vh_db.v.size(); ++i)
    if (p.vh_db.v[i] == 0.0f || p.vv_db.v[i] == 0.0f) ++zeros;
  return static_cast<double>(zeros) / static_cast<double>(p.vh_db.v.size());
}

FloodPairSet build_flood_pairs(const DatasetManifest& manifest, const std::string& split) {
  // Group candidate members per footprint; members failing the zero-coverage
  // filter are dropped before pairing.
  std::map<std::string, std::vector<const ManifestEntry*>> footprints;
  for (const auto* e : manifest.split_entries(split)) {
    if (e->footprint.empty() || !e->flood.has_value()) continue;
    const SarPatch p = load_patch(manifest, *e);
    if (zero_coverage_fraction(p) >= 0.25) continue;
    footprints[e->footprint].push_back(e);
  }

  FloodPairSet out;
  for (auto& [footprint, members] : footprints) {
    std::sort(members.begin(), members.end(), [](const ManifestEntry* a, const ManifestEntry* b) {
      return std::tie(a->timestamp, a->id) < std::tie(b->timestamp, b->id);
    });
    bool any_reference = false;
    for (const auto* ref : members) {
      if (ref->flood.value()) continue;
      any_reference = true;
      for (const auto* other : members) {
        if (other == ref) continue;
        out.pairs.push_back({ref->id, other->id, other->flood.value()});
      }
    }
    if (!any_reference) ++out.skipped_footprints;
  }
  return out;
}

}  // namespace sarw

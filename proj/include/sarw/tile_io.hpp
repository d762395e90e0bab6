#pragma once

#include <filesystem>
#include <string>

#include "sarw/grid.hpp"

namespace sarw {

// Raster tile file: magic "SARW", format version u16 = 1, height u32,
// width u32 (little-endian), then height*width IEEE-754 float32
// little-endian values, row-major, dB units (weight tiles reuse the
// container with dimensionless values).

constexpr uint16_t kTileFormatVersion = 1;

/// Writes a single-channel raster tile.
void write_tile(const std::filesystem::path& path, const GridF& grid);

/// Reads a single-channel raster tile; throws DataError on malformed or
/// truncated files.
GridF read_tile(const std::filesystem::path& path);

}  // namespace sarw

#include "sarw/tile_io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "sarw/error.hpp"

namespace sarw {

namespace {

constexpr char kMagic[4] = {'S', 'A', 'R', 'W'};

void put_u16(std::string& buf, uint16_t v) {
  buf.push_back(static_cast<char>(v & 0xff));
  buf.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& buf, uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint16_t get_u16(const unsigned char* p) { return static_cast<uint16_t>(p[0] | (p[1] << 8)); }

uint32_t get_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

}  // namespace

void write_tile(const std::filesystem::path& path, const GridF& grid) {
  std::string header;
  header.append(kMagic, 4);
  put_u16(header, kTileFormatVersion);
  put_u32(header, static_cast<uint32_t>(grid.rows));
  put_u32(header, static_cast<uint32_t>(grid.cols));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open tile for writing: " + path.string());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));

  std::vector<char> payload(grid.v.size() * 4);
  for (size_t i = 0; i < grid.v.size(); ++i) {
    uint32_t bits;
    std::memcpy(&bits, &grid.v[i], 4);
    for (int b = 0; b < 4; ++b) payload[i * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
  }
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw IoError("short write on tile: " + path.string());
}

GridF read_tile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open tile: " + path.string());

  unsigned char header[14];
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  if (in.gcount() != sizeof(header))
    throw DataError("truncated tile header: " + path.string());
  if (std::memcmp(header, kMagic, 4) != 0)
    throw DataError("bad tile magic: " + path.string());
  const uint16_t version = get_u16(header + 4);
  if (version != kTileFormatVersion)
    throw DataError("unsupported tile format version " + std::to_string(version) + ": " +
                    path.string());
  const uint32_t rows = get_u32(header + 6);
  const uint32_t cols = get_u32(header + 10);
  if (rows == 0 || cols == 0 || static_cast<uint64_t>(rows) * cols > (1ull << 30))
    throw DataError("implausible tile dimensions in " + path.string());

  GridF grid(static_cast<int>(rows), static_cast<int>(cols));
  std::vector<unsigned char> payload(grid.v.size() * 4);
  in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  if (in.gcount() != static_cast<std::streamsize>(payload.size()))
    throw DataError("truncated tile payload: " + path.string());
  for (size_t i = 0; i < grid.v.size(); ++i) {
    const uint32_t bits = get_u32(payload.data() + i * 4);
    std::memcpy(&grid.v[i], &bits, 4);
  }
  return grid;
}

}  // namespace sarw

#include "sarw/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "sarw/error.hpp"
#include "sarw/sha256.hpp"

namespace sarw {

namespace {

constexpr char kMagic[4] = {'S', 'W', 'C', 'K'};

void put_u16(std::vector<uint8_t>& buf, uint16_t v) {
  buf.push_back(static_cast<uint8_t>(v & 0xff));
  buf.push_back(static_cast<uint8_t>(v >> 8));
}

void put_u32(std::vector<uint8_t>& buf, uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

uint16_t get_u16(const uint8_t* p) { return static_cast<uint16_t>(p[0] | (p[1] << 8)); }

uint32_t get_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

}  // namespace

const NamedBlob* CheckpointData::find(const std::string& name) const {
  for (const auto& b : blobs)
    if (b.name == name) return &b;
  return nullptr;
}

std::array<uint8_t, 32> config_fingerprint(const ModelConfig& cfg, ModelTask task) {
  return sha256(cfg.canonical_string() + ";task=" + task_name(task));
}

std::vector<uint8_t> checkpoint_bytes(const CheckpointData& data) {
  std::vector<uint8_t> buf;
  buf.insert(buf.end(), kMagic, kMagic + 4);
  put_u16(buf, kCheckpointVersion);
  buf.insert(buf.end(), data.fingerprint.begin(), data.fingerprint.end());
  for (const auto& blob : data.blobs) {
    if (blob.name.size() > 0xffff) throw IoError("checkpoint blob name too long");
    put_u16(buf, static_cast<uint16_t>(blob.name.size()));
    buf.insert(buf.end(), blob.name.begin(), blob.name.end());
    if (blob.shape.size() > 0xff) throw IoError("checkpoint blob rank too large");
    buf.push_back(static_cast<uint8_t>(blob.shape.size()));
    size_t numel = 1;
    for (int d : blob.shape) {
      put_u32(buf, static_cast<uint32_t>(d));
      numel *= static_cast<size_t>(d);
    }
    if (numel != blob.data.size()) throw IoError("checkpoint blob '" + blob.name + "' shape/data mismatch");
    for (float f : blob.data) {
      uint32_t bits;
      std::memcpy(&bits, &f, 4);
      put_u32(buf, bits);
    }
  }
  return buf;
}

void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data) {
  const auto buf = checkpoint_bytes(data);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("short write on checkpoint: " + path.string());
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  std::vector<uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  size_t pos = 0;
  auto need = [&](size_t n) {
    if (pos + n > buf.size()) throw DataError("truncated checkpoint: " + path.string());
  };
  need(4 + 2 + 32);
  if (std::memcmp(buf.data(), kMagic, 4) != 0)
    throw DataError("bad checkpoint magic: " + path.string());
  pos = 4;
  const uint16_t version = get_u16(buf.data() + pos);
  pos += 2;
  if (version != kCheckpointVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(version));

  CheckpointData data;
  std::memcpy(data.fingerprint.data(), buf.data() + pos, 32);
  pos += 32;

  while (pos < buf.size()) {
    need(2);
    const uint16_t name_len = get_u16(buf.data() + pos);
    pos += 2;
    need(name_len);
    NamedBlob blob;
    blob.name.assign(reinterpret_cast<const char*>(buf.data() + pos), name_len);
    pos += name_len;
    need(1);
    const uint8_t rank = buf[pos++];
    size_t numel = 1;
    for (int r = 0; r < rank; ++r) {
      need(4);
      const uint32_t d = get_u32(buf.data() + pos);
      pos += 4;
      blob.shape.push_back(static_cast<int>(d));
      numel *= d;
    }
    need(numel * 4);
    blob.data.resize(numel);
    for (size_t i = 0; i < numel; ++i) {
      const uint32_t bits = get_u32(buf.data() + pos);
      pos += 4;
      std::memcpy(&blob.data[i], &bits, 4);
    }
    data.blobs.push_back(std::move(blob));
  }
  return data;
}

NamedBlob encode_u64_blob(const std::string& name, const std::vector<uint64_t>& words) {
  // Each u64 becomes four float32 values holding 16-bit chunks, which are
  // exactly representable; the blob stays a plain float array on disk.
  NamedBlob blob;
  blob.name = name;
  blob.shape = {static_cast<int>(words.size()), 4};
  for (uint64_t w : words)
    for (int i = 0; i < 4; ++i)
      blob.data.push_back(static_cast<float>((w >> (16 * i)) & 0xffffull));
  return blob;
}

std::vector<uint64_t> decode_u64_blob(const NamedBlob& blob) {
  if (blob.shape.size() != 2 || blob.shape[1] != 4)
    throw DataError("blob '" + blob.name + "' is not a u64 vector");
  std::vector<uint64_t> words(static_cast<size_t>(blob.shape[0]), 0);
  for (size_t w = 0; w < words.size(); ++w)
    for (int i = 0; i < 4; ++i)
      words[w] |= static_cast<uint64_t>(static_cast<uint32_t>(blob.data[w * 4 + i])) << (16 * i);
  return words;
}

}  // namespace sarw

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "sarw/model.hpp"

namespace sarw {

// Checkpoint file: magic "SWCK", version u16, config-fingerprint 32 bytes,
// then length-prefixed named blobs (name: u16 length + UTF-8; shape: u8 rank
// + u32 dims; data: float32 little-endian). Parameters, optimizer moments,
// schedule position and rng state all travel as blobs.

constexpr uint16_t kCheckpointVersion = 1;

struct CheckpointData {
  std::array<uint8_t, 32> fingerprint{};
  std::vector<NamedBlob> blobs;

  const NamedBlob* find(const std::string& name) const;
};

std::array<uint8_t, 32> config_fingerprint(const ModelConfig& cfg, ModelTask task);

void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data);
CheckpointData read_checkpoint(const std::filesystem::path& path);

/// Serialized image of a checkpoint, for bit-exactness comparisons.
std::vector<uint8_t> checkpoint_bytes(const CheckpointData& data);

// Non-parameter state is stored as exact-in-float32 blobs.
NamedBlob encode_u64_blob(const std::string& name, const std::vector<uint64_t>& words);
std::vector<uint64_t> decode_u64_blob(const NamedBlob& blob);

}  // namespace sarw

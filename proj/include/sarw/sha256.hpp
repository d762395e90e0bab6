#pragma once

#include <array>
#include <cstdint>
#include <string>

namespace sarw {

/// SHA-256 digest of a byte string; used for config fingerprints.
std::array<uint8_t, 32> sha256(const std::string& bytes);

std::string hex_digest(const std::array<uint8_t, 32>& digest);

}  // namespace sarw

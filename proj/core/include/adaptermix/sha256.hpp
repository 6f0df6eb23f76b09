#pragma once

#include <cstddef>
#include <span>
#include <string>

namespace adaptermix {

/// SHA-256 of a byte range, lowercase hex.
std::string sha256_hex(const void* data, std::size_t len);

/// Digest of a double array's raw bytes (the freeze-verification fingerprint).
std::string sha256_hex(std::span<const double> values);

inline std::string sha256_hex(const std::string& s) {
  return sha256_hex(s.data(), s.size());
}

}  // namespace adaptermix

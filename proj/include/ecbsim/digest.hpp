#pragma once

#include <string>

namespace ecbsim {

/// Hex-encoded SHA-256 of `data`. Backs cache keys, config digests and run ids.
std::string sha256_hex(const std::string& data);

/// First `n` hex chars of the digest, for compact ids.
std::string short_digest(const std::string& data, size_t n = 12);

} // namespace ecbsim

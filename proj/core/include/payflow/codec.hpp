#pragma once

#include "payflow/common.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace payflow::codec {

std::string base64_encode(std::span<const std::uint8_t> data);
std::string base64_encode(std::string_view data);
/// nullopt on malformed input (bad length, bad alphabet, misplaced padding).
std::optional<Bytes> base64_decode(std::string_view text);

std::string hex_encode(std::span<const std::uint8_t> data);
std::optional<Bytes> hex_decode(std::string_view text);

inline Bytes to_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }
inline std::string to_string(std::span<const std::uint8_t> b) {
  return std::string(b.begin(), b.end());
}

/// SHA-256 digest as lowercase hex.
std::string sha256_hex(std::string_view data);

} // namespace payflow::codec

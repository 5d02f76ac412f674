#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace reachabc::codec {

std::string base64_encode(std::span<const std::uint8_t> bytes);
// Throws ErrorCode::corrupt_model on characters outside the alphabet.
std::vector<std::uint8_t> base64_decode(std::string_view text);

std::string sha256_hex(std::span<const std::uint8_t> bytes);

// Little-endian f32 packing (the host is little-endian on every supported
// target; the functions still spell out the byte order).
std::vector<std::uint8_t> pack_f32(std::span<const float> values);
std::vector<float> unpack_f32(std::span<const std::uint8_t> bytes);

}  // namespace reachabc::codec

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mrsynth/image.hpp"

namespace mrsynth {

// Pixel payloads on disk are Portable FloatMaps: ASCII header "Pf\n<w> <h>\n-1.0\n"
// followed by little-endian float32 rows stored bottom row first.
Image read_pfm(const std::filesystem::path& path);
void write_pfm(const std::filesystem::path& path, const Image& image);

/// Lossless 16-bit grayscale PNG of an image in [-1, 1]:
/// code = round((clamp(v, -1, 1) + 1) / 2 * 65535).
std::vector<std::uint8_t> encode_png_gray16(const Image& image);
/// Inverse of encode_png_gray16 (values mapped back to [-1, 1]).
Image decode_png_gray16(const std::vector<std::uint8_t>& bytes);

std::vector<std::uint8_t> encode_png_rgb8(const RgbImage& image);

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// Lower-case hex SHA-256.
std::string sha256_hex(const std::vector<std::uint8_t>& bytes);

}  // namespace mrsynth

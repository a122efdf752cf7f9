#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "surfreg/raster.hpp"

namespace surfreg {

// Lossless PNG codecs for the raster types used in recordings and the
// segmentation service payloads. Errors raise ErrorKind::Io / Format.

std::vector<std::uint8_t> encode_png_rgb8(const RgbImage& image);
std::vector<std::uint8_t> encode_png_gray8(const Raster<std::uint8_t>& image);
std::vector<std::uint8_t> encode_png_gray16(const Raster<std::uint16_t>& image);

RgbImage decode_png_rgb8(std::span<const std::uint8_t> bytes);
Raster<std::uint8_t> decode_png_gray8(std::span<const std::uint8_t> bytes);
Raster<std::uint16_t> decode_png_gray16(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(const std::string& text);

}  // namespace surfreg

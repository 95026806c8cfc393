#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace adaseg::raster {

// Headerless little-endian row-major rasters. Dimensions live elsewhere
// (dataset manifest, checkpoint index).

void write_f32(const std::filesystem::path& path, std::span<const float> values);
void write_u8(const std::filesystem::path& path, std::span<const std::uint8_t> values);

/// Reads exactly `count` float32 values; throws if the file size differs.
std::vector<float> read_f32(const std::filesystem::path& path, std::size_t count);
/// Reads exactly `count` bytes; throws if the file size differs.
std::vector<std::uint8_t> read_u8(const std::filesystem::path& path, std::size_t count);

/// Whole-file read, used for hashing and byte comparisons.
std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace adaseg::raster

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>

namespace vqa {

/// Binary PGM (P5, maxval 255).
void write_pgm(const std::filesystem::path& path, std::span<const std::uint8_t> pixels,
               std::int64_t width, std::int64_t height);

/// Min-max normalizes `values` to [0,255] and writes a PGM. A constant image
/// comes out all black.
void write_pgm_normalized(const std::filesystem::path& path, std::span<const float> values,
                          std::int64_t width, std::int64_t height);

}  // namespace vqa

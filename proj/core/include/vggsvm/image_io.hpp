#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace vggsvm {

/// 8-bit interleaved raster as decoded from disk (row-major, HWC).
struct Raster
{
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 0;  ///< 1 (gray) or 3 (RGB)
    std::vector<std::uint8_t> pixels;

    [[nodiscard]] std::uint8_t at(std::size_t y, std::size_t x, std::size_t c) const
    {
        return pixels[(y * width + x) * channels + c];
    }
};

/// Decodes a PNG or JPEG file (detected by signature, not extension).
/// Palette and 16-bit PNGs are reduced to 8-bit; alpha is dropped.
/// Throws RuntimeFailure naming the path on any decode error.
[[nodiscard]] Raster decode_image(const std::filesystem::path& path);

/// True when the file starts with a PNG or JPEG signature.
[[nodiscard]] bool looks_like_image(const std::filesystem::path& path);

void write_png(const std::filesystem::path& path, const Raster& raster);

}  // namespace vggsvm

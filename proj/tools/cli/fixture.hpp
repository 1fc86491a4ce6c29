#pragma once

#include <cstdint>
#include <filesystem>

namespace vggsvm::cli {

struct BlobFixtureSpec
{
    std::size_t per_class = 100;
    std::size_t side = 32;
    std::uint64_t seed = 0;
};

/// Writes a two-class grayscale PNG set under `root`: `bright/` images carry
/// a light Gaussian blob on a noisy mid-gray background, `dark/` images a
/// dark one. Deterministic in the spec.
void write_blob_fixture(const std::filesystem::path& root, const BlobFixtureSpec& spec);

}  // namespace vggsvm::cli

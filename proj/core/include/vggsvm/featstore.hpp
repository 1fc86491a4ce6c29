#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "vggsvm/dataset.hpp"

namespace vggsvm::featstore {

inline constexpr std::size_t kHeaderSize = 25;
/// Labels are stored as signed bytes holding -1 or +1.
inline constexpr std::int8_t kLabelsSigned = 1;

struct FeatureFileHeader
{
    std::uint64_t n = 0;
    std::uint64_t d = 0;
    std::int8_t label_encoding = kLabelsSigned;
    std::uint32_t checksum = 0;  ///< CRC-32 of the payload
};

/// "HFV1", u64 n, u64 d, i8 label encoding, u32 payload CRC-32, then n int8
/// labels and n*d row-major float32 values; little-endian.
/// Throws PreconditionError for invalid sets or values that are not finite
/// at float32.
[[nodiscard]] std::vector<std::uint8_t> encode(const dataset::LabeledFeatureSet& features);

/// Throws FormatError: BadMagic ("not a feature file"), Truncated
/// ("truncated payload"), ChecksumMismatch, or BadHeader.
[[nodiscard]] dataset::LabeledFeatureSet decode(std::span<const std::uint8_t> bytes);

[[nodiscard]] FeatureFileHeader read_header(std::span<const std::uint8_t> bytes);

/// Atomic write (temp file + rename).
void write(const dataset::LabeledFeatureSet& features, const std::filesystem::path& path);
[[nodiscard]] dataset::LabeledFeatureSet read(const std::filesystem::path& path);

}  // namespace vggsvm::featstore

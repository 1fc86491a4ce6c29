#include "vggsvm/featstore.hpp"

#include <cmath>
#include <limits>

#include "vggsvm/binary_io.hpp"
#include "vggsvm/error.hpp"

namespace vggsvm::featstore {

namespace {

constexpr std::string_view kMagic = "HFV1";

}  // namespace

std::vector<std::uint8_t> encode(const dataset::LabeledFeatureSet& features)
{
    features.validate();
    const auto n = features.size();
    const auto d = features.feature_dim();

    io::ByteWriter payload;
    for (auto y : features.labels) payload.i8(y);
    const auto values = features.vectors.data();
    for (std::size_t k = 0; k < values.size(); ++k)
    {
        const auto f = static_cast<float>(values[k]);
        if (!std::isfinite(f))
            throw PreconditionError("feature value at row " + std::to_string(k / d) + ", column " +
                                    std::to_string(k % d) + " is not representable as a finite float32");
        payload.f32(f);
    }

    io::ByteWriter w;
    w.magic(kMagic);
    w.u64(n);
    w.u64(d);
    w.i8(kLabelsSigned);
    w.u32(io::crc32(payload.buffer()));
    w.bytes(payload.buffer());
    return w.take();
}

FeatureFileHeader read_header(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() < 4 || io::ByteReader(bytes, "feature file").magic() != kMagic)
        throw FormatError(FormatError::Kind::BadMagic, "not a feature file (bad magic)");
    if (bytes.size() < kHeaderSize) throw FormatError(FormatError::Kind::Truncated, "feature file: truncated payload");
    io::ByteReader r(bytes, "feature file");
    r.bytes(4);
    FeatureFileHeader h;
    h.n = r.u64();
    h.d = r.u64();
    h.label_encoding = r.i8();
    h.checksum = r.u32();
    if (h.n == 0 || h.d == 0) throw FormatError(FormatError::Kind::BadHeader, "feature file: n and d must be at least 1");
    if (h.label_encoding != kLabelsSigned)
        throw FormatError(FormatError::Kind::BadHeader,
                          "feature file: unknown label encoding " + std::to_string(h.label_encoding));
    return h;
}

dataset::LabeledFeatureSet decode(std::span<const std::uint8_t> bytes)
{
    const auto h = read_header(bytes);
    const auto payload = bytes.subspan(kHeaderSize);
    constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
    if (h.d > (kMax - 1) / 4 || h.n > kMax / (1 + 4 * h.d))
        throw FormatError(FormatError::Kind::BadHeader, "feature file: dimensions overflow");
    const auto expected = h.n * (1 + 4 * h.d);
    if (payload.size() < expected) throw FormatError(FormatError::Kind::Truncated, "feature file: truncated payload");
    if (payload.size() > expected) throw FormatError(FormatError::Kind::BadHeader, "feature file: trailing bytes");
    if (io::crc32(payload) != h.checksum)
        throw FormatError(FormatError::Kind::ChecksumMismatch, "feature file: checksum mismatch (payload corrupted)");

    io::ByteReader r(payload, "feature file");
    dataset::LabeledFeatureSet set;
    set.labels.resize(h.n);
    for (auto& y : set.labels)
    {
        y = r.i8();
        if (y != 1 && y != -1) throw FormatError(FormatError::Kind::BadHeader, "feature file: label is not +/-1");
    }
    std::vector<double> values(h.n * h.d);
    for (auto& v : values)
    {
        v = static_cast<double>(r.f32());
        if (!std::isfinite(v)) throw FormatError(FormatError::Kind::BadHeader, "feature file: non-finite value");
    }
    set.vectors = Tensor({h.n, h.d}, std::move(values));
    return set;
}

void write(const dataset::LabeledFeatureSet& features, const std::filesystem::path& path)
{
    io::write_file_atomic(path, encode(features));
}

dataset::LabeledFeatureSet read(const std::filesystem::path& path)
{
    return decode(io::read_file(path));
}

}  // namespace vggsvm::featstore

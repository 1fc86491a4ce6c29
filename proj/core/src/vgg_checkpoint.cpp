#include <cmath>
#include <limits>

#include "vggsvm/binary_io.hpp"
#include "vggsvm/error.hpp"
#include "vggsvm/vgg.hpp"

namespace vggsvm::vgg {

namespace {

constexpr std::string_view kMagic = "HVGG";

Variant variant_from_code(std::uint8_t code)
{
    switch (code)
    {
        case 11: return Variant::Vgg11;
        case 13: return Variant::Vgg13;
        case 16: return Variant::Vgg16;
        case 19: return Variant::Vgg19;
        default: break;
    }
    throw FormatError(FormatError::Kind::BadHeader, "checkpoint names unknown VGG variant " + std::to_string(code));
}

std::uint32_t narrow32(std::size_t v)
{
    if (v > std::numeric_limits<std::uint32_t>::max()) throw PreconditionError("value too large for checkpoint field");
    return static_cast<std::uint32_t>(v);
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const VggModel& model, const CheckpointMeta& meta)
{
    const auto& c = model.config;
    io::ByteWriter w;
    w.magic(kMagic);
    w.u32(kCheckpointVersion);

    w.u8(static_cast<std::uint8_t>(c.variant));
    w.u32(narrow32(c.input_side));
    w.f64(c.channel_scale);
    w.u32(narrow32(c.input_channels));
    w.u32(narrow32(c.conv_plan.size()));
    for (auto token : c.conv_plan) w.u32(narrow32(token));
    for (auto width : c.fc_widths) w.u32(narrow32(width));
    w.u64(model.init_seed);

    w.u64(meta.split_seed);
    w.f64(meta.train_fraction);
    w.str(meta.class_names[0]);
    w.str(meta.class_names[1]);

    std::uint32_t tensors = 0;
    model.params.for_each([&](const Tensor&) { ++tensors; });
    w.u32(tensors);
    model.params.for_each([&](const Tensor& t) {
        w.u64(t.size());
        for (double v : t.data())
        {
            const auto f = static_cast<float>(v);
            if (!std::isfinite(f)) throw PreconditionError("refusing to save non-finite weights");
            w.f32(f);
        }
    });
    w.u32(io::crc32(w.buffer()));
    return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes)
{
    io::ByteReader r(bytes, "checkpoint");
    if (bytes.size() < 4 || r.magic() != kMagic)
        throw FormatError(FormatError::Kind::BadMagic, "not a VGG checkpoint file (bad magic)");
    const auto version = r.u32();
    if (version != kCheckpointVersion)
        throw FormatError(FormatError::Kind::UnsupportedVersion,
                          "unsupported checkpoint version " + std::to_string(version));

    // The trailing CRC covers everything before it, so tampering anywhere is
    // caught before any field is trusted.
    if (bytes.size() < 12) throw FormatError(FormatError::Kind::Truncated, "checkpoint: truncated payload");
    const auto body = bytes.first(bytes.size() - 4);
    io::ByteReader tail(bytes.last(4), "checkpoint");
    if (io::crc32(body) != tail.u32())
        throw FormatError(FormatError::Kind::ChecksumMismatch,
                          "checkpoint checksum mismatch (file truncated or corrupted)");
    r = io::ByteReader(body, "checkpoint");
    r.bytes(8);

    Checkpoint ck;
    auto& c = ck.model.config;
    c.variant = variant_from_code(r.u8());
    c.input_side = r.u32();
    c.channel_scale = r.f64();
    c.input_channels = r.u32();
    const auto plan_len = r.u32();
    if (plan_len > r.remaining() / 4) throw FormatError(FormatError::Kind::Truncated, "checkpoint: truncated payload");
    c.conv_plan.resize(plan_len);
    for (auto& token : c.conv_plan) token = r.u32();
    for (auto& width : c.fc_widths) width = r.u32();
    ck.model.init_seed = r.u64();

    ck.meta.split_seed = r.u64();
    ck.meta.train_fraction = r.f64();
    ck.meta.class_names[0] = r.str();
    ck.meta.class_names[1] = r.str();

    try
    {
        validate(c);
    }
    catch (const PreconditionError& e)
    {
        throw FormatError(FormatError::Kind::BadHeader, std::string("checkpoint config invalid: ") + e.what());
    }

    ck.model.params = allocate_params(c);
    std::uint32_t expected = 0;
    ck.model.params.for_each([&](const Tensor&) { ++expected; });
    if (r.u32() != expected) throw FormatError(FormatError::Kind::BadHeader, "checkpoint tensor count mismatch");

    ck.model.params.for_each([&](Tensor& t) {
        if (r.u64() != t.size()) throw FormatError(FormatError::Kind::BadHeader, "checkpoint tensor size mismatch");
        for (auto& v : t.data()) v = static_cast<double>(r.f32());
    });

    if (r.remaining() != 0) throw FormatError(FormatError::Kind::BadHeader, "checkpoint has trailing bytes");
    return ck;
}

void save_checkpoint(const std::filesystem::path& path, const VggModel& model, const CheckpointMeta& meta)
{
    io::write_file_atomic(path, encode_checkpoint(model, meta));
}

Checkpoint load_checkpoint(const std::filesystem::path& path)
{
    const auto bytes = io::read_file(path);
    return decode_checkpoint(bytes);
}

}  // namespace vggsvm::vgg

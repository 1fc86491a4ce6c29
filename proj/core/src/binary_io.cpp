#include "vggsvm/binary_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <system_error>

#include "vggsvm/error.hpp"

namespace vggsvm::io {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace {

template <typename T>
void append_raw(std::vector<std::uint8_t>& buf, T v)
{
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    buf.insert(buf.end(), raw, raw + sizeof(T));
}

template <typename T>
T load_raw(std::span<const std::uint8_t> b)
{
    T v;
    std::memcpy(&v, b.data(), sizeof(T));
    return v;
}

}  // namespace

void ByteWriter::bytes(std::span<const std::uint8_t> b)
{
    buf_.insert(buf_.end(), b.begin(), b.end());
}

void ByteWriter::magic(std::string_view four_chars)
{
    buf_.insert(buf_.end(), four_chars.begin(), four_chars.end());
}

void ByteWriter::u8(std::uint8_t v) { buf_.push_back(v); }
void ByteWriter::i8(std::int8_t v) { buf_.push_back(static_cast<std::uint8_t>(v)); }
void ByteWriter::u32(std::uint32_t v) { append_raw(buf_, v); }
void ByteWriter::u64(std::uint64_t v) { append_raw(buf_, v); }
void ByteWriter::f32(float v) { append_raw(buf_, v); }
void ByteWriter::f64(double v) { append_raw(buf_, v); }

void ByteWriter::str(std::string_view s)
{
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.insert(buf_.end(), s.begin(), s.end());
}

ByteReader::ByteReader(std::span<const std::uint8_t> data, std::string context)
    : data_(data), context_(std::move(context))
{
}

std::span<const std::uint8_t> ByteReader::take(std::size_t n)
{
    if (n > remaining())
        throw FormatError(FormatError::Kind::Truncated, context_ + ": truncated payload");
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
}

std::span<const std::uint8_t> ByteReader::bytes(std::size_t n) { return take(n); }

std::string ByteReader::magic()
{
    auto b = take(4);
    return {b.begin(), b.end()};
}

std::uint8_t ByteReader::u8() { return take(1)[0]; }
std::int8_t ByteReader::i8() { return static_cast<std::int8_t>(take(1)[0]); }
std::uint32_t ByteReader::u32() { return load_raw<std::uint32_t>(take(4)); }
std::uint64_t ByteReader::u64() { return load_raw<std::uint64_t>(take(8)); }
float ByteReader::f32() { return load_raw<float>(take(4)); }
double ByteReader::f64() { return load_raw<double>(take(8)); }

std::string ByteReader::str()
{
    const auto n = u32();
    auto b = take(n);
    return {b.begin(), b.end()};
}

std::uint32_t crc32(std::span<const std::uint8_t> data) noexcept
{
    uLong crc = ::crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed large buffers in chunks.
    constexpr std::size_t chunk = 1u << 30;
    for (std::size_t off = 0; off < data.size(); off += chunk)
    {
        const auto n = static_cast<uInt>(std::min(chunk, data.size() - off));
        crc = ::crc32(crc, data.data() + off, n);
    }
    return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw RuntimeFailure("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> data)
{
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw RuntimeFailure("cannot open " + tmp.string() + " for writing");
        out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
        out.flush();
        if (!out) throw RuntimeFailure("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec)
    {
        std::filesystem::remove(tmp, ec);
        throw RuntimeFailure("cannot rename into " + path.string());
    }
}

void write_text_atomic(const std::filesystem::path& path, std::string_view text)
{
    write_file_atomic(
        path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace vggsvm::io

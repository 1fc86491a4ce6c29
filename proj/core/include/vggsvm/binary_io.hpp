#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vggsvm::io {

/// Appends little-endian encoded values to a growable byte buffer.
class ByteWriter
{
public:
    void bytes(std::span<const std::uint8_t> b);
    void magic(std::string_view four_chars);
    void u8(std::uint8_t v);
    void i8(std::int8_t v);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void f32(float v);
    void f64(double v);
    void str(std::string_view s);  ///< u32 length prefix + raw bytes

    [[nodiscard]] const std::vector<std::uint8_t>& buffer() const noexcept { return buf_; }
    [[nodiscard]] std::vector<std::uint8_t> take() noexcept { return std::move(buf_); }
    [[nodiscard]] std::size_t size() const noexcept { return buf_.size(); }

private:
    std::vector<std::uint8_t> buf_;
};

/// Sequential little-endian decoder over a byte span. Running past the end
/// throws FormatError(Truncated) naming `context`.
class ByteReader
{
public:
    ByteReader(std::span<const std::uint8_t> data, std::string context);

    std::span<const std::uint8_t> bytes(std::size_t n);
    std::string magic();
    std::uint8_t u8();
    std::int8_t i8();
    std::uint32_t u32();
    std::uint64_t u64();
    float f32();
    double f64();
    std::string str();

    [[nodiscard]] std::size_t position() const noexcept { return pos_; }
    [[nodiscard]] std::size_t remaining() const noexcept { return data_.size() - pos_; }

private:
    std::span<const std::uint8_t> take(std::size_t n);

    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
    std::string context_;
};

[[nodiscard]] std::uint32_t crc32(std::span<const std::uint8_t> data) noexcept;

[[nodiscard]] std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

/// Writes to a sibling temp file and renames it over `path`, so readers
/// never observe a partially written file.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> data);
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

}  // namespace vggsvm::io

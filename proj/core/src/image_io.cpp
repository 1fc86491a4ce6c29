#include "vggsvm/image_io.hpp"

#include <jpeglib.h>
#include <png.h>

#include <array>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>

#include "vggsvm/error.hpp"

namespace vggsvm {

namespace {

using FilePtr = std::unique_ptr<std::FILE, decltype(&std::fclose)>;

FilePtr open_file(const std::filesystem::path& path, const char* mode)
{
    FilePtr f(std::fopen(path.c_str(), mode), &std::fclose);
    if (!f) throw RuntimeFailure("cannot open " + path.string());
    return f;
}

enum class Format
{
    Png,
    Jpeg,
    Unknown
};

Format sniff(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    std::array<unsigned char, 8> sig{};
    in.read(reinterpret_cast<char*>(sig.data()), sig.size());
    if (in.gcount() >= 8 && png_sig_cmp(sig.data(), 0, 8) == 0) return Format::Png;
    if (in.gcount() >= 3 && sig[0] == 0xFF && sig[1] == 0xD8 && sig[2] == 0xFF) return Format::Jpeg;
    return Format::Unknown;
}

Raster decode_png(const std::filesystem::path& path)
{
    auto file = open_file(path, "rb");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw RuntimeFailure("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info)
    {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw RuntimeFailure("libpng init failed");
    }

    // Nothing with a destructor may be live across setjmp/longjmp below;
    // the raster is allocated only after all header parsing succeeded.
    png_uint_32 width = 0;
    png_uint_32 height = 0;
    int color_type = 0;
    if (setjmp(png_jmpbuf(png)))
    {
        png_destroy_read_struct(&png, &info, nullptr);
        throw RuntimeFailure("corrupt PNG: " + path.string());
    }
    png_init_io(png, file.get());
    png_read_info(png, info);
    width = png_get_image_width(png, info);
    height = png_get_image_height(png, info);
    color_type = png_get_color_type(png, info);
    const int bit_depth = png_get_bit_depth(png, info);

    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color_type & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const auto channels = static_cast<std::size_t>(png_get_channels(png, info));
    const auto rowbytes = static_cast<std::size_t>(png_get_rowbytes(png, info));

    Raster raster;
    raster.width = width;
    raster.height = height;
    raster.channels = channels;
    std::vector<png_bytep> rows(height);
    volatile bool ok = (channels == 1 || channels == 3) && rowbytes == width * channels;
    if (ok)
    {
        raster.pixels.resize(static_cast<std::size_t>(height) * rowbytes);
        for (png_uint_32 y = 0; y < height; ++y) rows[y] = raster.pixels.data() + y * rowbytes;
        if (setjmp(png_jmpbuf(png))) ok = false;
        else png_read_image(png, rows.data());
    }
    png_destroy_read_struct(&png, &info, nullptr);
    if (!ok) throw RuntimeFailure("unsupported or corrupt PNG: " + path.string());
    return raster;
}

struct JpegErrorManager
{
    jpeg_error_mgr base;
    std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo)
{
    auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    std::longjmp(err->jump, 1);
}

Raster decode_jpeg(const std::filesystem::path& path)
{
    auto file = open_file(path, "rb");
    jpeg_decompress_struct cinfo{};
    JpegErrorManager jerr{};
    cinfo.err = jpeg_std_error(&jerr.base);
    jerr.base.error_exit = jpeg_error_exit;

    Raster raster;
    if (setjmp(jerr.jump))
    {
        jpeg_destroy_decompress(&cinfo);
        throw RuntimeFailure("corrupt JPEG: " + path.string());
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, file.get());
    jpeg_read_header(&cinfo, TRUE);
    if (cinfo.jpeg_color_space != JCS_GRAYSCALE) cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);

    raster.width = cinfo.output_width;
    raster.height = cinfo.output_height;
    raster.channels = static_cast<std::size_t>(cinfo.output_components);
    raster.pixels.resize(raster.width * raster.height * raster.channels);
    const std::size_t stride = raster.width * raster.channels;
    while (cinfo.output_scanline < cinfo.output_height)
    {
        JSAMPROW row = raster.pixels.data() + cinfo.output_scanline * stride;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    if (raster.channels != 1 && raster.channels != 3)
        throw RuntimeFailure("unsupported JPEG colour layout: " + path.string());
    return raster;
}

}  // namespace

bool looks_like_image(const std::filesystem::path& path)
{
    return sniff(path) != Format::Unknown;
}

Raster decode_image(const std::filesystem::path& path)
{
    switch (sniff(path))
    {
        case Format::Png: return decode_png(path);
        case Format::Jpeg: return decode_jpeg(path);
        case Format::Unknown: break;
    }
    throw RuntimeFailure("not a PNG or JPEG file: " + path.string());
}

void write_png(const std::filesystem::path& path, const Raster& raster)
{
    if (raster.channels != 1 && raster.channels != 3)
        throw PreconditionError("write_png supports 1 or 3 channels");
    if (raster.pixels.size() != raster.width * raster.height * raster.channels)
        throw PreconditionError("raster size mismatch");

    auto file = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info)
    {
        png_destroy_write_struct(&png, nullptr);
        throw RuntimeFailure("libpng init failed");
    }
    std::vector<png_bytep> rows(raster.height);
    const std::size_t stride = raster.width * raster.channels;
    for (std::size_t y = 0; y < raster.height; ++y)
        rows[y] = const_cast<png_bytep>(raster.pixels.data() + y * stride);

    if (setjmp(png_jmpbuf(png)))
    {
        png_destroy_write_struct(&png, &info);
        throw RuntimeFailure("PNG encode failed: " + path.string());
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(raster.width), static_cast<png_uint_32>(raster.height), 8,
                 raster.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace vggsvm

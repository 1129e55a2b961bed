#include "advtex/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>

#include <png.h>

#include "advtex/errors.hpp"

namespace advtex {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// Decoded 8-bit interleaved rows after libpng normalization to RGB8/RGBA8.
struct DecodedPng {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<unsigned char> bytes;
};

DecodedPng decode_png_file(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open PNG: " + path);

    unsigned char sig[8];
    if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        throw IoError("not a PNG file: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("libpng read-struct allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("libpng info-struct allocation failed");
    }

    DecodedPng out;
    std::vector<png_bytep> row_ptrs;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("corrupt PNG: " + path);
    }

    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    png_set_expand(png);          // palette -> rgb, low-bit gray -> 8-bit, tRNS -> alpha
    png_set_strip_16(png);        // 16-bit -> 8-bit
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.channels = static_cast<int>(png_get_channels(png, info));
    if (out.channels != 3 && out.channels != 4) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("unsupported PNG channel layout: " + path);
    }

    out.bytes.resize(static_cast<size_t>(out.width) * out.height * out.channels);
    row_ptrs.resize(out.height);
    for (int r = 0; r < out.height; ++r)
        row_ptrs[r] = out.bytes.data() + static_cast<size_t>(r) * out.width * out.channels;
    png_read_image(png, row_ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

void sink_to_vector(png_structp png, png_bytep data, png_size_t length) {
    auto* buf = static_cast<std::vector<unsigned char>*>(png_get_io_ptr(png));
    buf->insert(buf->end(), data, data + length);
}

std::vector<unsigned char> encode_rgb8(const unsigned char* rgb, int width, int height) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("libpng write-struct allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("libpng info-struct allocation failed");
    }

    std::vector<unsigned char> out;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG encode failed");
    }

    png_set_write_fn(png, &out, sink_to_vector, nullptr);
    png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int r = 0; r < height; ++r)
        png_write_row(png, const_cast<png_bytep>(rgb + static_cast<size_t>(r) * width * 3));
    png_write_end(png, info);
    png_destroy_write_struct(&png, &info);
    return out;
}

}  // namespace

uint8_t quantize_channel(double v) {
    const double clamped = std::clamp(v, 0.0, 1.0);
    // nearbyint under the default FE_TONEAREST mode rounds half to even.
    return static_cast<uint8_t>(std::nearbyint(clamped * 255.0));
}

ImageFrame read_png(const std::string& path) {
    DecodedPng dec = decode_png_file(path);
    Grid3 px(dec.height, dec.width, 3);
    for (int r = 0; r < dec.height; ++r)
        for (int c = 0; c < dec.width; ++c) {
            const unsigned char* p =
                dec.bytes.data() + (static_cast<size_t>(r) * dec.width + c) * dec.channels;
            for (int ch = 0; ch < 3; ++ch) px.at(r, c, ch) = p[ch] / 255.0;
        }
    return ImageFrame(std::move(px));
}

std::vector<unsigned char> encode_png(const ImageFrame& frame) {
    const int h = frame.height();
    const int w = frame.width();
    std::vector<unsigned char> rgb(static_cast<size_t>(h) * w * 3);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            for (int ch = 0; ch < 3; ++ch)
                rgb[(static_cast<size_t>(r) * w + c) * 3 + ch] =
                    quantize_channel(frame.pixels.at(r, c, ch));
    return encode_rgb8(rgb.data(), w, h);
}

void write_png(const ImageFrame& frame, const std::string& path) {
    std::vector<unsigned char> bytes = encode_png(frame);
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot write PNG: " + path);
    if (std::fwrite(bytes.data(), 1, bytes.size(), fp.get()) != bytes.size())
        throw IoError("short write: " + path);
}

Mask3 read_mask_png(const std::string& path) {
    DecodedPng dec = decode_png_file(path);
    Mask3 mask(dec.height, dec.width, 1);
    for (int r = 0; r < dec.height; ++r)
        for (int c = 0; c < dec.width; ++c) {
            const unsigned char* p =
                dec.bytes.data() + (static_cast<size_t>(r) * dec.width + c) * dec.channels;
            mask.set(r, c, 0, p[0] >= 128);
        }
    return mask;
}

void write_mask_png(const Mask3& mask, const std::string& path) {
    const int h = mask.height();
    const int w = mask.width();
    std::vector<unsigned char> rgb(static_cast<size_t>(h) * w * 3);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            const unsigned char v = mask.at(r, c, 0) ? 255 : 0;
            for (int ch = 0; ch < 3; ++ch)
                rgb[(static_cast<size_t>(r) * w + c) * 3 + ch] = v;
        }
    std::vector<unsigned char> bytes = encode_rgb8(rgb.data(), w, h);
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot write PNG: " + path);
    if (std::fwrite(bytes.data(), 1, bytes.size(), fp.get()) != bytes.size())
        throw IoError("short write: " + path);
}

}  // namespace advtex

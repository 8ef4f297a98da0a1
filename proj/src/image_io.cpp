#include "matte/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

namespace matte {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct PngBuffer {
    int height = 0, width = 0, channels = 0;
    std::vector<unsigned char> pixels;  // row-major, interleaved
};

// Decodes to 8-bit gray (want_color=false) or 8-bit RGB (want_color=true).
PngBuffer decode_png(const std::filesystem::path& path, bool want_color) {
    FilePtr f(std::fopen(path.string().c_str(), "rb"));
    if (!f) throw DataError("cannot open PNG '" + path.string() + "'");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("libpng allocation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("failed to decode PNG '" + path.string() + "'");
    }
    png_init_io(png, f.get());
    png_read_info(png, info);

    const int color = png_get_color_type(png, info);
    if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8)
        png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    if (want_color) {
        if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
            png_set_gray_to_rgb(png);
    } else {
        if (color != PNG_COLOR_TYPE_GRAY && color != PNG_COLOR_TYPE_GRAY_ALPHA) {
            png_destroy_read_struct(&png, &info, nullptr);
            throw DataError("expected a single-channel PNG: '" + path.string() + "'");
        }
    }
    png_read_update_info(png, info);

    PngBuffer out;
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.width = static_cast<int>(png_get_image_width(png, info));
    out.channels = want_color ? 3 : 1;
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    if (rowbytes != std::size_t(out.width) * out.channels) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("unexpected PNG row layout in '" + path.string() + "'");
    }
    out.pixels.resize(rowbytes * out.height);
    std::vector<png_bytep> rows(out.height);
    for (int y = 0; y < out.height; ++y) rows[y] = out.pixels.data() + std::size_t(y) * rowbytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

void encode_png(const std::filesystem::path& path, const unsigned char* pixels, int h, int w,
                int channels) {
    if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
    FilePtr f(std::fopen(path.string().c_str(), "wb"));
    if (!f) throw DataError("cannot write PNG '" + path.string() + "'");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw DataError("libpng allocation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw DataError("failed to encode PNG '" + path.string() + "'");
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, w, h, 8,
                 channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y)
        rows[y] = const_cast<png_bytep>(pixels + std::size_t(y) * w * channels);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

unsigned char to_byte(float v) {
    const float scaled = std::round(v * 255.0f);
    return static_cast<unsigned char>(std::clamp(scaled, 0.0f, 255.0f));
}

}  // namespace

Plane read_png_gray(const std::filesystem::path& path) {
    const PngBuffer buf = decode_png(path, /*want_color=*/false);
    Plane p(buf.height, buf.width);
    for (int y = 0; y < buf.height; ++y)
        for (int x = 0; x < buf.width; ++x)
            p(y, x) = buf.pixels[std::size_t(y) * buf.width + x] / 255.0f;
    return p;
}

void write_png_gray(const std::filesystem::path& path, const Plane& p) {
    const int h = int(p.rows()), w = int(p.cols());
    std::vector<unsigned char> pixels(std::size_t(h) * w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) pixels[std::size_t(y) * w + x] = to_byte(p(y, x));
    encode_png(path, pixels.data(), h, w, 1);
}

Image read_png_rgb(const std::filesystem::path& path) {
    const PngBuffer buf = decode_png(path, /*want_color=*/true);
    Image img(buf.height, buf.width);
    for (int y = 0; y < buf.height; ++y)
        for (int x = 0; x < buf.width; ++x) {
            const unsigned char* px = buf.pixels.data() + (std::size_t(y) * buf.width + x) * 3;
            img.r(y, x) = px[0] / 255.0f;
            img.g(y, x) = px[1] / 255.0f;
            img.b(y, x) = px[2] / 255.0f;
        }
    return img;
}

void write_png_rgb(const std::filesystem::path& path, const Image& img) {
    const int h = img.height(), w = img.width();
    if (int(img.g.rows()) != h || int(img.b.rows()) != h || int(img.g.cols()) != w ||
        int(img.b.cols()) != w)
        throw std::invalid_argument("write_png_rgb: channel size mismatch");
    std::vector<unsigned char> pixels(std::size_t(h) * w * 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            unsigned char* px = pixels.data() + (std::size_t(y) * w + x) * 3;
            px[0] = to_byte(img.r(y, x));
            px[1] = to_byte(img.g(y, x));
            px[2] = to_byte(img.b(y, x));
        }
    encode_png(path, pixels.data(), h, w, 3);
}

Plane read_png_rep(const std::filesystem::path& path) {
    const PngBuffer buf = decode_png(path, /*want_color=*/false);
    Plane p(buf.height, buf.width);
    for (int y = 0; y < buf.height; ++y)
        for (int x = 0; x < buf.width; ++x) {
            const unsigned char v = buf.pixels[std::size_t(y) * buf.width + x];
            if (v == 0)
                p(y, x) = 0.0f;
            else if (v == 128)
                p(y, x) = 0.5f;
            else if (v == 255)
                p(y, x) = 1.0f;
            else
                throw DataError("'" + path.string() + "' is not a trimap-valued PNG (sample " +
                                std::to_string(int(v)) + ")");
        }
    return p;
}

void write_png_rep(const std::filesystem::path& path, const Plane& rep) {
    const int h = int(rep.rows()), w = int(rep.cols());
    std::vector<unsigned char> pixels(std::size_t(h) * w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const float v = rep(y, x);
            unsigned char b;
            if (v == 0.0f)
                b = 0;
            else if (v == 0.5f)
                b = 128;
            else if (v == 1.0f)
                b = 255;
            else
                throw std::invalid_argument("write_png_rep: value " + std::to_string(v) +
                                            " outside {0, 0.5, 1}");
            pixels[std::size_t(y) * w + x] = b;
        }
    encode_png(path, pixels.data(), h, w, 1);
}

}  // namespace matte

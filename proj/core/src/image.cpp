#include "v4e/image.hpp"

#include <png.h>

#include <algorithm>
#include <cstdio>
#include <memory>

namespace v4e {

Mask Mask::dilated() const {
    Mask out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!at(y, x)) continue;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    int ny = y + dy, nx = x + dx;
                    if (ny >= 0 && ny < h && nx >= 0 && nx < w) out.at(ny, nx) = 1;
                }
        }
    return out;
}

double psnr(const Image& a, const Image& b, const Mask* mask, bool region_value) {
    if (!a.same_size(b)) throw std::invalid_argument("psnr: size mismatch");
    double se = 0.0;
    size_t n = 0;
    for (int y = 0; y < a.h; ++y)
        for (int x = 0; x < a.w; ++x) {
            if (mask && (mask->at(y, x) != 0) != region_value) continue;
            for (int c = 0; c < 3; ++c) {
                double d = a.at(y, x, c) - b.at(y, x, c);
                se += d * d;
            }
            n += 3;
        }
    if (n == 0) return std::numeric_limits<double>::infinity();
    return psnr_from_mse(se / static_cast<double>(n));
}

namespace {

uint8_t quantize(double v) {
    double q = std::clamp(v, 0.0, 1.0) * 255.0 + 0.5;
    return static_cast<uint8_t>(std::min(255.0, q));
}

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void write_png_bytes(const std::string& path, const std::vector<uint8_t>& bytes, int h, int w,
                     int channels) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw std::runtime_error("cannot open for write: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("libpng write failed: " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
                 channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(static_cast<size_t>(h));
    for (int y = 0; y < h; ++y)
        rows[static_cast<size_t>(y)] =
            const_cast<png_bytep>(bytes.data() + static_cast<size_t>(y) * w * channels);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

std::vector<uint8_t> read_png_bytes(const std::string& path, int& h, int& w, int& channels) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw std::runtime_error("cannot open for read: " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("libpng read failed: " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    // normalize to 8-bit RGB or gray
    png_set_strip_16(png);
    png_set_packing(png);
    if (png_get_color_type(png, info) == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (png_get_color_type(png, info) & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);
    h = static_cast<int>(png_get_image_height(png, info));
    w = static_cast<int>(png_get_image_width(png, info));
    channels = static_cast<int>(png_get_channels(png, info));
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("unsupported png channel count in " + path);
    }
    std::vector<uint8_t> bytes(static_cast<size_t>(h) * w * channels);
    std::vector<png_bytep> rows(static_cast<size_t>(h));
    for (int y = 0; y < h; ++y)
        rows[static_cast<size_t>(y)] = bytes.data() + static_cast<size_t>(y) * w * channels;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return bytes;
}

}  // namespace

void write_png(const std::string& path, const Image& img) {
    std::vector<uint8_t> bytes(static_cast<size_t>(img.h) * img.w * 3);
    for (size_t i = 0; i < bytes.size(); ++i) bytes[i] = quantize(img.px[i]);
    write_png_bytes(path, bytes, img.h, img.w, 3);
}

void write_png(const std::string& path, const Mask& mask) {
    std::vector<uint8_t> bytes(mask.px.size());
    for (size_t i = 0; i < bytes.size(); ++i) bytes[i] = mask.px[i] ? 255 : 0;
    write_png_bytes(path, bytes, mask.h, mask.w, 1);
}

Image read_png(const std::string& path) {
    int h = 0, w = 0, ch = 0;
    auto bytes = read_png_bytes(path, h, w, ch);
    Image img(h, w);
    if (ch == 3) {
        for (size_t i = 0; i < bytes.size(); ++i) img.px[i] = bytes[i] / 255.0;
    } else {
        for (size_t i = 0; i < bytes.size(); ++i) {
            double v = bytes[i] / 255.0;
            img.px[i * 3 + 0] = v;
            img.px[i * 3 + 1] = v;
            img.px[i * 3 + 2] = v;
        }
    }
    return img;
}

Mask read_png_mask(const std::string& path) {
    int h = 0, w = 0, ch = 0;
    auto bytes = read_png_bytes(path, h, w, ch);
    Mask m(h, w);
    for (size_t i = 0; i < m.px.size(); ++i) m.px[i] = bytes[i * static_cast<size_t>(ch)] >= 128 ? 1 : 0;
    return m;
}

}  // namespace v4e

#ifndef V4E_IMAGE_HPP
#define V4E_IMAGE_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace v4e {

// H x W x 3 image, values in [0,1], row-major, channel interleaved.
struct Image {
    int h = 0;
    int w = 0;
    std::vector<double> px;

    Image() = default;
    Image(int height, int width) : h(height), w(width), px(static_cast<size_t>(height) * width * 3, 0.0) {}

    double& at(int y, int x, int c) { return px[(static_cast<size_t>(y) * w + x) * 3 + c]; }
    double at(int y, int x, int c) const { return px[(static_cast<size_t>(y) * w + x) * 3 + c]; }

    bool same_size(const Image& o) const { return h == o.h && w == o.w; }
};

// H x W binary mask; nonzero marks the edit locus.
struct Mask {
    int h = 0;
    int w = 0;
    std::vector<uint8_t> px;

    Mask() = default;
    Mask(int height, int width) : h(height), w(width), px(static_cast<size_t>(height) * width, 0) {}

    uint8_t& at(int y, int x) { return px[static_cast<size_t>(y) * w + x]; }
    uint8_t at(int y, int x) const { return px[static_cast<size_t>(y) * w + x]; }

    size_t count() const {
        size_t n = 0;
        for (uint8_t v : px) n += v ? 1 : 0;
        return n;
    }
    bool all_ones() const { return count() == px.size(); }

    // 8-neighbourhood dilation by one pixel.
    Mask dilated() const;
};

// Fixed-length sequence of frames.
struct VideoClip {
    std::vector<Image> frames;

    int f() const { return static_cast<int>(frames.size()); }
    int h() const { return frames.empty() ? 0 : frames[0].h; }
    int w() const { return frames.empty() ? 0 : frames[0].w; }
};

// PSNR in dB over an optional mask region (mask_value selects which pixels
// count; 255 means all). Identical regions give +infinity.
double psnr(const Image& a, const Image& b, const Mask* mask = nullptr, bool region_value = true);

inline double psnr_from_mse(double mse) {
    if (mse <= 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

// 8-bit PNG IO (RGB for images, grayscale 0/255 for masks).
void write_png(const std::string& path, const Image& img);
void write_png(const std::string& path, const Mask& mask);
Image read_png(const std::string& path);
Mask read_png_mask(const std::string& path);

}  // namespace v4e

#endif

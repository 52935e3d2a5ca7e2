#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace gazegpt {

/// Interleaved 8-bit RGB image, row-major, origin top-left.
class Image {
public:
    Image() = default;
    Image(int width, int height, std::uint8_t r = 0, std::uint8_t g = 0, std::uint8_t b = 0);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    bool empty() const noexcept { return pixels_.empty(); }

    std::uint8_t* pixel(int x, int y) noexcept {
        return pixels_.data() + (static_cast<std::size_t>(y) * width_ + x) * 3;
    }
    const std::uint8_t* pixel(int x, int y) const noexcept {
        return pixels_.data() + (static_cast<std::size_t>(y) * width_ + x) * 3;
    }
    void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) noexcept {
        auto* p = pixel(x, y);
        p[0] = r;
        p[1] = g;
        p[2] = b;
    }
    void fill_rect(int x0, int y0, int x1, int y1, std::uint8_t r, std::uint8_t g, std::uint8_t b);

    std::span<const std::uint8_t> bytes() const noexcept { return pixels_; }
    std::span<std::uint8_t> bytes() noexcept { return pixels_; }

    bool operator==(const Image&) const = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> pixels_;
};

std::vector<std::uint8_t> encode_png(const Image& image);
Image decode_png(std::span<const std::uint8_t> data);
void write_png(const Image& image, const std::filesystem::path& path);
Image read_png(const std::filesystem::path& path);

}  // namespace gazegpt

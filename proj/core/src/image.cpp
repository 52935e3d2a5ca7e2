#include "gazegpt/image.hpp"

#include <png.h>

#include <algorithm>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include "gazegpt/error.hpp"

namespace gazegpt {

Image::Image(int width, int height, std::uint8_t r, std::uint8_t g, std::uint8_t b)
    : width_(width), height_(height) {
    if (width < 0 || height < 0) {
        throw DomainError("Image: negative dimensions");
    }
    pixels_.resize(static_cast<std::size_t>(width) * height * 3);
    for (std::size_t i = 0; i < pixels_.size(); i += 3) {
        pixels_[i] = r;
        pixels_[i + 1] = g;
        pixels_[i + 2] = b;
    }
}

void Image::fill_rect(int x0, int y0, int x1, int y1, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    x0 = std::max(x0, 0);
    y0 = std::max(y0, 0);
    x1 = std::min(x1, width_);
    y1 = std::min(y1, height_);
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            set(x, y, r, g, b);
        }
    }
}

std::vector<std::uint8_t> encode_png(const Image& image) {
    png_image desc{};
    desc.version = PNG_IMAGE_VERSION;
    desc.width = static_cast<png_uint_32>(image.width());
    desc.height = static_cast<png_uint_32>(image.height());
    desc.format = PNG_FORMAT_RGB;

    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&desc, nullptr, &size, 0, image.bytes().data(), 0, nullptr)) {
        throw std::runtime_error(std::string("encode_png: ") + desc.message);
    }
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&desc, out.data(), &size, 0, image.bytes().data(), 0, nullptr)) {
        throw std::runtime_error(std::string("encode_png: ") + desc.message);
    }
    out.resize(size);
    return out;
}

Image decode_png(std::span<const std::uint8_t> data) {
    png_image desc{};
    desc.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&desc, data.data(), data.size())) {
        throw std::runtime_error(std::string("decode_png: ") + desc.message);
    }
    desc.format = PNG_FORMAT_RGB;
    Image image(static_cast<int>(desc.width), static_cast<int>(desc.height));
    if (!png_image_finish_read(&desc, nullptr, image.bytes().data(), 0, nullptr)) {
        png_image_free(&desc);
        throw std::runtime_error(std::string("decode_png: ") + desc.message);
    }
    return image;
}

void write_png(const Image& image, const std::filesystem::path& path) {
    const auto bytes = encode_png(image);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("write_png: cannot open " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Image read_png(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw MissingAssetError(path.string());
    }
    std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return decode_png(bytes);
}

}  // namespace gazegpt

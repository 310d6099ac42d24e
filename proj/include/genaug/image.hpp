#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "genaug/errors.hpp"

namespace genaug {

// Fixed-size 8-bit RGB raster, interleaved row-major (r,g,b per pixel).
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(std::size_t h, std::size_t w);
  Image(std::size_t h, std::size_t w, std::vector<std::uint8_t> data);

  static constexpr std::size_t kChannels = 3;

  std::size_t size_bytes() const { return height * width * kChannels; }
  std::uint8_t& at(std::size_t y, std::size_t x, std::size_t c) {
    return pixels[(y * width + x) * kChannels + c];
  }
  std::uint8_t at(std::size_t y, std::size_t x, std::size_t c) const {
    return pixels[(y * width + x) * kChannels + c];
  }

  bool operator==(const Image& other) const = default;
};

std::uint8_t clamp_u8(double v);

// Bilinear resample of the source rectangle [x0, x0+cw) x [y0, y0+ch) to an
// out_h x out_w image, half-pixel-center convention. The rectangle must lie
// inside the image. Identity when the rectangle is the full frame at equal
// size.
Image resample_rect(const Image& img, std::size_t y0, std::size_t x0, std::size_t ch,
                    std::size_t cw, std::size_t out_h, std::size_t out_w);

Image bilinear_resize(const Image& img, std::size_t out_h, std::size_t out_w);

// RGB in [0,1] <-> HSV with hue in [0,1).
std::array<double, 3> rgb_to_hsv(double r, double g, double b);
std::array<double, 3> hsv_to_rgb(double h, double s, double v);

}  // namespace genaug

#include "genaug/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace genaug {

namespace {

void check_dims(std::size_t h, std::size_t w) {
  if (h < 8 || w < 8) {
    throw ShapeError("image must be at least 8x8, got " + std::to_string(h) + "x" +
                     std::to_string(w));
  }
}

}  // namespace

Image::Image(std::size_t h, std::size_t w) : height(h), width(w) {
  check_dims(h, w);
  pixels.assign(h * w * kChannels, 0);
}

Image::Image(std::size_t h, std::size_t w, std::vector<std::uint8_t> data)
    : height(h), width(w), pixels(std::move(data)) {
  check_dims(h, w);
  if (pixels.size() != h * w * kChannels) {
    throw ShapeError("image pixel buffer size mismatch");
  }
}

std::uint8_t clamp_u8(double v) {
  const double r = std::round(v);
  if (r <= 0.0) return 0;
  if (r >= 255.0) return 255;
  return static_cast<std::uint8_t>(r);
}

Image resample_rect(const Image& img, std::size_t y0, std::size_t x0, std::size_t ch,
                    std::size_t cw, std::size_t out_h, std::size_t out_w) {
  if (ch == 0 || cw == 0 || y0 + ch > img.height || x0 + cw > img.width) {
    throw ShapeError("resample_rect: rectangle outside image");
  }
  Image out(out_h, out_w);
  const double sy = static_cast<double>(ch) / static_cast<double>(out_h);
  const double sx = static_cast<double>(cw) / static_cast<double>(out_w);
  for (std::size_t oy = 0; oy < out_h; ++oy) {
    double fy = (static_cast<double>(oy) + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(ch - 1));
    const std::size_t iy = static_cast<std::size_t>(fy);
    const std::size_t iy1 = std::min(iy + 1, ch - 1);
    const double wy = fy - static_cast<double>(iy);
    for (std::size_t ox = 0; ox < out_w; ++ox) {
      double fx = (static_cast<double>(ox) + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(cw - 1));
      const std::size_t ix = static_cast<std::size_t>(fx);
      const std::size_t ix1 = std::min(ix + 1, cw - 1);
      const double wx = fx - static_cast<double>(ix);
      for (std::size_t c = 0; c < Image::kChannels; ++c) {
        const double v00 = img.at(y0 + iy, x0 + ix, c);
        const double v01 = img.at(y0 + iy, x0 + ix1, c);
        const double v10 = img.at(y0 + iy1, x0 + ix, c);
        const double v11 = img.at(y0 + iy1, x0 + ix1, c);
        const double top = v00 + (v01 - v00) * wx;
        const double bot = v10 + (v11 - v10) * wx;
        out.at(oy, ox, c) = clamp_u8(top + (bot - top) * wy);
      }
    }
  }
  return out;
}

Image bilinear_resize(const Image& img, std::size_t out_h, std::size_t out_w) {
  if (out_h == img.height && out_w == img.width) return img;
  return resample_rect(img, 0, 0, img.height, img.width, out_h, out_w);
}

std::array<double, 3> rgb_to_hsv(double r, double g, double b) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double d = mx - mn;
  double h = 0.0;
  if (d > 0.0) {
    if (mx == r) {
      h = (g - b) / d;
      if (h < 0.0) h += 6.0;
    } else if (mx == g) {
      h = (b - r) / d + 2.0;
    } else {
      h = (r - g) / d + 4.0;
    }
    h /= 6.0;
  }
  const double s = mx > 0.0 ? d / mx : 0.0;
  return {h, s, mx};
}

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
  h -= std::floor(h);  // wrap onto [0,1)
  const double hh = h * 6.0;
  const int sector = std::min(5, static_cast<int>(hh));
  const double f = hh - sector;
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - s * f);
  const double t = v * (1.0 - s * (1.0 - f));
  switch (sector) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

}  // namespace genaug

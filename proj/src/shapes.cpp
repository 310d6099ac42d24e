#include "genaug/shapes.hpp"

#include "genaug/errors.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace genaug {

namespace {

constexpr double kPi = std::numbers::pi;

struct Vec2 {
  double x, y;
};

// Even-odd point-in-polygon test.
bool inside_polygon(const std::vector<Vec2>& poly, double x, double y) {
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[j];
    if ((a.y > y) != (b.y > y) &&
        x < (b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x) {
      inside = !inside;
    }
  }
  return inside;
}

std::vector<Vec2> regular_polygon(int n, double radius, double phase) {
  std::vector<Vec2> poly(n);
  for (int i = 0; i < n; ++i) {
    const double a = phase + 2.0 * kPi * i / n;
    poly[i] = {radius * std::cos(a), radius * std::sin(a)};
  }
  return poly;
}

std::vector<Vec2> star_polygon(int points, double outer, double inner) {
  std::vector<Vec2> poly(2 * points);
  for (int i = 0; i < 2 * points; ++i) {
    const double r = (i % 2 == 0) ? outer : inner;
    const double a = kPi / 2.0 + kPi * i / points;
    poly[i] = {r * std::cos(a), r * std::sin(a)};
  }
  return poly;
}

bool inside_box(double x, double y, double cx, double cy, double hx, double hy) {
  return std::abs(x - cx) <= hx && std::abs(y - cy) <= hy;
}

bool inside_disc(double x, double y, double cx, double cy, double r) {
  const double dx = x - cx, dy = y - cy;
  return dx * dx + dy * dy <= r * r;
}

// Base shapes live in [-1,1]^2 before pose is applied.
bool inside_base_shape(int class_id, double x, double y) {
  static const std::vector<Vec2> kTriangle = regular_polygon(3, 0.9, kPi / 2.0);
  static const std::vector<Vec2> kPentagon = regular_polygon(5, 0.82, kPi / 2.0);
  static const std::vector<Vec2> kHexagon = regular_polygon(6, 0.8, 0.0);
  static const std::vector<Vec2> kStar = star_polygon(5, 0.92, 0.4);
  switch (class_id) {
    case 0:  // disc
      return inside_disc(x, y, 0, 0, 0.8);
    case 1: {  // ring
      const double r2 = x * x + y * y;
      return r2 <= 0.83 * 0.83 && r2 >= 0.47 * 0.47;
    }
    case 2:  // triangle
      return inside_polygon(kTriangle, x, y);
    case 3:  // square
      return inside_box(x, y, 0, 0, 0.62, 0.62);
    case 4:  // diamond
      return std::abs(x) + std::abs(y) <= 0.85;
    case 5:  // pentagon
      return inside_polygon(kPentagon, x, y);
    case 6:  // hexagon
      return inside_polygon(kHexagon, x, y);
    case 7:  // five-pointed star
      return inside_polygon(kStar, x, y);
    case 8:  // plus sign
      return inside_box(x, y, 0, 0, 0.8, 0.24) || inside_box(x, y, 0, 0, 0.24, 0.8);
    case 9:  // two horizontal bars
      return inside_box(x, y, 0, 0.37, 0.72, 0.18) ||
             inside_box(x, y, 0, -0.37, 0.72, 0.18);
    case 10:  // crescent
      return inside_disc(x, y, 0, 0, 0.78) && !inside_disc(x, y, 0.36, 0, 0.62);
    case 11:  // four dots
      return inside_disc(x, y, 0.45, 0.45, 0.27) ||
             inside_disc(x, y, -0.45, 0.45, 0.27) ||
             inside_disc(x, y, 0.45, -0.45, 0.27) ||
             inside_disc(x, y, -0.45, -0.45, 0.27);
    default:
      throw ConfigError("shape class id out of range: " + std::to_string(class_id));
  }
}

}  // namespace

std::size_t max_shape_classes() { return 12; }

const char* shape_class_name(int class_id) {
  static const char* kNames[] = {"disc",    "ring",    "triangle", "square",
                                 "diamond", "pentagon", "hexagon",  "star",
                                 "cross",   "two_bars", "crescent", "four_dots"};
  if (class_id < 0 || class_id >= static_cast<int>(max_shape_classes())) {
    throw ConfigError("shape class id out of range: " + std::to_string(class_id));
  }
  return kNames[class_id];
}

ShapeLatent draw_latent(int class_id, SampleRng& rng) {
  if (class_id < 0 || class_id >= static_cast<int>(max_shape_classes())) {
    throw ConfigError("shape class id out of range: " + std::to_string(class_id));
  }
  ShapeLatent latent;
  latent.class_id = class_id;
  // Rotation stays within +-0.35 rad so square and diamond remain distinct.
  latent.rotation = rng.uniform(-0.35, 0.35);
  latent.scale = rng.uniform(0.45, 0.85);
  latent.tx = rng.uniform(-0.15, 0.15);
  latent.ty = rng.uniform(-0.15, 0.15);
  // Foreground/background colors are rejection-sampled for contrast so shapes
  // stay visible under jitter and blur.
  for (int attempt = 0; attempt < 1000; ++attempt) {
    int dist = 0;
    for (std::size_t c = 0; c < 3; ++c) {
      latent.fg[c] = static_cast<std::uint8_t>(rng.uniform_int(256));
      latent.bg[c] = static_cast<std::uint8_t>(rng.uniform_int(256));
    }
    for (std::size_t c = 0; c < 3; ++c) {
      dist += std::abs(static_cast<int>(latent.fg[c]) - static_cast<int>(latent.bg[c]));
    }
    if (dist >= 240) break;
  }
  latent.texture_seed = rng.next_u64();
  return latent;
}

Image render_shape(const ShapeLatent& latent, std::size_t size) {
  if (size < 8) throw ShapeError("render_shape: size must be at least 8");
  Image out(size, size);
  const double cos_r = std::cos(latent.rotation);
  const double sin_r = std::sin(latent.rotation);

  // Shading direction and amplitude derive from the texture seed.
  const double shade_angle =
      2.0 * kPi * static_cast<double>(latent.texture_seed & 0xffff) / 65536.0;
  const double shade_amp =
      20.0 * static_cast<double>((latent.texture_seed >> 16) & 0xff) / 255.0;
  const double sdx = std::cos(shade_angle), sdy = std::sin(shade_angle);

  const double subs[2] = {0.25, 0.75};
  for (std::size_t py = 0; py < size; ++py) {
    for (std::size_t px = 0; px < size; ++px) {
      int hits = 0;
      for (double sy : subs) {
        for (double sx : subs) {
          const double u = 2.0 * (px + sx) / size - 1.0;
          const double v = 2.0 * (py + sy) / size - 1.0;
          // Inverse pose: translate, rotate back, unscale.
          const double dx = u - latent.tx;
          const double dy = v - latent.ty;
          const double bx = (cos_r * dx + sin_r * dy) / latent.scale;
          const double by = (-sin_r * dx + cos_r * dy) / latent.scale;
          if (inside_base_shape(latent.class_id, bx, by)) ++hits;
        }
      }
      const double coverage = hits / 4.0;
      const double u = 2.0 * (px + 0.5) / size - 1.0;
      const double v = 2.0 * (py + 0.5) / size - 1.0;
      const double shade = shade_amp * (u * sdx + v * sdy);
      for (std::size_t c = 0; c < 3; ++c) {
        const double fg = latent.fg[c] + shade;
        out.at(py, px, c) =
            clamp_u8(latent.bg[c] + coverage * (fg - latent.bg[c]));
      }
    }
  }
  return out;
}

Image oracle_regenerate(const ShapeLatent& latent, SampleRng& rng, std::size_t size) {
  return render_shape(draw_latent(latent.class_id, rng), size);
}

}  // namespace genaug

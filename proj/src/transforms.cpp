#include "genaug/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace genaug {

const char* transform_kind_name(TransformKind kind) {
  switch (kind) {
    case TransformKind::random_resized_crop: return "random_resized_crop";
    case TransformKind::color_jitter: return "color_jitter";
    case TransformKind::grayscale: return "grayscale";
    case TransformKind::gaussian_blur: return "gaussian_blur";
    case TransformKind::solarize: return "solarize";
    case TransformKind::horizontal_flip: return "horizontal_flip";
  }
  throw ConfigError("unknown transform kind");
}

TransformKind transform_kind_from_name(const std::string& name) {
  if (name == "random_resized_crop") return TransformKind::random_resized_crop;
  if (name == "color_jitter") return TransformKind::color_jitter;
  if (name == "grayscale") return TransformKind::grayscale;
  if (name == "gaussian_blur") return TransformKind::gaussian_blur;
  if (name == "solarize") return TransformKind::solarize;
  if (name == "horizontal_flip") return TransformKind::horizontal_flip;
  throw ConfigError("unknown transform kind: " + name);
}

void validate_transform(const TransformSpec& spec) {
  if (spec.prob < 0.0 || spec.prob > 1.0) {
    throw ConfigError("transform prob must be in [0,1]");
  }
  switch (spec.kind) {
    case TransformKind::random_resized_crop:
      if (!(spec.min_scale > 0.0) || spec.min_scale > spec.max_scale ||
          spec.max_scale > 1.0) {
        throw ConfigError("crop scales must satisfy 0 < min <= max <= 1");
      }
      break;
    case TransformKind::color_jitter:
      if (spec.brightness < 0.0 || spec.contrast < 0.0 || spec.saturation < 0.0 ||
          spec.hue < 0.0) {
        throw ConfigError("jitter strengths must be >= 0");
      }
      break;
    case TransformKind::gaussian_blur:
      if (!(spec.sigma_min > 0.0) || spec.sigma_min > spec.sigma_max) {
        throw ConfigError("blur sigma range must satisfy 0 < min <= max");
      }
      break;
    case TransformKind::solarize:
      if (spec.threshold < 0 || spec.threshold > 255) {
        throw ConfigError("solarize threshold must be in [0,255]");
      }
      break;
    default:
      break;
  }
}

// ---------------------------------------------------------------------------
// Random resized crop
// ---------------------------------------------------------------------------

CropRect choose_crop_rect(std::size_t height, std::size_t width, SampleRng& rng,
                          double min_scale, double max_scale) {
  const double area_px =
      rng.uniform(min_scale, max_scale) * static_cast<double>(height * width);
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double aspect = rng.uniform(3.0 / 4.0, 4.0 / 3.0);
    const auto cw = static_cast<std::size_t>(
        std::max(1.0, std::round(std::sqrt(area_px * aspect))));
    const auto ch = static_cast<std::size_t>(
        std::max(1.0, std::round(std::sqrt(area_px / aspect))));
    if (cw <= width && ch <= height) {
      CropRect r;
      r.w = cw;
      r.h = ch;
      r.x0 = rng.uniform_int(width - cw + 1);
      r.y0 = rng.uniform_int(height - ch + 1);
      return r;
    }
  }
  const auto side =
      static_cast<std::size_t>(std::max(1.0, std::round(std::sqrt(area_px))));
  if (side <= height && side <= width) {
    CropRect r;
    r.h = r.w = side;
    r.y0 = (height - side) / 2;
    r.x0 = (width - side) / 2;
    r.center_fallback = true;
    return r;
  }
  CropRect r;
  r.h = height;
  r.w = width;
  r.full_fallback = true;
  return r;
}

Image random_resized_crop(const Image& img, SampleRng& rng, double min_scale,
                          double max_scale, std::size_t out) {
  const CropRect r = choose_crop_rect(img.height, img.width, rng, min_scale, max_scale);
  return resample_rect(img, r.y0, r.x0, r.h, r.w, out, out);
}

// ---------------------------------------------------------------------------
// Color jitter
// ---------------------------------------------------------------------------

namespace {

double luminance(double r, double g, double b) {
  return 0.299 * r + 0.587 * g + 0.114 * b;
}

Image jitter_ungated(const Image& img, SampleRng& rng, double brightness,
                     double contrast, double saturation, double hue) {
  int order[4] = {0, 1, 2, 3};
  for (int i = 3; i > 0; --i) {
    const auto j = static_cast<int>(rng.uniform_int(static_cast<std::size_t>(i) + 1));
    std::swap(order[i], order[j]);
  }
  Image out = img;
  for (int op : order) {
    switch (op) {
      case 0:
        out = adjust_brightness(out, rng.uniform(std::max(0.0, 1.0 - brightness),
                                                 1.0 + brightness));
        break;
      case 1:
        out = adjust_contrast(out,
                              rng.uniform(std::max(0.0, 1.0 - contrast), 1.0 + contrast));
        break;
      case 2:
        out = adjust_saturation(
            out, rng.uniform(std::max(0.0, 1.0 - saturation), 1.0 + saturation));
        break;
      case 3:
        out = adjust_hue(out, rng.uniform(-hue, hue));
        break;
    }
  }
  return out;
}

}  // namespace

Image color_jitter(const Image& img, SampleRng& rng, double prob, double brightness,
                   double contrast, double saturation, double hue) {
  if (!rng.bernoulli(prob)) return img;
  return jitter_ungated(img, rng, brightness, contrast, saturation, hue);
}

Image adjust_brightness(const Image& img, double factor) {
  Image out = img;
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    out.pixels[i] = clamp_u8(img.pixels[i] * factor);
  }
  return out;
}

Image adjust_contrast(const Image& img, double factor) {
  double mean = 0.0;
  for (std::size_t i = 0; i < img.pixels.size(); i += 3) {
    mean += luminance(img.pixels[i], img.pixels[i + 1], img.pixels[i + 2]);
  }
  mean /= static_cast<double>(img.height * img.width);
  Image out = img;
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    out.pixels[i] = clamp_u8(mean + (img.pixels[i] - mean) * factor);
  }
  return out;
}

Image adjust_saturation(const Image& img, double factor) {
  Image out = img;
  for (std::size_t i = 0; i < out.pixels.size(); i += 3) {
    const double l = luminance(img.pixels[i], img.pixels[i + 1], img.pixels[i + 2]);
    for (std::size_t c = 0; c < 3; ++c) {
      out.pixels[i + c] = clamp_u8(l + (img.pixels[i + c] - l) * factor);
    }
  }
  return out;
}

Image adjust_hue(const Image& img, double shift) {
  Image out = img;
  for (std::size_t i = 0; i < out.pixels.size(); i += 3) {
    const auto hsv = rgb_to_hsv(img.pixels[i] / 255.0, img.pixels[i + 1] / 255.0,
                                img.pixels[i + 2] / 255.0);
    const auto rgb = hsv_to_rgb(hsv[0] + shift, hsv[1], hsv[2]);
    for (std::size_t c = 0; c < 3; ++c) out.pixels[i + c] = clamp_u8(rgb[c] * 255.0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gaussian blur
// ---------------------------------------------------------------------------

namespace {

// Mirror-with-edge reflection (..,1,0 | 0,1,..,n-1 | n-1,n-2,..): folds every
// kernel tap back onto the image, so a normalized kernel conserves total mass.
std::size_t reflect_index(long i, long n) {
  const long period = 2 * n;
  i = ((i % period) + period) % period;
  return static_cast<std::size_t>(i < n ? i : period - 1 - i);
}

}  // namespace

Image blur_with_sigma(const Image& img, double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("blur sigma must be positive");
  const long radius = static_cast<long>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double ksum = 0.0;
  for (long i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
    ksum += kernel[i + radius];
  }
  for (double& k : kernel) k /= ksum;

  const long h = static_cast<long>(img.height), w = static_cast<long>(img.width);
  std::vector<double> tmp(img.pixels.size());
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        double s = 0.0;
        for (long k = -radius; k <= radius; ++k) {
          s += kernel[k + radius] *
               img.at(static_cast<std::size_t>(y), reflect_index(x + k, w), c);
        }
        tmp[(y * w + x) * 3 + c] = s;
      }
    }
  }
  std::vector<double> blurred(img.pixels.size());
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        double s = 0.0;
        for (long k = -radius; k <= radius; ++k) {
          s += kernel[k + radius] *
               tmp[(reflect_index(y + k, h) * static_cast<std::size_t>(w) +
                    static_cast<std::size_t>(x)) * 3 + c];
        }
        blurred[(y * w + x) * 3 + c] = s;
      }
    }
  }

  // Error-diffused quantization: the per-channel residual is carried forward
  // so the rounded image keeps the exact channel sums (within half a count).
  Image out(img.height, img.width);
  double carry[3] = {0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < blurred.size(); i += 3) {
    for (std::size_t c = 0; c < 3; ++c) {
      const double v = blurred[i + c] + carry[c];
      const std::uint8_t q = clamp_u8(v);
      carry[c] = v - q;
      out.pixels[i + c] = q;
    }
  }
  return out;
}

Image gaussian_blur(const Image& img, SampleRng& rng, double prob, double sigma_min,
             double sigma_max) {
  if (!(sigma_min > 0.0) || sigma_min > sigma_max) {
    throw ConfigError("blur sigma range must satisfy 0 < min <= max");
  }
  if (!rng.bernoulli(prob)) return img;
  return blur_with_sigma(img, rng.uniform(sigma_min, sigma_max));
}

// ---------------------------------------------------------------------------
// Simple transforms
// ---------------------------------------------------------------------------

Image to_grayscale(const Image& img) {
  Image out = img;
  for (std::size_t i = 0; i < out.pixels.size(); i += 3) {
    const std::uint8_t l =
        clamp_u8(luminance(img.pixels[i], img.pixels[i + 1], img.pixels[i + 2]));
    out.pixels[i] = out.pixels[i + 1] = out.pixels[i + 2] = l;
  }
  return out;
}

Image solarize_image(const Image& img, int threshold) {
  Image out = img;
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    if (img.pixels[i] >= threshold) {
      out.pixels[i] = static_cast<std::uint8_t>(255 - img.pixels[i]);
    }
  }
  return out;
}

Image flip_horizontal(const Image& img) {
  Image out(img.height, img.width);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
      }
    }
  }
  return out;
}

Image apply_simple_transform(TransformKind kind, const Image& img, SampleRng& rng,
                             double prob, int solarize_threshold) {
  if (!rng.bernoulli(prob)) return img;
  switch (kind) {
    case TransformKind::grayscale: return to_grayscale(img);
    case TransformKind::solarize: return solarize_image(img, solarize_threshold);
    case TransformKind::horizontal_flip: return flip_horizontal(img);
    default:
      throw ConfigError("apply_simple_transform: not a simple transform kind");
  }
}

Image apply_transform(const TransformSpec& spec, const Image& img, SampleRng& rng,
                      std::size_t out_size, bool* fired) {
  const bool fire = rng.bernoulli(spec.prob);
  if (fired) *fired = fire;
  if (!fire) return img;
  switch (spec.kind) {
    case TransformKind::random_resized_crop:
      return random_resized_crop(img, rng, spec.min_scale, spec.max_scale, out_size);
    case TransformKind::color_jitter:
      return jitter_ungated(img, rng, spec.brightness, spec.contrast, spec.saturation,
                            spec.hue);
    case TransformKind::gaussian_blur:
      return blur_with_sigma(img, rng.uniform(spec.sigma_min, spec.sigma_max));
    case TransformKind::grayscale:
      return to_grayscale(img);
    case TransformKind::solarize:
      return solarize_image(img, spec.threshold);
    case TransformKind::horizontal_flip:
      return flip_horizontal(img);
  }
  throw ConfigError("unknown transform kind");
}

}  // namespace genaug

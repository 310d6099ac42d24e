#pragma once

#include <cstdint>

#include "genaug/image.hpp"
#include "genaug/rng.hpp"

namespace genaug {

enum class TransformKind {
  random_resized_crop,
  color_jitter,
  grayscale,
  gaussian_blur,
  solarize,
  horizontal_flip,
};

const char* transform_kind_name(TransformKind kind);
TransformKind transform_kind_from_name(const std::string& name);

struct TransformSpec {
  TransformKind kind = TransformKind::random_resized_crop;
  double prob = 1.0;
  // random_resized_crop
  double min_scale = 0.08;
  double max_scale = 1.0;
  // color_jitter strengths
  double brightness = 0.0;
  double contrast = 0.0;
  double saturation = 0.0;
  double hue = 0.0;
  // gaussian_blur sigma range
  double sigma_min = 0.1;
  double sigma_max = 2.0;
  // solarize
  int threshold = 128;

  bool operator==(const TransformSpec&) const = default;
};

void validate_transform(const TransformSpec& spec);

// ---------------------------------------------------------------------------
// Parameterized transforms. Each gated transform consumes rng draws in a
// fixed order, so identical seed material gives identical outputs.
// ---------------------------------------------------------------------------

// The crop rectangle chosen by random_resized_crop: the area fraction is drawn
// once from [min_scale, max_scale]; aspect in [3/4, 4/3] is rejection-sampled
// up to 10 attempts, then a center crop of the same area, then the full frame.
struct CropRect {
  std::size_t y0 = 0, x0 = 0, h = 0, w = 0;
  bool center_fallback = false;
  bool full_fallback = false;
};
CropRect choose_crop_rect(std::size_t height, std::size_t width, SampleRng& rng,
                          double min_scale, double max_scale);

Image random_resized_crop(const Image& img, SampleRng& rng, double min_scale,
                          double max_scale, std::size_t out);

Image color_jitter(const Image& img, SampleRng& rng, double prob, double brightness,
                   double contrast, double saturation, double hue);

Image gaussian_blur(const Image& img, SampleRng& rng, double prob, double sigma_min,
                    double sigma_max);

// kind must be grayscale, solarize, or horizontal_flip.
Image apply_simple_transform(TransformKind kind, const Image& img, SampleRng& rng,
                             double prob, int solarize_threshold = 128);

// Full dispatcher used by the pipeline; reports whether the gate fired.
Image apply_transform(const TransformSpec& spec, const Image& img, SampleRng& rng,
                      std::size_t out_size, bool* fired = nullptr);

// ---------------------------------------------------------------------------
// Ungated kernels (deterministic given their parameters).
// ---------------------------------------------------------------------------

Image adjust_brightness(const Image& img, double factor);
Image adjust_contrast(const Image& img, double factor);
Image adjust_saturation(const Image& img, double factor);
Image adjust_hue(const Image& img, double shift);  // shift in hue-circle turns
Image blur_with_sigma(const Image& img, double sigma);
Image to_grayscale(const Image& img);
Image solarize_image(const Image& img, int threshold);
Image flip_horizontal(const Image& img);

}  // namespace genaug

#pragma once

#include <array>
#include <cstdint>

#include "genaug/image.hpp"
#include "genaug/rng.hpp"

namespace genaug {

// A procedural image is fully determined by its latent: class id fixes the
// shape family, the rest is pose and appearance. Regeneration keeps the class
// and redraws everything else, so label preservation holds by construction.
struct ShapeLatent {
  int class_id = 0;
  double rotation = 0.0;  // radians
  double scale = 1.0;
  double tx = 0.0, ty = 0.0;
  std::array<std::uint8_t, 3> fg{255, 255, 255};
  std::array<std::uint8_t, 3> bg{0, 0, 0};
  std::uint64_t texture_seed = 0;

  bool operator==(const ShapeLatent&) const = default;
};

std::size_t max_shape_classes();
const char* shape_class_name(int class_id);

// Fresh pose and appearance for the given class.
ShapeLatent draw_latent(int class_id, SampleRng& rng);

// Deterministic rasterization of a latent (2x2 supersampled coverage).
Image render_shape(const ShapeLatent& latent, std::size_t size);

// Same class id, freshly drawn pose/appearance.
Image oracle_regenerate(const ShapeLatent& latent, SampleRng& rng, std::size_t size);

}  // namespace genaug

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "genaug/image.hpp"
#include "genaug/shapes.hpp"

namespace genaug {

enum class Split : std::uint8_t { train = 0, eval = 1 };

struct LabeledDataset {
  std::vector<Image> images;
  std::vector<int> labels;
  std::vector<ShapeLatent> latents;
  Split split = Split::train;
  std::size_t n_classes = 0;

  std::size_t size() const { return images.size(); }
};

// Procedural shapes dataset; sample i belongs to class i % n_classes and its
// latent comes from a per-sample stream of `seed`, so any subset regenerates
// identically regardless of dataset size.
LabeledDataset make_shapes_dataset(std::size_t n_classes, std::size_t n_per_class,
                                   std::size_t size, std::uint64_t seed,
                                   Split split = Split::train);

void save_dataset(const LabeledDataset& ds, const std::filesystem::path& path);
LabeledDataset load_dataset(const std::filesystem::path& path);

}  // namespace genaug

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <unordered_map>
#include <vector>

#include "genaug/dataset.hpp"
#include "genaug/image.hpp"
#include "genaug/rng.hpp"
#include "genaug/shapes.hpp"

namespace genaug {

// Renders one variant for a source, given its latent and a per-variant stream.
using VariantGenerator = std::function<Image(const ShapeLatent&, SampleRng&)>;

// K pre-generated variants per source image, keyed by source id. Variants for
// one source are stored contiguously; the bank is read-only after build/load.
class SampleBank {
 public:
  SampleBank() = default;
  SampleBank(std::uint32_t k, std::vector<std::uint64_t> ids,
             std::vector<Image> variants);

  std::uint32_t k() const { return k_; }
  std::size_t n_sources() const { return ids_.size(); }
  std::size_t n_variants() const { return variants_.size(); }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  const std::vector<std::uint64_t>& ids() const { return ids_; }

  bool contains(std::uint64_t source_id) const {
    return index_.count(source_id) != 0;
  }

  // k-th stored variant of a source; MissingVariantError on unknown id.
  const Image& variant(std::uint64_t source_id, std::uint32_t which) const;

 private:
  std::uint32_t k_ = 0;
  std::size_t height_ = 0, width_ = 0;
  std::vector<std::uint64_t> ids_;
  std::unordered_map<std::uint64_t, std::size_t> index_;  // id -> first variant
  std::vector<Image> variants_;
};

// Generates K variants per source with seeds derived from (seed, source id,
// variant index), so the result is independent of iteration order and safe to
// parallelize across sources (honors GENAUG_THREADS).
SampleBank build_bank(const LabeledDataset& dataset, const VariantGenerator& generator,
                      std::uint32_t k, std::uint64_t seed);

// Uniform draw among the K variants of a source.
const Image& sample_variant(const SampleBank& bank, std::uint64_t source_id,
                            SampleRng& rng);

void save_bank(const SampleBank& bank, const std::filesystem::path& path);
SampleBank load_bank(const std::filesystem::path& path);

// Reads a bank produced by an external generator: a JSON manifest
// {"k": int, "sources": [{"id": int, "variants": [paths...]}]} with image
// paths resolved relative to the manifest's directory.
SampleBank import_bank(const std::filesystem::path& manifest_path);

}  // namespace genaug

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "genaug/image.hpp"
#include "genaug/rng.hpp"
#include "genaug/samplebank.hpp"
#include "genaug/transforms.hpp"

namespace genaug {

enum class GenerativeOnView : std::uint8_t { both_views = 0, view1_only = 1 };

const char* generative_on_view_name(GenerativeOnView v);
GenerativeOnView generative_on_view_from_name(const std::string& name);

// Two-view augmentation recipe: an optional generative substitution slot in
// front, then each view's transform list in order, then a resize to
// output_size if the image is not already there.
struct PipelineSpec {
  double p0 = 0.0;
  GenerativeOnView on_view = GenerativeOnView::both_views;
  std::vector<TransformSpec> view1;
  std::vector<TransformSpec> view2;
  std::size_t output_size = 32;

  bool operator==(const PipelineSpec&) const = default;
};

void validate_pipeline(const PipelineSpec& spec);

// Per-view record of what actually fired, for law checks.
struct ViewTrace {
  bool substituted = false;
  std::uint32_t variant = 0;
  std::vector<bool> fired;  // one flag per transform in the view's list
};

struct PipelineTrace {
  ViewTrace view1;
  ViewTrace view2;
};

// With probability p0 replaces img by a uniformly chosen bank variant of its
// source; requires the source in the bank whenever p0 > 0, even if the gate
// does not fire this draw.
Image apply_generative_slot(std::uint64_t source_id, const Image& img,
                            const SampleBank& bank, double p0, SampleRng& rng,
                            ViewTrace* trace = nullptr);

std::pair<Image, Image> apply_pipeline(const PipelineSpec& spec,
                                       std::uint64_t source_id, const Image& img,
                                       const SampleBank* bank, SampleRng& rng1,
                                       SampleRng& rng2,
                                       PipelineTrace* trace = nullptr);

// Appendix-table presets: simclr_standard, simclr_random_crop, moco_standard,
// byol_standard, simsiam_standard, barlow_standard. Generative slot off.
PipelineSpec pipeline_preset(const std::string& name, std::size_t output_size);
std::vector<std::string> pipeline_preset_names();

// Augmentation strategies for the substitution studies: baseline,
// only_generative, generative_random_crop, generative_standard. Standard
// lists use the reproduction crop range [0.2, 1].
PipelineSpec strategy_pipeline(const std::string& strategy,
                               const std::string& method_preset, double p0,
                               GenerativeOnView on_view, std::size_t output_size);
std::vector<std::string> strategy_names();

}  // namespace genaug

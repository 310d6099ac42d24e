#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "genaug/tensor.hpp"

namespace genaug {

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

// Weight container: magic "GWTS", version, then (name, shape, f64 values) per
// tensor in list order.
void save_weights(const NamedTensors& tensors, const std::filesystem::path& path);
NamedTensors load_weights(const std::filesystem::path& path);

// Positional lookup helper; IoError when a name is absent.
const Tensor& find_tensor(const NamedTensors& tensors, const std::string& name);

}  // namespace genaug

#include "genaug/model.hpp"

#include <cmath>
#include <string>

#include "genaug/errors.hpp"

namespace genaug {

namespace {

Tensor he_uniform(const std::vector<std::size_t>& shape, std::size_t fan_in,
                  SampleRng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  std::vector<double> values(n);
  for (double& v : values) v = rng.uniform(-limit, limit);
  return Tensor::leaf(shape, std::move(values));
}

}  // namespace

Mlp::Mlp(const std::vector<std::size_t>& dims, SampleRng& rng) {
  if (dims.size() < 2) throw ConfigError("mlp needs at least in and out dims");
  for (std::size_t d : dims) {
    if (d == 0) throw ConfigError("mlp dims must be positive");
  }
  layers_.reserve(dims.size() - 1);
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    MlpLayer layer;
    layer.w = he_uniform({dims[i], dims[i + 1]}, dims[i], rng);
    layer.b = Tensor::zeros({1, dims[i + 1]}).as_leaf();
    layers_.push_back(std::move(layer));
  }
}

Tensor Mlp::forward(const Tensor& x) const {
  if (layers_.empty()) return x;
  Tensor h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = add_row_vector(matmul(h, layers_[i].w), layers_[i].b);
    if (i + 1 < layers_.size()) h = relu(h);
  }
  return h;
}

void Mlp::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const std::string base = prefix + "." + std::to_string(i);
    out.push_back({base + ".w", &layers_[i].w, false});
    out.push_back({base + ".b", &layers_[i].b, true});
  }
}

std::size_t Mlp::out_dim() const {
  if (layers_.empty()) throw ContractError("out_dim of an empty mlp");
  return layers_.back().w.shape()[1];
}

const char* encoder_kind_name(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::conv_small: return "conv_small";
    case EncoderKind::mlp: return "mlp";
    case EncoderKind::identity: return "identity";
  }
  throw ContractError("unhandled EncoderKind");
}

EncoderKind encoder_kind_from_name(const std::string& name) {
  if (name == "conv_small") return EncoderKind::conv_small;
  if (name == "mlp") return EncoderKind::mlp;
  if (name == "identity") return EncoderKind::identity;
  throw ConfigError("unknown encoder kind: " + name);
}

void validate_encoder_spec(const EncoderSpec& spec) {
  if (spec.input_size < 8) throw ConfigError("encoder input size must be >= 8");
  if (spec.input_channels == 0) throw ConfigError("encoder needs channels");
  if (spec.kind == EncoderKind::conv_small) {
    if (spec.conv_channels.empty()) {
      throw ConfigError("conv encoder needs at least one conv layer");
    }
    std::size_t side = spec.input_size;
    for (std::size_t c : spec.conv_channels) {
      if (c == 0) throw ConfigError("conv channels must be positive");
      side = (side + 1) / 2;
      if (side == 0) throw ConfigError("conv stack shrinks image to nothing");
    }
    if (spec.fc_dims.empty()) throw ConfigError("conv encoder needs fc dims");
    for (std::size_t d : spec.fc_dims) {
      if (d == 0) throw ConfigError("fc dims must be positive");
    }
  } else if (spec.kind == EncoderKind::mlp) {
    if (spec.mlp_dims.empty()) throw ConfigError("mlp encoder needs dims");
    for (std::size_t d : spec.mlp_dims) {
      if (d == 0) throw ConfigError("mlp dims must be positive");
    }
  }
}

Encoder::Encoder(const EncoderSpec& spec, SampleRng& rng) : spec_(spec) {
  validate_encoder_spec(spec);
  const std::size_t flat =
      spec.input_channels * spec.input_size * spec.input_size;
  if (spec.kind == EncoderKind::identity) {
    rep_dim_ = flat;
    return;
  }
  if (spec.kind == EncoderKind::mlp) {
    std::vector<std::size_t> dims;
    dims.push_back(flat);
    dims.insert(dims.end(), spec.mlp_dims.begin(), spec.mlp_dims.end());
    fc_ = Mlp(dims, rng);
    rep_dim_ = fc_.out_dim();
    return;
  }
  std::size_t in_ch = spec.input_channels;
  std::size_t side = spec.input_size;
  for (std::size_t out_ch : spec.conv_channels) {
    ConvLayer layer;
    layer.w = he_uniform({out_ch, in_ch, 3, 3}, in_ch * 9, rng);
    layer.b = Tensor::zeros({out_ch}).as_leaf();
    convs_.push_back(std::move(layer));
    in_ch = out_ch;
    side = (side + 1) / 2;
  }
  std::vector<std::size_t> dims;
  dims.push_back(in_ch * side * side);
  dims.insert(dims.end(), spec.fc_dims.begin(), spec.fc_dims.end());
  fc_ = Mlp(dims, rng);
  rep_dim_ = fc_.out_dim();
}

Tensor Encoder::forward(const Tensor& x) const {
  if (x.shape().size() != 4) {
    throw ShapeError("encoder input must be {N, C, H, W}");
  }
  const std::size_t n = x.shape()[0];
  if (spec_.kind == EncoderKind::identity) {
    return reshape(x, {n, rep_dim_});
  }
  if (spec_.kind == EncoderKind::mlp) {
    const std::size_t flat =
        spec_.input_channels * spec_.input_size * spec_.input_size;
    return fc_.forward(reshape(x, {n, flat}));
  }
  Tensor h = x;
  for (const ConvLayer& layer : convs_) {
    h = relu(conv2d(h, layer.w, layer.b, 2, 1));
  }
  const std::size_t flat = h.shape()[1] * h.shape()[2] * h.shape()[3];
  return fc_.forward(reshape(h, {n, flat}));
}

void Encoder::collect_params(const std::string& prefix,
                             std::vector<ParamRef>& out) {
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    const std::string base = prefix + ".conv" + std::to_string(i);
    out.push_back({base + ".w", &convs_[i].w, false});
    out.push_back({base + ".b", &convs_[i].b, true});
  }
  fc_.collect_params(prefix + ".fc", out);
}

Tensor images_to_tensor(const std::vector<Image>& batch) {
  if (batch.empty()) throw ContractError("empty image batch");
  const std::size_t h = batch.front().height;
  const std::size_t w = batch.front().width;
  const std::size_t n = batch.size();
  std::vector<double> values(n * 3 * h * w);
  for (std::size_t i = 0; i < n; ++i) {
    const Image& img = batch[i];
    if (img.height != h || img.width != w) {
      throw ShapeError("batch images must share one size");
    }
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          values[((i * 3 + c) * h + y) * w + x] = img.at(y, x, c) / 255.0;
        }
      }
    }
  }
  return Tensor(std::vector<std::size_t>{n, 3, h, w}, std::move(values));
}

void copy_params(const std::vector<ParamRef>& src, std::vector<ParamRef>& dst) {
  if (src.size() != dst.size()) {
    throw ShapeError("parameter lists differ in length");
  }
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i].tensor->shape() != dst[i].tensor->shape()) {
      throw ShapeError("parameter shape mismatch at " + src[i].name);
    }
    *dst[i].tensor =
        Tensor::leaf(src[i].tensor->shape(),
                     std::vector<double>(src[i].tensor->values().begin(),
                                         src[i].tensor->values().end()));
  }
}

}  // namespace genaug

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "genaug/image.hpp"
#include "genaug/rng.hpp"
#include "genaug/tensor.hpp"

namespace genaug {

// Named handle to one trainable tensor; is_bias marks parameters excluded
// from LARS adaptation and weight decay.
struct ParamRef {
  std::string name;
  Tensor* tensor;
  bool is_bias;
};

struct MlpLayer {
  Tensor w;  // {in, out}
  Tensor b;  // {1, out}
};

// Fully connected stack with ReLU between layers and a linear last layer.
class Mlp {
 public:
  Mlp() = default;
  // dims = {in, hidden..., out}; weights He-uniform, biases zero.
  Mlp(const std::vector<std::size_t>& dims, SampleRng& rng);

  Tensor forward(const Tensor& x) const;
  void collect_params(const std::string& prefix, std::vector<ParamRef>& out);
  std::size_t out_dim() const;
  bool empty() const { return layers_.empty(); }

  std::vector<MlpLayer>& layers() { return layers_; }
  const std::vector<MlpLayer>& layers() const { return layers_; }

 private:
  std::vector<MlpLayer> layers_;
};

enum class EncoderKind : std::uint8_t { conv_small = 0, mlp = 1, identity = 2 };

const char* encoder_kind_name(EncoderKind kind);
EncoderKind encoder_kind_from_name(const std::string& name);

struct EncoderSpec {
  EncoderKind kind = EncoderKind::conv_small;
  std::size_t input_size = 32;  // square images
  std::size_t input_channels = 3;
  std::vector<std::size_t> conv_channels = {8, 16, 24};  // 3x3, stride 2
  std::vector<std::size_t> fc_dims = {96, 64};           // after flatten
  std::vector<std::size_t> mlp_dims = {128, 64};         // kind == mlp

  bool operator==(const EncoderSpec&) const = default;
};

void validate_encoder_spec(const EncoderSpec& spec);

struct ConvLayer {
  Tensor w;  // {out_ch, in_ch, 3, 3}
  Tensor b;  // {out_ch}
};

// Representation encoder f_theta. conv_small: stride-2 3x3 conv stack then an
// MLP on the flattened map; mlp: MLP on flattened pixels; identity: flatten.
class Encoder {
 public:
  Encoder() = default;
  Encoder(const EncoderSpec& spec, SampleRng& rng);

  // x: {N, C, H, W} scaled to [0,1]; returns {N, rep_dim}.
  Tensor forward(const Tensor& x) const;
  std::size_t rep_dim() const { return rep_dim_; }
  const EncoderSpec& spec() const { return spec_; }

  void collect_params(const std::string& prefix, std::vector<ParamRef>& out);

  std::vector<ConvLayer>& convs() { return convs_; }
  const std::vector<ConvLayer>& convs() const { return convs_; }
  Mlp& fc() { return fc_; }
  const Mlp& fc() const { return fc_; }

 private:
  EncoderSpec spec_;
  std::vector<ConvLayer> convs_;
  Mlp fc_;
  std::size_t rep_dim_ = 0;
};

// Packs a batch of images into an {N, C, H, W} tensor with values in [0,1].
Tensor images_to_tensor(const std::vector<Image>& batch);

// Copies parameter values from src into dst (shapes must match); used for
// target-network initialization and EMA reads.
void copy_params(const std::vector<ParamRef>& src, std::vector<ParamRef>& dst);

}  // namespace genaug

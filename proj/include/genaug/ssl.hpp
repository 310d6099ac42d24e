#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "genaug/rng.hpp"
#include "genaug/tensor.hpp"

namespace genaug {

enum class Method : std::uint8_t {
  simclr = 0,
  moco = 1,
  byol = 2,
  simsiam = 3,
  barlow_twins = 4,
};

const char* method_name(Method m);
Method method_from_name(const std::string& name);
std::vector<std::string> method_names();

// Projector g_psi and optional predictor dims; hidden/output per method.
struct HeadsSpec {
  std::size_t proj_hidden = 256;
  std::size_t proj_out = 32;
  bool has_predictor = false;
  std::size_t pred_hidden = 0;

  bool operator==(const HeadsSpec&) const = default;
};

// Symmetric NT-Xent over the 2N embeddings with cosine similarity / tau.
Tensor ntxent_loss(const Tensor& z1, const Tensor& z2, double temperature);

// Momentum-contrast auxiliary state: FIFO queue of unit-norm keys plus the
// momentum schedule endpoints for the key encoder.
struct MocoState {
  Tensor queue;  // {Q, d}, untracked, rows unit norm
  std::size_t next = 0;
  double m_base = 0.99;
  double m_final = 0.999;
};

MocoState make_moco_state(std::size_t queue_size, std::size_t dim,
                          std::uint64_t seed);

// InfoNCE of each query against its key (positive) and the queue (negatives);
// enqueues the new keys FIFO. EMA of the key encoder is the caller's job.
Tensor moco_step(const Tensor& query, const Tensor& key, MocoState& state,
                 double temperature);

// Symmetric 2 - 2*cos(pred, target); targets are detached internally.
Tensor byol_loss(const Tensor& pred1, const Tensor& target2, const Tensor& pred2,
                 const Tensor& target1);

// -1/2 [cos(pred1, proj2) + cos(pred2, proj1)]; proj inputs detached.
Tensor simsiam_loss(const Tensor& pred1, const Tensor& proj2, const Tensor& pred2,
                    const Tensor& proj1);

// Cross-correlation redundancy reduction on batch-normalized embeddings.
// eps > 0 stabilizes zero-variance dimensions instead of erroring.
Tensor barlow_twins_loss(const Tensor& z1, const Tensor& z2,
                         double lambda_offdiag = 0.0051, double scale = 0.048,
                         double eps = 0.0);

// Cosine ramp m_base -> m_final over t in [0, 1].
double ema_momentum(double t, double m_base, double m_final);

// target <- m*target + (1-m)*online, elementwise over raw values.
Tensor ema_blend(const Tensor& target, const Tensor& online, double m);

// Per-method training settings. paper_preset carries the published values for
// documentation parity; desk_preset scales head dims down (1/16) and uses the
// small-batch desk protocol.
struct MethodPreset {
  Method method = Method::simclr;
  std::string optimizer = "lars";
  double base_lr = 0.3;
  double weight_decay = 1e-6;
  std::size_t batch_size = 256;
  std::size_t warmup_epochs = 10;
  std::size_t epochs = 100;
  HeadsSpec heads;
  double temperature = 0.2;       // simclr, moco
  double m_base = 0.0, m_final = 0.0;  // moco, byol
  std::size_t queue_size = 0;     // moco
  double lambda_offdiag = 0.0051; // barlow twins
  double loss_scale = 0.048;      // barlow twins
};

MethodPreset paper_preset(Method m);
MethodPreset desk_preset(Method m);

}  // namespace genaug

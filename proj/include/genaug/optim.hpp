#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "genaug/model.hpp"
#include "genaug/tensor.hpp"

namespace genaug {

enum class OptimizerKind : std::uint8_t { sgd = 0, lars = 1 };

const char* optimizer_kind_name(OptimizerKind kind);
OptimizerKind optimizer_kind_from_name(const std::string& name);

// lr = base_lr * batch / 256.
double scaled_lr(double base_lr, std::size_t batch_size);

// Linear ramp 0 -> peak over warmup steps, then cosine decay peak -> 0.
double cosine_lr(std::size_t step, std::size_t total_steps,
                 std::size_t warmup_steps, double peak_lr);

// The layerwise LARS trust ratio; 1 when either norm vanishes.
double lars_local_lr(double param_norm, double grad_norm, double weight_decay,
                     double trust, double eps);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::sgd;
  double momentum = 0.9;
  double weight_decay = 0.0;
  double trust = 0.001;  // lars
  double eps = 1e-9;     // lars
};

// Momentum SGD / LARS over a fixed parameter list. Velocity state is keyed by
// position, so the same list order must be used on every step (and when
// checkpointing).
class Optimizer {
 public:
  explicit Optimizer(const OptimizerConfig& config) : config_(config) {}

  void step(const std::vector<ParamRef>& params, const std::vector<Tensor>& grads,
            double lr);

  const OptimizerConfig& config() const { return config_; }
  std::vector<Tensor>& velocities() { return velocities_; }
  const std::vector<Tensor>& velocities() const { return velocities_; }

 private:
  OptimizerConfig config_;
  std::vector<Tensor> velocities_;
};

}  // namespace genaug

#include "genaug/optim.hpp"

#include <cmath>
#include <numbers>

#include "genaug/errors.hpp"

namespace genaug {

const char* optimizer_kind_name(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::lars: return "lars";
  }
  throw ContractError("unhandled OptimizerKind");
}

OptimizerKind optimizer_kind_from_name(const std::string& name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "lars") return OptimizerKind::lars;
  throw ConfigError("unknown optimizer: " + name);
}

double scaled_lr(double base_lr, std::size_t batch_size) {
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  return base_lr * static_cast<double>(batch_size) / 256.0;
}

double cosine_lr(std::size_t step, std::size_t total_steps,
                 std::size_t warmup_steps, double peak_lr) {
  if (step > total_steps) throw ContractError("step beyond total steps");
  if (warmup_steps >= total_steps) {
    throw ConfigError("warmup must be shorter than the schedule");
  }
  if (step < warmup_steps) {
    return peak_lr * static_cast<double>(step) /
           static_cast<double>(warmup_steps);
  }
  const double progress = static_cast<double>(step - warmup_steps) /
                          static_cast<double>(total_steps - warmup_steps);
  return peak_lr * (std::cos(std::numbers::pi * progress) + 1.0) / 2.0;
}

double lars_local_lr(double param_norm, double grad_norm, double weight_decay,
                     double trust, double eps) {
  if (param_norm <= 0.0 || grad_norm <= 0.0) return 1.0;
  return trust * param_norm / (grad_norm + weight_decay * param_norm + eps);
}

namespace {

double l2_norm(std::span<const double> v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  return std::sqrt(sq);
}

}  // namespace

void Optimizer::step(const std::vector<ParamRef>& params,
                     const std::vector<Tensor>& grads, double lr) {
  if (params.size() != grads.size()) {
    throw ShapeError("parameter and gradient counts differ");
  }
  if (velocities_.empty()) {
    velocities_.reserve(params.size());
    for (const ParamRef& p : params) {
      velocities_.push_back(Tensor::zeros(p.tensor->shape()));
    }
  }
  if (velocities_.size() != params.size()) {
    throw ShapeError("optimizer state does not match parameter list");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& param = *params[i].tensor;
    const Tensor& grad = grads[i];
    if (param.shape() != grad.shape()) {
      throw ShapeError("gradient shape mismatch at " + params[i].name);
    }
    if (velocities_[i].shape() != param.shape()) {
      throw ShapeError("velocity shape mismatch at " + params[i].name);
    }
    const auto pv = param.values();
    const auto gv = grad.values();
    const auto vv = velocities_[i].values();
    const std::size_t n = pv.size();

    double wd = config_.weight_decay;
    double local = 1.0;
    if (config_.kind == OptimizerKind::lars) {
      if (params[i].is_bias) {
        // Bias-like parameters: plain momentum SGD, no decay, no adaptation.
        wd = 0.0;
      } else {
        local = lars_local_lr(l2_norm(pv), l2_norm(gv), wd, config_.trust,
                              config_.eps);
      }
    }

    std::vector<double> new_v(n), new_p(n);
    for (std::size_t j = 0; j < n; ++j) {
      new_v[j] = config_.momentum * vv[j] + gv[j] + wd * pv[j];
      new_p[j] = pv[j] - lr * local * new_v[j];
    }
    velocities_[i] = Tensor(param.shape(), std::move(new_v));
    param = Tensor::leaf(param.shape(), std::move(new_p));
  }
}

}  // namespace genaug

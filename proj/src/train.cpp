#include "genaug/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "genaug/errors.hpp"
#include "genaug/serialize.hpp"

namespace genaug {

namespace {

std::size_t env_threads() {
  const char* raw = std::getenv("GENAUG_THREADS");
  if (raw == nullptr) return 1;
  const long n = std::strtol(raw, nullptr, 10);
  return n > 1 ? static_cast<std::size_t>(n) : 1;
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed,
                                     std::size_t epoch) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  SampleRng rng(seed, RngStream::shuffle, epoch);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.uniform_int(i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

struct ViewBatch {
  Tensor x1;
  Tensor x2;
};

// Builds both views for a batch of dataset indices. Per-sample seeds keep the
// result independent of GENAUG_THREADS.
ViewBatch build_views(const TrainConfig& config, const LabeledDataset& dataset,
                      const SampleBank* bank,
                      const std::vector<std::size_t>& indices, std::size_t epoch) {
  const std::size_t n = indices.size();
  std::vector<Image> v1(n, Image(8, 8)), v2(n, Image(8, 8));
  const auto build_one = [&](std::size_t slot) {
    const std::size_t id = indices[slot];
    SampleRng rng1(config.seed, RngStream::augmentation, epoch, id, 1);
    SampleRng rng2(config.seed, RngStream::augmentation, epoch, id, 2);
    auto views = apply_pipeline(config.pipeline, id, dataset.images[id], bank,
                                rng1, rng2);
    v1[slot] = std::move(views.first);
    v2[slot] = std::move(views.second);
  };
  const std::size_t threads = std::min(env_threads(), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) build_one(i);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < n; i += threads) build_one(i);
      });
    }
    for (std::thread& th : pool) th.join();
  }
  return {images_to_tensor(v1), images_to_tensor(v2)};
}

Tensor method_loss(SslModel& model, const TrainConfig& config, const Tensor& x1,
                   const Tensor& x2) {
  switch (config.method) {
    case Method::simclr: {
      const Tensor z1 = model.projector.forward(model.encoder.forward(x1));
      const Tensor z2 = model.projector.forward(model.encoder.forward(x2));
      return ntxent_loss(z1, z2, config.temperature);
    }
    case Method::moco: {
      const Tensor q = model.projector.forward(model.encoder.forward(x1));
      const Tensor k =
          model.target_projector.forward(model.target_encoder.forward(x2));
      return moco_step(q, k, model.moco, config.temperature);
    }
    case Method::byol: {
      const Tensor p1 = model.predictor.forward(
          model.projector.forward(model.encoder.forward(x1)));
      const Tensor p2 = model.predictor.forward(
          model.projector.forward(model.encoder.forward(x2)));
      const Tensor t1 =
          model.target_projector.forward(model.target_encoder.forward(x1));
      const Tensor t2 =
          model.target_projector.forward(model.target_encoder.forward(x2));
      return byol_loss(p1, t2, p2, t1);
    }
    case Method::simsiam: {
      const Tensor z1 = model.projector.forward(model.encoder.forward(x1));
      const Tensor z2 = model.projector.forward(model.encoder.forward(x2));
      const Tensor p1 = model.predictor.forward(z1);
      const Tensor p2 = model.predictor.forward(z2);
      return simsiam_loss(p1, z2, p2, z1);
    }
    case Method::barlow_twins:
      return barlow_twins_loss(
          model.projector.forward(model.encoder.forward(x1)),
          model.projector.forward(model.encoder.forward(x2)),
          config.lambda_offdiag, config.loss_scale, config.barlow_eps);
  }
  throw ContractError("unhandled Method");
}

bool uses_target_network(Method m) {
  return m == Method::moco || m == Method::byol;
}

}  // namespace

TrainConfig default_train_config(Method method, std::size_t image_size) {
  const MethodPreset preset = desk_preset(method);
  TrainConfig config;
  config.method = method;
  config.encoder.input_size = image_size;
  config.heads = preset.heads;
  config.epochs = preset.epochs;
  config.batch_size = preset.batch_size;
  config.base_lr = preset.base_lr;
  config.weight_decay = preset.weight_decay;
  config.warmup_epochs = preset.warmup_epochs;
  config.optimizer = optimizer_kind_from_name(preset.optimizer);
  config.temperature = preset.temperature;
  config.m_base = preset.m_base;
  config.m_final = preset.m_final;
  config.queue_size = preset.queue_size;
  config.lambda_offdiag = preset.lambda_offdiag;
  config.loss_scale = preset.loss_scale;
  const std::string name = method == Method::barlow_twins
                               ? "barlow"
                               : std::string(method_name(method));
  config.pipeline = pipeline_preset(name + "_standard", image_size);
  return config;
}

void validate_train_config(const TrainConfig& config) {
  if (config.batch_size < 2) throw ConfigError("batch size must be at least 2");
  if (config.epochs < 1) throw ConfigError("epochs must be at least 1");
  if (config.warmup_epochs >= config.epochs) {
    throw ConfigError("warmup epochs must be fewer than total epochs");
  }
  if (config.base_lr < 0.0) throw ConfigError("base lr must not be negative");
  if (config.weight_decay < 0.0) {
    throw ConfigError("weight decay must not be negative");
  }
  if (config.momentum < 0.0 || config.momentum >= 1.0) {
    throw ConfigError("momentum must be in [0, 1)");
  }
  if (config.heads.proj_hidden == 0 || config.heads.proj_out == 0) {
    throw ConfigError("projector dims must be positive");
  }
  if (config.heads.has_predictor && config.heads.pred_hidden == 0) {
    throw ConfigError("predictor hidden dim must be positive");
  }
  if (config.method == Method::simclr || config.method == Method::moco) {
    if (config.temperature <= 0.0) {
      throw ConfigError("temperature must be positive");
    }
  }
  if (uses_target_network(config.method)) {
    if (config.m_base < 0.0 || config.m_base > 1.0 || config.m_final < 0.0 ||
        config.m_final > 1.0) {
      throw ConfigError("momentum schedule endpoints must be in [0, 1]");
    }
  }
  if (config.method == Method::moco && config.queue_size == 0) {
    throw ConfigError("moco queue size must be positive");
  }
  if ((config.method == Method::byol || config.method == Method::simsiam) &&
      !config.heads.has_predictor) {
    throw ConfigError(std::string(method_name(config.method)) +
                      " needs a predictor head");
  }
  if (config.clip_norm < 0.0) throw ConfigError("clip norm must not be negative");
  validate_encoder_spec(config.encoder);
  validate_pipeline(config.pipeline);
  if (config.pipeline.output_size != config.encoder.input_size) {
    throw ConfigError("pipeline output size must match encoder input size");
  }
}

std::vector<ParamRef> SslModel::online_params() {
  std::vector<ParamRef> params;
  encoder.collect_params("encoder", params);
  projector.collect_params("proj", params);
  predictor.collect_params("pred", params);
  return params;
}

std::vector<ParamRef> SslModel::target_params() {
  std::vector<ParamRef> params;
  target_encoder.collect_params("encoder", params);
  target_projector.collect_params("proj", params);
  return params;
}

SslModel make_model(const TrainConfig& config) {
  SslModel model;
  SampleRng rng(config.seed, RngStream::param_init);
  model.encoder = Encoder(config.encoder, rng);
  model.projector = Mlp(
      {model.encoder.rep_dim(), config.heads.proj_hidden, config.heads.proj_out},
      rng);
  if (config.heads.has_predictor) {
    model.predictor = Mlp({config.heads.proj_out, config.heads.pred_hidden,
                           config.heads.proj_out},
                          rng);
  }
  if (uses_target_network(config.method)) {
    // Same architecture; values overwritten by the copy below.
    SampleRng dummy(config.seed, RngStream::param_init);
    model.target_encoder = Encoder(config.encoder, dummy);
    model.target_projector =
        Mlp({model.encoder.rep_dim(), config.heads.proj_hidden,
             config.heads.proj_out},
            dummy);
    std::vector<ParamRef> online;
    model.encoder.collect_params("encoder", online);
    model.projector.collect_params("proj", online);
    auto targets = model.target_params();
    copy_params(online, targets);
  }
  if (config.method == Method::moco) {
    model.moco = make_moco_state(config.queue_size, config.heads.proj_out,
                                 config.seed);
    model.moco.m_base = config.m_base;
    model.moco.m_final = config.m_final;
  }
  return model;
}

TrainState init_train_state(const TrainConfig& config) {
  validate_train_config(config);
  TrainState state;
  state.config = config;
  state.model = make_model(config);
  OptimizerConfig opt;
  opt.kind = config.optimizer;
  opt.momentum = config.momentum;
  opt.weight_decay = config.weight_decay;
  state.optimizer = Optimizer(opt);
  return state;
}

void train_epochs(TrainState& state, const LabeledDataset& dataset,
                  const SampleBank* bank, std::size_t stop_epoch) {
  const TrainConfig& config = state.config;
  if (stop_epoch > config.epochs) {
    throw ContractError("stop epoch beyond configured epochs");
  }
  if (dataset.size() == 0) throw ConfigError("cannot train on an empty dataset");
  if (config.pipeline.p0 > 0.0 && bank == nullptr) {
    throw ConfigError("pipeline has p0 > 0 but no sample bank was given");
  }
  if (dataset.size() % config.batch_size == 1) {
    throw ConfigError("dataset size modulo batch leaves a single-sample batch");
  }

  const std::size_t n = dataset.size();
  const std::size_t steps_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const std::size_t total_steps = config.epochs * steps_per_epoch;
  const double peak_lr = scaled_lr(config.base_lr, config.batch_size);
  const std::size_t warmup_steps = config.warmup_epochs * steps_per_epoch;

  auto online = state.model.online_params();
  for (ParamRef& p : online) *p.tensor = p.tensor->as_leaf();
  auto targets = state.model.target_params();
  const bool ema = uses_target_network(config.method);

  std::deque<double> loss_trace;
  const auto abort_with = [&](const std::string& why, double lr) {
    throw NumericalAbort(why, static_cast<long>(state.global_step), lr,
                         std::vector<double>(loss_trace.begin(), loss_trace.end()));
  };

  for (std::size_t epoch = state.epochs_done; epoch < stop_epoch; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();
    const auto order = epoch_order(n, config.seed, epoch);
    double epoch_loss_sum = 0.0;
    std::size_t epoch_steps = 0;
    double last_lr = 0.0;

    for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
      const std::size_t end = std::min(begin + config.batch_size, n);
      const std::vector<std::size_t> indices(order.begin() + begin,
                                             order.begin() + end);
      const double lr =
          cosine_lr(state.global_step, total_steps, warmup_steps, peak_lr);
      last_lr = lr;

      ViewBatch views = build_views(config, dataset, bank, indices, epoch);
      double loss_value = 0.0;
      try {
        const Tensor loss = method_loss(state.model, config, views.x1, views.x2);
        loss_value = loss.scalar_value();
        if (!std::isfinite(loss_value)) {
          abort_with("non-finite loss", lr);
        }
        std::vector<Tensor> leaves;
        leaves.reserve(online.size());
        for (const ParamRef& p : online) leaves.push_back(*p.tensor);
        std::vector<Tensor> grads = gradients(loss, leaves);
        for (const Tensor& g : grads) {
          if (!all_finite(g)) abort_with("non-finite gradient", lr);
        }
        if (config.clip_norm > 0.0) {
          double sq = 0.0;
          for (const Tensor& g : grads) {
            for (double v : g.values()) sq += v * v;
          }
          const double norm = std::sqrt(sq);
          if (norm > config.clip_norm) {
            for (Tensor& g : grads) {
              g = scalar_mul(g, config.clip_norm / norm);
            }
          }
        }
        state.optimizer.step(online, grads, lr);
      } catch (const NumericalAbort&) {
        throw;
      } catch (const NumericError& e) {
        abort_with(e.what(), lr);
      } catch (const NormalizationError& e) {
        abort_with(e.what(), lr);
      } catch (const DegenerateInputError& e) {
        abort_with(e.what(), lr);
      }

      if (ema) {
        const double t =
            total_steps > 1 ? static_cast<double>(state.global_step) /
                                  static_cast<double>(total_steps - 1)
                            : 1.0;
        const double m = ema_momentum(t, config.m_base, config.m_final);
        std::vector<ParamRef> ema_src;
        state.model.encoder.collect_params("encoder", ema_src);
        state.model.projector.collect_params("proj", ema_src);
        for (std::size_t i = 0; i < targets.size(); ++i) {
          *targets[i].tensor =
              ema_blend(*targets[i].tensor, *ema_src[i].tensor, m);
        }
      }

      loss_trace.push_back(loss_value);
      if (loss_trace.size() > 20) loss_trace.pop_front();
      epoch_loss_sum += loss_value;
      ++epoch_steps;
      ++state.global_step;
    }

    const auto epoch_end = std::chrono::steady_clock::now();
    MetricsRow row;
    row.epoch = epoch;
    row.step = state.global_step;
    row.lr = last_lr;
    row.loss = epoch_loss_sum / static_cast<double>(epoch_steps);
    row.wall_ms = std::chrono::duration<double, std::milli>(epoch_end - epoch_start)
                      .count();
    state.metrics.push_back(row);
    state.epochs_done = epoch + 1;
  }
}

TrainState pretrain(const TrainConfig& config, const LabeledDataset& dataset,
                    const SampleBank* bank) {
  TrainState state = init_train_state(config);
  train_epochs(state, dataset, bank, config.epochs);
  return state;
}

void save_checkpoint(const TrainState& state,
                     const std::filesystem::path& weights_path,
                     const std::filesystem::path& meta_path,
                     std::uint64_t config_hash) {
  NamedTensors tensors;
  SslModel& model = const_cast<SslModel&>(state.model);
  for (const ParamRef& p : model.online_params()) {
    tensors.emplace_back("online." + p.name, *p.tensor);
  }
  for (const ParamRef& p : model.target_params()) {
    tensors.emplace_back("target." + p.name, *p.tensor);
  }
  const auto& velocities = state.optimizer.velocities();
  for (std::size_t i = 0; i < velocities.size(); ++i) {
    tensors.emplace_back("opt.v." + std::to_string(i), velocities[i]);
  }
  if (state.config.method == Method::moco) {
    tensors.emplace_back("moco.queue", model.moco.queue);
  }
  save_weights(tensors, weights_path);

  nlohmann::json meta;
  meta["version"] = 1;
  meta["method"] = method_name(state.config.method);
  meta["epochs_done"] = state.epochs_done;
  meta["global_step"] = state.global_step;
  meta["seed"] = state.config.seed;
  meta["config_hash"] = config_hash;
  meta["moco_next"] = state.model.moco.next;
  std::ofstream out(meta_path);
  if (!out) throw IoError("cannot open for writing: " + meta_path.string());
  out << meta.dump(2) << "\n";
  if (!out) throw IoError("write failed: " + meta_path.string());
}

TrainState load_checkpoint(const TrainConfig& config,
                           const std::filesystem::path& weights_path,
                           const std::filesystem::path& meta_path,
                           std::uint64_t expected_config_hash) {
  std::ifstream meta_in(meta_path);
  if (!meta_in) throw IoError("cannot open: " + meta_path.string());
  nlohmann::json meta;
  try {
    meta_in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad checkpoint sidecar: " + std::string(e.what()));
  }
  if (meta.value("version", 0) != 1) {
    throw IoError("unsupported checkpoint version");
  }
  if (expected_config_hash != 0) {
    const std::uint64_t stored = meta.value("config_hash", std::uint64_t{0});
    if (stored != 0 && stored != expected_config_hash) {
      throw ConfigError("checkpoint was written under a different config");
    }
  }
  if (meta.value("method", std::string()) != method_name(config.method)) {
    throw ConfigError("checkpoint method does not match config");
  }

  TrainState state = init_train_state(config);
  const NamedTensors tensors = load_weights(weights_path);

  auto restore = [&](const std::string& prefix, std::vector<ParamRef> params) {
    for (ParamRef& p : params) {
      const Tensor& stored = find_tensor(tensors, prefix + p.name);
      if (stored.shape() != p.tensor->shape()) {
        throw ConfigError("checkpoint tensor " + prefix + p.name +
                          " has the wrong shape");
      }
      *p.tensor = stored;
    }
  };
  restore("online.", state.model.online_params());
  restore("target.", state.model.target_params());

  auto online = state.model.online_params();
  const bool has_velocities =
      std::any_of(tensors.begin(), tensors.end(),
                  [](const auto& nt) { return nt.first == "opt.v.0"; });
  if (has_velocities) {
    // Absent velocities mean the checkpoint predates the first step; the
    // optimizer then re-initializes them to zero, which is equivalent.
    std::vector<Tensor> velocities;
    velocities.reserve(online.size());
    for (std::size_t i = 0; i < online.size(); ++i) {
      const Tensor& v = find_tensor(tensors, "opt.v." + std::to_string(i));
      if (v.shape() != online[i].tensor->shape()) {
        throw ConfigError("checkpoint optimizer state has the wrong shape");
      }
      velocities.push_back(v);
    }
    state.optimizer.velocities() = std::move(velocities);
  }

  if (config.method == Method::moco) {
    const Tensor& queue = find_tensor(tensors, "moco.queue");
    if (queue.shape() != state.model.moco.queue.shape()) {
      throw ConfigError("checkpoint moco queue has the wrong shape");
    }
    state.model.moco.queue = queue;
    state.model.moco.next = meta.value("moco_next", std::size_t{0});
  }

  state.epochs_done = meta.value("epochs_done", std::size_t{0});
  state.global_step = meta.value("global_step", std::size_t{0});
  return state;
}

void write_metrics_csv(const std::vector<MetricsRow>& rows,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "epoch,step,lr,loss,wall_ms\n";
  out.precision(17);
  for (const MetricsRow& row : rows) {
    out << row.epoch << "," << row.step << "," << row.lr << "," << row.loss
        << "," << row.wall_ms << "\n";
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace genaug

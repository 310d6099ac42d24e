#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "genaug/dataset.hpp"
#include "genaug/model.hpp"
#include "genaug/optim.hpp"
#include "genaug/pipeline.hpp"
#include "genaug/samplebank.hpp"
#include "genaug/ssl.hpp"

namespace genaug {

struct TrainConfig {
  Method method = Method::simclr;
  EncoderSpec encoder;
  HeadsSpec heads = {256, 32, false, 0};
  std::size_t epochs = 50;
  std::size_t batch_size = 64;
  double base_lr = 0.3;
  double weight_decay = 1e-6;
  std::size_t warmup_epochs = 5;
  OptimizerKind optimizer = OptimizerKind::lars;
  double momentum = 0.9;
  std::uint64_t seed = 1;
  PipelineSpec pipeline;
  double temperature = 0.2;        // simclr, moco
  double m_base = 0.99;            // moco, byol
  double m_final = 0.999;
  std::size_t queue_size = 1024;   // moco
  double lambda_offdiag = 0.0051;  // barlow twins
  double loss_scale = 0.048;
  double barlow_eps = 0.0;
  double clip_norm = 0.0;  // 0 disables clipping
};

// Desk-scale defaults for a method: desk_preset head dims and optimizer
// settings over the conv_small encoder and the method's standard pipeline.
TrainConfig default_train_config(Method method, std::size_t image_size = 32);

void validate_train_config(const TrainConfig& config);

// Online networks, and for moco/byol the momentum copies. Target parameters
// stay untracked (no gradients ever flow into them).
struct SslModel {
  Encoder encoder;
  Mlp projector;
  Mlp predictor;            // byol, simsiam
  Encoder target_encoder;   // moco, byol
  Mlp target_projector;
  MocoState moco;           // moco

  std::vector<ParamRef> online_params();
  std::vector<ParamRef> target_params();
};

SslModel make_model(const TrainConfig& config);

struct MetricsRow {
  std::size_t epoch = 0;   // 0-based
  std::size_t step = 0;    // global steps completed
  double lr = 0.0;         // last lr of the epoch
  double loss = 0.0;       // mean step loss of the epoch
  double wall_ms = 0.0;
};

struct TrainState {
  TrainConfig config;
  SslModel model;
  Optimizer optimizer{OptimizerConfig{}};
  std::size_t epochs_done = 0;
  std::size_t global_step = 0;
  std::vector<MetricsRow> metrics;
};

TrainState init_train_state(const TrainConfig& config);

// Runs epochs [state.epochs_done, stop_epoch). Aborts with NumericalAbort on
// a non-finite loss, carrying (step, lr, recent loss trace).
void train_epochs(TrainState& state, const LabeledDataset& dataset,
                  const SampleBank* bank, std::size_t stop_epoch);

TrainState pretrain(const TrainConfig& config, const LabeledDataset& dataset,
                    const SampleBank* bank);

// Checkpoint = GWTS weights (params, optimizer state, queue) + JSON sidecar
// (epochs_done, global_step, seed, config_hash).
void save_checkpoint(const TrainState& state, const std::filesystem::path& weights_path,
                     const std::filesystem::path& meta_path,
                     std::uint64_t config_hash = 0);

TrainState load_checkpoint(const TrainConfig& config,
                           const std::filesystem::path& weights_path,
                           const std::filesystem::path& meta_path,
                           std::uint64_t expected_config_hash = 0);

void write_metrics_csv(const std::vector<MetricsRow>& rows,
                       const std::filesystem::path& path);

}  // namespace genaug

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "genaug/dataset.hpp"
#include "genaug/model.hpp"
#include "genaug/optim.hpp"
#include "genaug/tensor.hpp"

namespace genaug {

// Representations as features x examples, with provenance for mismatch checks.
struct ReprMatrix {
  Tensor features;  // {p, N}
  std::string encoder_id;
  std::string dataset_id;
};

ReprMatrix extract_representations(const Encoder& encoder,
                                   const LabeledDataset& dataset,
                                   const std::string& encoder_id = "",
                                   const std::string& dataset_id = "",
                                   std::size_t batch_size = 256);

// Desk-scale stand-in for an external conditioning encoder: features built
// directly from the generator latents (pose, colors, one-hot class).
ReprMatrix latent_representations(const LabeledDataset& dataset,
                                  const std::string& dataset_id = "");

// Linear probing protocol; defaults follow the published evaluation setup.
struct ProbeConfig {
  OptimizerKind optimizer = OptimizerKind::lars;
  double base_lr = 0.1;
  double weight_decay = 0.0;
  std::size_t batch_size = 512;
  std::size_t warmup_epochs = 0;
  std::size_t epochs = 100;
  double momentum = 0.9;
  std::uint64_t seed = 0;
};

struct ProbeResult {
  double top1 = 0.0;
  double top5 = -1.0;  // -1 when classes < 5
  std::size_t n_eval = 0;
  std::size_t n_classes = 0;
};

ProbeResult linear_probe(const ReprMatrix& train_reps,
                         const std::vector<int>& train_labels,
                         const ReprMatrix& eval_reps,
                         const std::vector<int>& eval_labels,
                         const ProbeConfig& config = {});

// Fraction of rows whose label is among the k best scores; ties go to the
// lower class index.
double topk_accuracy(const Tensor& scores, const std::vector<int>& labels,
                     std::size_t k);

// Dissimilarities per the representation-analysis protocol; both center and
// Frobenius-normalize internally.
double cka_dissimilarity(const ReprMatrix& a, const ReprMatrix& b);
double opd_dissimilarity(const ReprMatrix& a, const ReprMatrix& b);

enum class Measure : std::uint8_t { cka = 0, opd = 1 };
const char* measure_name(Measure m);

struct DissimilarityReport {
  Measure measure = Measure::cka;
  double mean = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  std::size_t n_resamples = 100;
  double level = 0.95;
};

// Percentile bootstrap over example columns (shared index draws for A and B).
DissimilarityReport bootstrap_ci(const ReprMatrix& a, const ReprMatrix& b,
                                 Measure measure, std::size_t n_resamples = 100,
                                 double level = 0.95, std::uint64_t seed = 0);

}  // namespace genaug

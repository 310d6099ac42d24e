#include "genaug/eval.hpp"

#include <algorithm>
#include <cmath>

#include "genaug/errors.hpp"
#include "genaug/linalg.hpp"
#include "genaug/rng.hpp"

namespace genaug {

ReprMatrix extract_representations(const Encoder& encoder,
                                   const LabeledDataset& dataset,
                                   const std::string& encoder_id,
                                   const std::string& dataset_id,
                                   std::size_t batch_size) {
  if (dataset.size() == 0) throw ConfigError("empty dataset");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  const std::size_t n = dataset.size();
  const std::size_t p = encoder.rep_dim();
  std::vector<double> features(p * n);
  for (std::size_t begin = 0; begin < n; begin += batch_size) {
    const std::size_t end = std::min(begin + batch_size, n);
    const std::vector<Image> batch(dataset.images.begin() + begin,
                                   dataset.images.begin() + end);
    const Tensor reps = encoder.forward(images_to_tensor(batch));  // {B, p}
    const auto rv = reps.values();
    for (std::size_t i = 0; i < end - begin; ++i) {
      for (std::size_t f = 0; f < p; ++f) {
        features[f * n + (begin + i)] = rv[i * p + f];
      }
    }
  }
  return {Tensor({p, n}, std::move(features)), encoder_id, dataset_id};
}

ReprMatrix latent_representations(const LabeledDataset& dataset,
                                  const std::string& dataset_id) {
  if (dataset.size() == 0) throw ConfigError("empty dataset");
  if (dataset.latents.size() != dataset.size()) {
    throw ConfigError("dataset carries no latents");
  }
  const std::size_t n = dataset.size();
  const std::size_t p = 10 + dataset.n_classes;
  std::vector<double> features(p * n);
  for (std::size_t i = 0; i < n; ++i) {
    const ShapeLatent& lt = dataset.latents[i];
    std::size_t f = 0;
    const auto put = [&](double v) { features[f++ * n + i] = v; };
    put(lt.rotation);
    put(lt.scale);
    put(lt.tx);
    put(lt.ty);
    for (std::size_t c = 0; c < 3; ++c) put(lt.fg[c] / 255.0);
    for (std::size_t c = 0; c < 3; ++c) put(lt.bg[c] / 255.0);
    for (std::size_t c = 0; c < dataset.n_classes; ++c) {
      put(lt.class_id == static_cast<int>(c) ? 1.0 : 0.0);
    }
  }
  return {Tensor({p, n}, std::move(features)), "oracle-latent", dataset_id};
}

namespace {

// Columns of a ReprMatrix as probe inputs: {N, p}, one row per example.
Tensor examples_by_rows(const ReprMatrix& reps) {
  if (reps.features.shape().size() != 2) {
    throw ShapeError("representations must be a {p, N} matrix");
  }
  return transpose(reps.features);
}

std::size_t checked_class_count(const std::vector<int>& train_labels,
                                const std::vector<int>& eval_labels) {
  if (train_labels.empty() || eval_labels.empty()) {
    throw ConfigError("probe needs non-empty label sets");
  }
  int max_label = 0;
  for (int l : train_labels) {
    if (l < 0) throw ConfigError("negative label");
    max_label = std::max(max_label, l);
  }
  const std::size_t n_classes = static_cast<std::size_t>(max_label) + 1;
  if (n_classes < 2) throw ConfigError("probe needs at least 2 classes");
  for (int l : eval_labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= n_classes) {
      throw ConfigError("eval labels outside the train class range");
    }
  }
  return n_classes;
}

Tensor one_hot(const std::vector<int>& labels, std::size_t n_classes) {
  std::vector<double> values(labels.size() * n_classes, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    values[i * n_classes + static_cast<std::size_t>(labels[i])] = 1.0;
  }
  return Tensor({labels.size(), n_classes}, std::move(values));
}

Tensor cross_entropy(const Tensor& logits, const Tensor& targets_onehot) {
  const std::size_t c = logits.shape()[1];
  const Tensor row_max = row_max_detached(logits);
  const Tensor lse = add(
      row_max, log_op(row_sum(exp_op(sub(logits, tile_cols(row_max, c))))));
  const Tensor picked = row_sum(mul(logits, targets_onehot));
  return mean_all(sub(lse, picked));
}

}  // namespace

ProbeResult linear_probe(const ReprMatrix& train_reps,
                         const std::vector<int>& train_labels,
                         const ReprMatrix& eval_reps,
                         const std::vector<int>& eval_labels,
                         const ProbeConfig& config) {
  const Tensor x_train = examples_by_rows(train_reps);
  const Tensor x_eval = examples_by_rows(eval_reps);
  if (x_train.shape()[0] != train_labels.size()) {
    throw ShapeError("train reps and labels disagree on N");
  }
  if (x_eval.shape()[0] != eval_labels.size()) {
    throw ShapeError("eval reps and labels disagree on N");
  }
  if (x_train.shape()[1] != x_eval.shape()[1]) {
    throw ShapeError("train and eval feature dims differ");
  }
  if (config.epochs < 1) throw ConfigError("probe epochs must be at least 1");
  if (config.batch_size < 1) throw ConfigError("probe batch must be positive");
  const std::size_t n_classes = checked_class_count(train_labels, eval_labels);
  const std::size_t n = train_labels.size();
  const std::size_t p = x_train.shape()[1];

  Tensor w = Tensor::zeros({p, n_classes}).as_leaf();
  Tensor b = Tensor::zeros({1, n_classes}).as_leaf();
  std::vector<ParamRef> params{{"probe.w", &w, false}, {"probe.b", &b, true}};

  OptimizerConfig opt;
  opt.kind = config.optimizer;
  opt.momentum = config.momentum;
  opt.weight_decay = config.weight_decay;
  Optimizer optimizer(opt);

  const std::size_t steps_per_epoch =
      (n + config.batch_size - 1) / config.batch_size;
  const std::size_t total_steps = config.epochs * steps_per_epoch;
  const std::size_t warmup_steps = config.warmup_epochs * steps_per_epoch;
  if (warmup_steps >= total_steps) {
    throw ConfigError("probe warmup must be shorter than the schedule");
  }
  const double peak_lr = scaled_lr(config.base_lr, config.batch_size);

  const auto xv = x_train.values();
  std::size_t global_step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    SampleRng rng(config.seed, RngStream::probe, epoch);
    for (std::size_t i = n; i > 1; --i) {
      std::swap(order[i - 1], order[rng.uniform_int(i)]);
    }
    for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
      const std::size_t end = std::min(begin + config.batch_size, n);
      const std::size_t bsz = end - begin;
      std::vector<double> batch_x(bsz * p);
      std::vector<int> batch_y(bsz);
      for (std::size_t i = 0; i < bsz; ++i) {
        const std::size_t src = order[begin + i];
        std::copy(xv.begin() + src * p, xv.begin() + (src + 1) * p,
                  batch_x.begin() + i * p);
        batch_y[i] = train_labels[src];
      }
      const Tensor xb({bsz, p}, std::move(batch_x));
      const Tensor logits = add_row_vector(matmul(xb, w), b);
      const Tensor loss = cross_entropy(logits, one_hot(batch_y, n_classes));
      const double lr =
          cosine_lr(global_step, total_steps, warmup_steps, peak_lr);
      const std::vector<Tensor> leaves{w, b};
      optimizer.step(params, gradients(loss, leaves), lr);
      ++global_step;
    }
  }

  const Tensor eval_scores = add_row_vector(matmul(x_eval, w), b);
  ProbeResult result;
  result.top1 = topk_accuracy(eval_scores, eval_labels, 1);
  if (n_classes >= 5) result.top5 = topk_accuracy(eval_scores, eval_labels, 5);
  result.n_eval = eval_labels.size();
  result.n_classes = n_classes;
  return result;
}

double topk_accuracy(const Tensor& scores, const std::vector<int>& labels,
                     std::size_t k) {
  if (scores.shape().size() != 2) throw ShapeError("scores must be {N, C}");
  const std::size_t n = scores.shape()[0], c = scores.shape()[1];
  if (labels.size() != n) throw ShapeError("labels do not match scores");
  if (k < 1 || k > c) throw ConfigError("k must be in [1, C]");
  const auto sv = scores.values();
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = labels[i];
    if (label < 0 || static_cast<std::size_t>(label) >= c) {
      throw ConfigError("label outside score columns");
    }
    const double own = sv[i * c + static_cast<std::size_t>(label)];
    // Rank of the label under "ties go to the lower class index".
    std::size_t better = 0;
    for (std::size_t j = 0; j < c; ++j) {
      const double s = sv[i * c + j];
      if (s > own || (s == own && j < static_cast<std::size_t>(label))) {
        ++better;
      }
    }
    if (better < k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

namespace {

Tensor normalized_or_throw(const ReprMatrix& m, const char* which) {
  if (m.features.shape().size() != 2) {
    throw ShapeError(std::string(which) + " must be a {p, N} matrix");
  }
  if (!all_finite(m.features)) {
    throw NumericError(std::string(which) + " has non-finite entries");
  }
  return center_and_normalize(m.features);
}

void check_same_examples(const ReprMatrix& a, const ReprMatrix& b) {
  if (a.features.shape()[1] != b.features.shape()[1]) {
    throw ShapeError("representation matrices disagree on N");
  }
}

double frob(const Tensor& t) {
  double sq = 0.0;
  for (double v : t.values()) sq += v * v;
  return std::sqrt(sq);
}

Tensor pad_rows(const Tensor& t, std::size_t rows) {
  const std::size_t p = t.shape()[0], n = t.shape()[1];
  if (p == rows) return t;
  std::vector<double> values(rows * n, 0.0);
  std::copy(t.values().begin(), t.values().end(), values.begin());
  return Tensor({rows, n}, std::move(values));
}

}  // namespace

const char* measure_name(Measure m) {
  switch (m) {
    case Measure::cka: return "CKA";
    case Measure::opd: return "OPD";
  }
  throw ContractError("unhandled Measure");
}

double cka_dissimilarity(const ReprMatrix& a, const ReprMatrix& b) {
  check_same_examples(a, b);
  const Tensor an = normalized_or_throw(a, "A");
  const Tensor bn = normalized_or_throw(b, "B");
  const double cross = frob(matmul(an, transpose(bn)));
  const double ga = frob(matmul(an, transpose(an)));
  const double gb = frob(matmul(bn, transpose(bn)));
  if (ga <= 0.0 || gb <= 0.0) {
    throw DegenerateInputError("degenerate Gram matrix in CKA");
  }
  return 1.0 - (cross * cross) / (ga * gb);
}

double opd_dissimilarity(const ReprMatrix& a, const ReprMatrix& b) {
  check_same_examples(a, b);
  Tensor an = normalized_or_throw(a, "A");
  Tensor bn = normalized_or_throw(b, "B");
  const std::size_t p = std::max(an.shape()[0], bn.shape()[0]);
  an = pad_rows(an, p);
  bn = pad_rows(bn, p);
  const double nuclear = svd_nuclear_norm(matmul(bn, transpose(an)));
  const double d = 2.0 - 2.0 * nuclear;
  if (d < -1e-9) throw ContractError("opd closed form went negative");
  return std::max(0.0, d);
}

DissimilarityReport bootstrap_ci(const ReprMatrix& a, const ReprMatrix& b,
                                 Measure measure, std::size_t n_resamples,
                                 double level, std::uint64_t seed) {
  check_same_examples(a, b);
  const std::size_t n = a.features.shape()[1];
  if (n < 10) {
    throw InsufficientDataError("bootstrap needs at least 10 examples");
  }
  if (n_resamples < 2) throw ConfigError("need at least 2 resamples");
  if (level <= 0.0 || level >= 1.0) throw ConfigError("level must be in (0,1)");

  const auto resample = [&](const Tensor& t, const std::vector<std::size_t>& idx) {
    const std::size_t p = t.shape()[0];
    const auto tv = t.values();
    std::vector<double> values(p * idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j) {
      for (std::size_t f = 0; f < p; ++f) {
        values[f * idx.size() + j] = tv[f * n + idx[j]];
      }
    }
    return Tensor({p, idx.size()}, std::move(values));
  };

  std::vector<double> stats(n_resamples);
  for (std::size_t r = 0; r < n_resamples; ++r) {
    SampleRng rng(seed, RngStream::bootstrap, r);
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) {
      idx[i] = static_cast<std::size_t>(rng.uniform_int(n));
    }
    const ReprMatrix ra{resample(a.features, idx), a.encoder_id, a.dataset_id};
    const ReprMatrix rb{resample(b.features, idx), b.encoder_id, b.dataset_id};
    stats[r] = measure == Measure::cka ? cka_dissimilarity(ra, rb)
                                       : opd_dissimilarity(ra, rb);
  }

  double mean = 0.0;
  for (double s : stats) mean += s;
  mean /= static_cast<double>(n_resamples);

  std::sort(stats.begin(), stats.end());
  const auto percentile = [&](double q) {
    const double pos = q * static_cast<double>(n_resamples - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
    const double frac = pos - static_cast<double>(lo);
    return stats[lo] * (1.0 - frac) + stats[hi] * frac;
  };

  DissimilarityReport report;
  report.measure = measure;
  report.mean = mean;
  report.ci_lower = percentile((1.0 - level) / 2.0);
  report.ci_upper = percentile(1.0 - (1.0 - level) / 2.0);
  report.n_resamples = n_resamples;
  report.level = level;
  return report;
}

}  // namespace genaug

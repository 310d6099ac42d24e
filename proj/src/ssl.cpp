#include "genaug/ssl.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "genaug/errors.hpp"

namespace genaug {

namespace {

// Rows with vanishing norm make cosine similarity meaningless; reject before
// any graph op so callers get a clean diagnostic instead of a NaN cascade.
void check_row_norms(const Tensor& z, const char* what) {
  if (z.shape().size() != 2) {
    throw ShapeError(std::string(what) + " must be a {N, d} matrix");
  }
  const std::size_t n = z.shape()[0], d = z.shape()[1];
  const auto v = z.values();
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < d; ++j) sq += v[i * d + j] * v[i * d + j];
    if (std::sqrt(sq) < 1e-12) {
      throw NormalizationError(std::string(what) + " row " + std::to_string(i) +
                               " has (near-)zero norm");
    }
  }
}

// {N, d} -> rows scaled to unit L2 norm.
Tensor normalize_rows(const Tensor& z) {
  const std::size_t d = z.shape()[1];
  const Tensor norms = sqrt_op(row_sum(mul(z, z)));  // {N, 1}
  return div(z, tile_cols(norms, d));
}

// Mean over rows of cos(a_i, b_i), after row normalization.
Tensor mean_row_cosine(const Tensor& a, const Tensor& b) {
  return mean_all(row_sum(mul(normalize_rows(a), normalize_rows(b))));
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + " shapes differ: " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

}  // namespace

const char* method_name(Method m) {
  switch (m) {
    case Method::simclr: return "simclr";
    case Method::moco: return "moco";
    case Method::byol: return "byol";
    case Method::simsiam: return "simsiam";
    case Method::barlow_twins: return "barlow_twins";
  }
  throw ContractError("unhandled Method");
}

Method method_from_name(const std::string& name) {
  if (name == "simclr") return Method::simclr;
  if (name == "moco") return Method::moco;
  if (name == "byol") return Method::byol;
  if (name == "simsiam") return Method::simsiam;
  if (name == "barlow_twins") return Method::barlow_twins;
  throw ConfigError("unknown method: " + name);
}

std::vector<std::string> method_names() {
  return {"simclr", "moco", "byol", "simsiam", "barlow_twins"};
}

Tensor ntxent_loss(const Tensor& z1, const Tensor& z2, double temperature) {
  if (temperature <= 0.0) throw ConfigError("temperature must be positive");
  check_same_shape(z1, z2, "ntxent embeddings");
  check_row_norms(z1, "ntxent z1");
  check_row_norms(z2, "ntxent z2");
  const std::size_t n = z1.shape()[0];
  if (n < 2) throw ConfigError("ntxent needs a batch of at least 2");
  const std::size_t m = 2 * n;

  const Tensor zn = normalize_rows(concat_rows(z1, z2));  // {2N, d}
  Tensor sims = scalar_mul(matmul(zn, transpose(zn)), 1.0 / temperature);

  // Remove self-similarity from every softmax.
  std::vector<double> diag_mask(m * m, 0.0);
  for (std::size_t i = 0; i < m; ++i) diag_mask[i * m + i] = -1e9;
  sims = add(sims, Tensor({m, m}, std::move(diag_mask)));

  // log-sum-exp rows, shifted by the detached row max (exact gradients).
  const Tensor row_max = row_max_detached(sims);  // {2N, 1}
  const Tensor lse =
      add(row_max, log_op(row_sum(exp_op(sub(sims, tile_cols(row_max, m))))));

  // Positive of anchor i is i+N (mod 2N).
  std::vector<double> pos_mask(m * m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    pos_mask[i * m + (i + n)] = 1.0;
    pos_mask[(i + n) * m + i] = 1.0;
  }
  const Tensor pos = row_sum(mul(sims, Tensor({m, m}, std::move(pos_mask))));

  return mean_all(sub(lse, pos));
}

MocoState make_moco_state(std::size_t queue_size, std::size_t dim,
                          std::uint64_t seed) {
  if (queue_size == 0) throw ConfigError("moco queue size must be positive");
  if (dim == 0) throw ConfigError("moco embedding dim must be positive");
  SampleRng rng(seed, RngStream::moco_queue);
  std::vector<double> values(queue_size * dim);
  for (std::size_t i = 0; i < queue_size; ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      values[i * dim + j] = rng.normal();
      sq += values[i * dim + j] * values[i * dim + j];
    }
    const double norm = std::sqrt(sq);
    for (std::size_t j = 0; j < dim; ++j) values[i * dim + j] /= norm;
  }
  MocoState state;
  state.queue = Tensor({queue_size, dim}, std::move(values));
  return state;
}

Tensor moco_step(const Tensor& query, const Tensor& key, MocoState& state,
                 double temperature) {
  if (temperature <= 0.0) throw ConfigError("temperature must be positive");
  check_same_shape(query, key, "moco query/key");
  check_row_norms(query, "moco query");
  check_row_norms(key, "moco key");
  const std::size_t n = query.shape()[0];
  const std::size_t d = query.shape()[1];
  if (state.queue.shape().size() != 2 || state.queue.shape()[1] != d) {
    throw ShapeError("moco queue dim does not match embeddings");
  }
  const std::size_t q = state.queue.shape()[0];

  const Tensor qn = normalize_rows(query);
  const Tensor kn = normalize_rows(key).detach();

  const Tensor l_pos = row_sum(mul(qn, kn));                    // {N, 1}
  const Tensor l_neg = matmul(qn, transpose(state.queue));      // {N, Q}
  const Tensor logits =
      scalar_mul(concat_cols(l_pos, l_neg), 1.0 / temperature);  // {N, 1+Q}

  // Cross-entropy with the positive always at column 0.
  const Tensor row_max = row_max_detached(logits);
  const Tensor lse = add(
      row_max, log_op(row_sum(exp_op(sub(logits, tile_cols(row_max, q + 1))))));
  std::vector<double> first_col(n * (q + 1), 0.0);
  for (std::size_t i = 0; i < n; ++i) first_col[i * (q + 1)] = 1.0;
  const Tensor pos = row_sum(mul(logits, Tensor({n, q + 1}, std::move(first_col))));
  const Tensor loss = mean_all(sub(lse, pos));

  // FIFO enqueue of the new keys.
  std::vector<double> queue_values(state.queue.values().begin(),
                                   state.queue.values().end());
  const auto kv = kn.values();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t slot = (state.next + i) % q;
    for (std::size_t j = 0; j < d; ++j) {
      queue_values[slot * d + j] = kv[i * d + j];
    }
  }
  state.queue = Tensor({q, d}, std::move(queue_values));
  state.next = (state.next + n) % q;
  return loss;
}

Tensor byol_loss(const Tensor& pred1, const Tensor& target2, const Tensor& pred2,
                 const Tensor& target1) {
  check_same_shape(pred1, target2, "byol pred1/target2");
  check_same_shape(pred2, target1, "byol pred2/target1");
  check_row_norms(pred1, "byol pred1");
  check_row_norms(pred2, "byol pred2");
  check_row_norms(target1, "byol target1");
  check_row_norms(target2, "byol target2");
  const Tensor c1 = mean_row_cosine(pred1, target2.detach());
  const Tensor c2 = mean_row_cosine(pred2, target1.detach());
  return scalar_add(scalar_mul(add(c1, c2), -1.0), 2.0);
}

Tensor simsiam_loss(const Tensor& pred1, const Tensor& proj2, const Tensor& pred2,
                    const Tensor& proj1) {
  check_same_shape(pred1, proj2, "simsiam pred1/proj2");
  check_same_shape(pred2, proj1, "simsiam pred2/proj1");
  check_row_norms(pred1, "simsiam pred1");
  check_row_norms(pred2, "simsiam pred2");
  check_row_norms(proj1, "simsiam proj1");
  check_row_norms(proj2, "simsiam proj2");
  const Tensor c1 = mean_row_cosine(pred1, proj2.detach());
  const Tensor c2 = mean_row_cosine(pred2, proj1.detach());
  return scalar_mul(add(c1, c2), -0.5);
}

Tensor barlow_twins_loss(const Tensor& z1, const Tensor& z2,
                         double lambda_offdiag, double scale, double eps) {
  check_same_shape(z1, z2, "barlow embeddings");
  if (z1.shape().size() != 2) throw ShapeError("barlow needs {N, d} matrices");
  const std::size_t n = z1.shape()[0], d = z1.shape()[1];
  if (n < 2) throw ConfigError("barlow needs a batch of at least 2");
  if (eps < 0.0) throw ConfigError("barlow eps must be non-negative");

  const auto batch_normalize = [&](const Tensor& z, const char* what) {
    const Tensor mean = scalar_mul(col_sum(z), 1.0 / n);          // {1, d}
    const Tensor centered = sub(z, tile_rows(mean, n));           // {N, d}
    Tensor var = scalar_mul(col_sum(mul(centered, centered)), 1.0 / n);
    if (eps == 0.0) {
      for (double v : var.values()) {
        if (v < 1e-24) {
          throw DegenerateInputError(std::string(what) +
                                     " has a zero-variance dimension");
        }
      }
    } else {
      var = scalar_add(var, eps * eps);
    }
    return div(centered, tile_rows(sqrt_op(var), n));
  };

  const Tensor h1 = batch_normalize(z1, "barlow z1");
  const Tensor h2 = batch_normalize(z2, "barlow z2");
  const Tensor c = scalar_mul(matmul(transpose(h1), h2), 1.0 / n);  // {d, d}

  std::vector<double> diag(d * d, 0.0), offdiag(d * d, 1.0);
  for (std::size_t i = 0; i < d; ++i) {
    diag[i * d + i] = 1.0;
    offdiag[i * d + i] = 0.0;
  }
  const Tensor diag_mask({d, d}, std::move(diag));
  const Tensor offdiag_mask({d, d}, std::move(offdiag));

  const Tensor on_residual = mul(sub(diag_mask, c), diag_mask);
  const Tensor on_term = sum_all(mul(on_residual, on_residual));
  const Tensor off_part = mul(c, offdiag_mask);
  const Tensor off_term = sum_all(mul(off_part, off_part));
  return scalar_mul(add(on_term, scalar_mul(off_term, lambda_offdiag)), scale);
}

double ema_momentum(double t, double m_base, double m_final) {
  if (t < 0.0 || t > 1.0) throw ContractError("schedule fraction outside [0,1]");
  return m_final - (m_final - m_base) * (std::cos(std::numbers::pi * t) + 1.0) / 2.0;
}

Tensor ema_blend(const Tensor& target, const Tensor& online, double m) {
  if (target.shape() != online.shape()) {
    throw ShapeError("ema target/online shapes differ");
  }
  const auto tv = target.values();
  const auto ov = online.values();
  std::vector<double> out(tv.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = m * tv[i] + (1.0 - m) * ov[i];
  }
  return Tensor::leaf(target.shape(), std::move(out));
}

MethodPreset paper_preset(Method m) {
  MethodPreset p;
  p.method = m;
  switch (m) {
    case Method::simclr:
      p.optimizer = "lars";
      p.base_lr = 0.3;
      p.weight_decay = 1e-6;
      p.batch_size = 256;
      p.heads = {4096, 512, false, 0};
      p.temperature = 0.2;
      break;
    case Method::moco:
      p.optimizer = "sgd";
      p.base_lr = 0.3;
      p.weight_decay = 3e-5;
      p.batch_size = 64;
      p.heads = {2048, 256, false, 0};
      p.temperature = 0.2;
      p.m_base = 0.99;
      p.m_final = 0.999;
      p.queue_size = 65536;
      break;
    case Method::byol:
      p.optimizer = "lars";
      p.base_lr = 0.2;
      p.weight_decay = 15e-7;
      p.batch_size = 256;
      p.heads = {4096, 256, true, 4096};
      p.m_base = 0.99;
      p.m_final = 1.0;
      break;
    case Method::simsiam:
      p.optimizer = "sgd";
      p.base_lr = 0.5;
      p.weight_decay = 1e-5;
      p.batch_size = 64;
      p.heads = {4096, 4096, true, 512};
      break;
    case Method::barlow_twins:
      p.optimizer = "lars";
      p.base_lr = 0.8;
      p.weight_decay = 1.5e-6;
      p.batch_size = 64;
      p.heads = {4096, 4096, false, 0};
      p.lambda_offdiag = 0.0051;
      p.loss_scale = 0.048;
      break;
  }
  return p;
}

MethodPreset desk_preset(Method m) {
  MethodPreset p = paper_preset(m);
  // Head dims shrink by 16; the optimizer, lr, and schedule carry over. Desk
  // runs use batch 64 and 50 epochs with proportionally scaled warmup.
  p.heads.proj_hidden /= 16;
  p.heads.proj_out /= 16;
  if (p.heads.has_predictor) p.heads.pred_hidden /= 16;
  p.batch_size = 64;
  p.epochs = 50;
  p.warmup_epochs = 5;
  if (m == Method::moco) p.queue_size = 1024;
  return p;
}

}  // namespace genaug

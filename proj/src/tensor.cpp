#include "genaug/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace genaug {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "{";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "}";
  return os.str();
}

namespace detail {

std::uint64_t next_node_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

}  // namespace detail

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)) {
  if (shape_numel(shape_) != values.size()) {
    throw ShapeError("tensor data length " + std::to_string(values.size()) +
                     " does not match shape " + shape_str(shape_));
  }
  data_ = std::make_shared<const std::vector<double>>(std::move(values));
}

Tensor Tensor::zeros(Shape shape) {
  std::vector<double> v(shape_numel(shape), 0.0);
  return Tensor(std::move(shape), std::move(v));
}

Tensor Tensor::full(Shape shape, double value) {
  std::vector<double> v(shape_numel(shape), value);
  return Tensor(std::move(shape), std::move(v));
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, {value}); }

Tensor Tensor::leaf(Shape shape, std::vector<double> values) {
  Tensor t(std::move(shape), std::move(values));
  auto node = std::make_shared<detail::Node>();
  node->id = detail::next_node_id();
  node->shape = t.shape_;
  t.node_ = std::move(node);
  return t;
}

Tensor Tensor::as_leaf() const {
  Tensor t = *this;
  auto node = std::make_shared<detail::Node>();
  node->id = detail::next_node_id();
  node->shape = shape_;
  t.node_ = std::move(node);
  return t;
}

Tensor Tensor::detach() const {
  Tensor t = *this;
  t.node_ = nullptr;
  return t;
}

std::size_t Tensor::numel() const { return shape_numel(shape_); }

std::span<const double> Tensor::values() const {
  if (!data_) return {};
  return {data_->data(), data_->size()};
}

double Tensor::at(std::size_t flat_index) const { return data_->at(flat_index); }

double Tensor::scalar_value() const {
  if (numel() != 1) {
    throw ShapeError("scalar_value on tensor of shape " + shape_str(shape_));
  }
  return (*data_)[0];
}

bool Tensor::is_leaf() const { return node_ && node_->is_leaf(); }

std::uint64_t Tensor::leaf_id() const {
  if (!is_leaf()) throw ContractError("leaf_id on non-leaf tensor");
  return node_->id;
}

Tensor Tensor::with_node(Shape shape, std::vector<double> values, detail::NodePtr node) {
  Tensor t(std::move(shape), std::move(values));
  t.node_ = std::move(node);
  return t;
}

bool all_finite(const Tensor& a) {
  for (double v : a.values()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Op plumbing
// ---------------------------------------------------------------------------

namespace {

using detail::Node;
using detail::NodePtr;
using GradFn = std::function<std::vector<Tensor>(const Tensor&)>;

// Builds the result tensor, attaching a graph node when any input is tracked.
// `tracked` lists exactly the inputs whose nodes become parents, in the order
// grad_fn emits their gradients.
Tensor make_result(Shape shape, std::vector<double> values,
                   std::initializer_list<const Tensor*> inputs, GradFn grad_fn) {
  std::vector<NodePtr> parents;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) parents.push_back(t->node());
  }
  if (parents.empty()) return Tensor(std::move(shape), std::move(values));
  auto node = std::make_shared<Node>();
  node->id = detail::next_node_id();
  node->shape = shape;
  node->parents = std::move(parents);
  node->grad_fn = std::move(grad_fn);
  return Tensor::with_node(std::move(shape), std::move(values), std::move(node));
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  }
}

void check_rank2(const Tensor& a, const char* op) {
  if (a.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected rank-2 tensor, got " +
                     shape_str(a.shape()));
  }
}

std::vector<double> copy_values(const Tensor& t) {
  return {t.values().begin(), t.values().end()};
}

}  // namespace

void gemm_accumulate(const double* a, const double* b, double* c, std::size_t m,
                     std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  std::vector<double> v(a.numel());
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = av[i] + bv[i];
  const bool ta = a.requires_grad(), tb = b.requires_grad();
  return make_result(a.shape(), std::move(v), {&a, &b}, [ta, tb](const Tensor& up) {
    std::vector<Tensor> g;
    if (ta) g.push_back(up);
    if (tb) g.push_back(up);
    return g;
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  std::vector<double> v(a.numel());
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = av[i] - bv[i];
  const bool ta = a.requires_grad(), tb = b.requires_grad();
  return make_result(a.shape(), std::move(v), {&a, &b}, [ta, tb](const Tensor& up) {
    std::vector<Tensor> g;
    if (ta) g.push_back(up);
    if (tb) g.push_back(neg(up));
    return g;
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  std::vector<double> v(a.numel());
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = av[i] * bv[i];
  const bool ta = a.requires_grad(), tb = b.requires_grad();
  const Tensor ac = a.detach(), bc = b.detach();
  return make_result(a.shape(), std::move(v), {&a, &b},
                     [ta, tb, ac, bc](const Tensor& up) {
                       std::vector<Tensor> g;
                       if (ta) g.push_back(mul(up, bc));
                       if (tb) g.push_back(mul(up, ac));
                       return g;
                     });
}

Tensor div(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "div");
  auto av = a.values(), bv = b.values();
  std::vector<double> v(a.numel());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (bv[i] == 0.0) throw NumericError("div: zero divisor");
    v[i] = av[i] / bv[i];
  }
  const bool ta = a.requires_grad(), tb = b.requires_grad();
  const Tensor ac = a.detach(), bc = b.detach();
  return make_result(a.shape(), std::move(v), {&a, &b},
                     [ta, tb, ac, bc](const Tensor& up) {
                       std::vector<Tensor> g;
                       if (ta) g.push_back(div(up, bc));
                       if (tb) {
                         Tensor t = div(mul(up, ac), mul(bc, bc));
                         g.push_back(neg(t));
                       }
                       return g;
                     });
}

Tensor neg(const Tensor& a) { return scalar_mul(a, -1.0); }

Tensor scalar_mul(const Tensor& a, double c) {
  std::vector<double> v(a.numel());
  auto av = a.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = av[i] * c;
  const bool ta = a.requires_grad();
  return make_result(a.shape(), std::move(v), {&a}, [ta, c](const Tensor& up) {
    std::vector<Tensor> g;
    if (ta) g.push_back(scalar_mul(up, c));
    return g;
  });
}

Tensor scalar_add(const Tensor& a, double c) {
  std::vector<double> v(a.numel());
  auto av = a.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = av[i] + c;
  const bool ta = a.requires_grad();
  return make_result(a.shape(), std::move(v), {&a}, [ta](const Tensor& up) {
    std::vector<Tensor> g;
    if (ta) g.push_back(up);
    return g;
  });
}

// ---------------------------------------------------------------------------
// Matrix ops
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_rank2(a, "matmul");
  check_rank2(b, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: inner dims differ, " + shape_str(a.shape()) + " @ " +
                     shape_str(b.shape()));
  }
  std::vector<double> v(m * n, 0.0);
  gemm_accumulate(a.values().data(), b.values().data(), v.data(), m, k, n);
  const bool ta = a.requires_grad(), tb = b.requires_grad();
  const Tensor ac = a.detach(), bc = b.detach();
  return make_result({m, n}, std::move(v), {&a, &b},
                     [ta, tb, ac, bc](const Tensor& up) {
                       std::vector<Tensor> g;
                       if (ta) g.push_back(matmul(up, transpose(bc)));
                       if (tb) g.push_back(matmul(transpose(ac), up));
                       return g;
                     });
}

Tensor transpose(const Tensor& a) {
  check_rank2(a, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> v(m * n);
  auto av = a.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) v[j * m + i] = av[i * n + j];
  const bool ta = a.requires_grad();
  return make_result({n, m}, std::move(v), {&a}, [ta](const Tensor& up) {
    std::vector<Tensor> g;
    if (ta) g.push_back(transpose(up));
    return g;
  });
}

// ---------------------------------------------------------------------------
// Nonlinearities
// ---------------------------------------------------------------------------

Tensor relu(const Tensor& a) {
  std::vector<double> v(a.numel());
  auto av = a.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = av[i] > 0.0 ? av[i] : 0.0;
  const bool ta = a.requires_grad();
  const Tensor ac = a.detach();
  return make_result(a.shape(), std::move(v), {&a}, [ta, ac](const Tensor& up) {
    std::vector<Tensor> g;
    if (ta) {
      std::vector<double> m(ac.numel());
      auto xv = ac.values(), uv = up.values();
      for (std::size_t i = 0; i < m.size(); ++i) m[i] = xv[i] > 0.0 ? uv[i] : 0.0;
      g.emplace_back(ac.shape(), std::move(m));
    }
    return g;
  });
}

Tensor exp_op(const Tensor& a) {
  std::vector<double> v(a.numel());
  auto av = a.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = std::exp(av[i]);
    if (!std::isfinite(v[i])) throw NumericError("exp: overflow");
  }
  const bool ta = a.requires_grad();
  const Tensor oc(a.shape(), std::vector<double>(v));
  return make_result(a.shape(), std::move(v), {&a}, [ta, oc](const Tensor& up) {
    std::vector<Tensor> g;
    if (ta) g.push_back(mul(up, oc));
    return g;
  });
}

Tensor log_op(const Tensor& a) {
  auto av = a.values();
  std::vector<double> v(a.numel());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (av[i] <= 0.0) throw NumericError("log: non-positive input");
    v[i] = std::log(av[i]);
  }
  const bool ta = a.requires_grad();
  const Tensor ac = a.detach();
  return make_result(a.shape(), std::move(v), {&a}, [ta, ac](const Tensor& up) {
    std::vector<Tensor> g;
    if (ta) g.push_back(div(up, ac));
    return g;
  });
}

Tensor sqrt_op(const Tensor& a) {
  auto av = a.values();
  const bool ta = a.requires_grad();
  std::vector<double> v(a.numel());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (av[i] < 0.0) throw NumericError("sqrt: negative input");
    if (ta && av[i] == 0.0) throw NumericError("sqrt: gradient undefined at 0");
    v[i] = std::sqrt(av[i]);
  }
  const Tensor oc(a.shape(), std::vector<double>(v));
  return make_result(a.shape(), std::move(v), {&a}, [ta, oc](const Tensor& up) {
    std::vector<Tensor> g;
    if (ta) g.push_back(div(scalar_mul(up, 0.5), oc));
    return g;
  });
}

// ---------------------------------------------------------------------------
// Reductions and broadcast helpers
// ---------------------------------------------------------------------------

Tensor sum_all(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  const bool ta = a.requires_grad();
  const Shape in_shape = a.shape();
  return make_result({}, {s}, {&a}, [ta, in_shape](const Tensor& up) {
    std::vector<Tensor> g;
    if (ta) g.push_back(Tensor::full(in_shape, up.scalar_value()));
    return g;
  });
}

Tensor mean_all(const Tensor& a) {
  if (a.numel() == 0) throw ShapeError("mean_all: empty tensor");
  return scalar_mul(sum_all(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor row_sum(const Tensor& a) {
  check_rank2(a, "row_sum");
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> v(m, 0.0);
  auto av = a.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) v[i] += av[i * n + j];
  const bool ta = a.requires_grad();
  return make_result({m, 1}, std::move(v), {&a}, [ta, n](const Tensor& up) {
    std::vector<Tensor> g;
    if (ta) g.push_back(tile_cols(up, n));
    return g;
  });
}

Tensor col_sum(const Tensor& a) {
  check_rank2(a, "col_sum");
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> v(n, 0.0);
  auto av = a.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) v[j] += av[i * n + j];
  const bool ta = a.requires_grad();
  return make_result({1, n}, std::move(v), {&a}, [ta, m](const Tensor& up) {
    std::vector<Tensor> g;
    if (ta) g.push_back(tile_rows(up, m));
    return g;
  });
}

Tensor row_max_detached(const Tensor& a) {
  check_rank2(a, "row_max_detached");
  const std::size_t m = a.dim(0), n = a.dim(1);
  if (n == 0) throw ShapeError("row_max_detached: empty rows");
  std::vector<double> v(m);
  auto av = a.values();
  for (std::size_t i = 0; i < m; ++i) {
    double mx = av[i * n];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, av[i * n + j]);
    v[i] = mx;
  }
  return Tensor({m, 1}, std::move(v));
}

Tensor tile_cols(const Tensor& a, std::size_t n) {
  check_rank2(a, "tile_cols");
  if (a.dim(1) != 1) throw ShapeError("tile_cols: expected {m,1}, got " + shape_str(a.shape()));
  const std::size_t m = a.dim(0);
  std::vector<double> v(m * n);
  auto av = a.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) v[i * n + j] = av[i];
  const bool ta = a.requires_grad();
  return make_result({m, n}, std::move(v), {&a}, [ta](const Tensor& up) {
    std::vector<Tensor> g;
    if (ta) g.push_back(row_sum(up));
    return g;
  });
}

Tensor tile_rows(const Tensor& a, std::size_t m) {
  check_rank2(a, "tile_rows");
  if (a.dim(0) != 1) throw ShapeError("tile_rows: expected {1,n}, got " + shape_str(a.shape()));
  const std::size_t n = a.dim(1);
  std::vector<double> v(m * n);
  auto av = a.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) v[i * n + j] = av[j];
  const bool ta = a.requires_grad();
  return make_result({m, n}, std::move(v), {&a}, [ta](const Tensor& up) {
    std::vector<Tensor> g;
    if (ta) g.push_back(col_sum(up));
    return g;
  });
}

Tensor add_row_vector(const Tensor& a, const Tensor& bias) {
  check_rank2(a, "add_row_vector");
  check_rank2(bias, "add_row_vector");
  const std::size_t m = a.dim(0), n = a.dim(1);
  if (bias.dim(0) != 1 || bias.dim(1) != n) {
    throw ShapeError("add_row_vector: bias " + shape_str(bias.shape()) +
                     " does not match matrix " + shape_str(a.shape()));
  }
  std::vector<double> v(m * n);
  auto av = a.values(), bv = bias.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) v[i * n + j] = av[i * n + j] + bv[j];
  const bool ta = a.requires_grad(), tb = bias.requires_grad();
  return make_result({m, n}, std::move(v), {&a, &bias}, [ta, tb](const Tensor& up) {
    std::vector<Tensor> g;
    if (ta) g.push_back(up);
    if (tb) g.push_back(col_sum(up));
    return g;
  });
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
  check_rank2(a, "concat_rows");
  check_rank2(b, "concat_rows");
  if (a.dim(1) != b.dim(1)) {
    throw ShapeError("concat_rows: column counts differ, " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  }
  const std::size_t ma = a.dim(0), mb = b.dim(0), n = a.dim(1);
  std::vector<double> v;
  v.reserve((ma + mb) * n);
  v.insert(v.end(), a.values().begin(), a.values().end());
  v.insert(v.end(), b.values().begin(), b.values().end());
  const bool ta = a.requires_grad(), tb = b.requires_grad();
  return make_result({ma + mb, n}, std::move(v), {&a, &b},
                     [ta, tb, ma, mb, n](const Tensor& up) {
                       std::vector<Tensor> g;
                       auto uv = up.values();
                       if (ta) {
                         std::vector<double> ga(uv.begin(), uv.begin() + ma * n);
                         g.emplace_back(Shape{ma, n}, std::move(ga));
                       }
                       if (tb) {
                         std::vector<double> gb(uv.begin() + ma * n, uv.end());
                         g.emplace_back(Shape{mb, n}, std::move(gb));
                       }
                       return g;
                     });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  check_rank2(a, "concat_cols");
  check_rank2(b, "concat_cols");
  if (a.dim(0) != b.dim(0)) {
    throw ShapeError("concat_cols: row counts differ, " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), na = a.dim(1), nb = b.dim(1);
  std::vector<double> v(m * (na + nb));
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < m; ++i) {
    std::copy(av.begin() + i * na, av.begin() + (i + 1) * na, v.begin() + i * (na + nb));
    std::copy(bv.begin() + i * nb, bv.begin() + (i + 1) * nb,
              v.begin() + i * (na + nb) + na);
  }
  const bool ta = a.requires_grad(), tb = b.requires_grad();
  return make_result({m, na + nb}, std::move(v), {&a, &b},
                     [ta, tb, m, na, nb](const Tensor& up) {
                       std::vector<Tensor> g;
                       auto uv = up.values();
                       if (ta) {
                         std::vector<double> ga(m * na);
                         for (std::size_t i = 0; i < m; ++i)
                           std::copy(uv.begin() + i * (na + nb),
                                     uv.begin() + i * (na + nb) + na,
                                     ga.begin() + i * na);
                         g.emplace_back(Shape{m, na}, std::move(ga));
                       }
                       if (tb) {
                         std::vector<double> gb(m * nb);
                         for (std::size_t i = 0; i < m; ++i)
                           std::copy(uv.begin() + i * (na + nb) + na,
                                     uv.begin() + (i + 1) * (na + nb),
                                     gb.begin() + i * nb);
                         g.emplace_back(Shape{m, nb}, std::move(gb));
                       }
                       return g;
                     });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " +
                     shape_str(shape));
  }
  const bool ta = a.requires_grad();
  const Shape in_shape = a.shape();
  return make_result(shape, copy_values(a), {&a}, [ta, in_shape](const Tensor& up) {
    std::vector<Tensor> g;
    if (ta) g.push_back(reshape(up, in_shape));
    return g;
  });
}

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

namespace {

struct ConvDims {
  std::size_t n, cin, h, w, cout, kh, kw, ho, wo;
};

ConvDims conv_dims(const Tensor& input, const Tensor& weight, const Tensor& bias,
                   std::size_t stride, std::size_t pad) {
  if (input.rank() != 4) throw ShapeError("conv2d: input must be {N,C,H,W}");
  if (weight.rank() != 4) throw ShapeError("conv2d: weight must be {Cout,Cin,kh,kw}");
  if (bias.rank() != 1) throw ShapeError("conv2d: bias must be {Cout}");
  ConvDims d;
  d.n = input.dim(0);
  d.cin = input.dim(1);
  d.h = input.dim(2);
  d.w = input.dim(3);
  d.cout = weight.dim(0);
  d.kh = weight.dim(2);
  d.kw = weight.dim(3);
  if (weight.dim(1) != d.cin) throw ShapeError("conv2d: channel mismatch");
  if (bias.dim(0) != d.cout) throw ShapeError("conv2d: bias size mismatch");
  if (d.h + 2 * pad < d.kh || d.w + 2 * pad < d.kw) {
    throw ShapeError("conv2d: kernel larger than padded input");
  }
  d.ho = (d.h + 2 * pad - d.kh) / stride + 1;
  d.wo = (d.w + 2 * pad - d.kw) / stride + 1;
  return d;
}

// Unpacks one sample's patches into a (Cin*kh*kw) x (Ho*Wo) matrix.
void im2col(const double* img, const ConvDims& d, std::size_t stride, std::size_t pad,
            double* cols) {
  const std::size_t patch = d.kh * d.kw;
  for (std::size_t c = 0; c < d.cin; ++c) {
    const double* plane = img + c * d.h * d.w;
    for (std::size_t ki = 0; ki < d.kh; ++ki) {
      for (std::size_t kj = 0; kj < d.kw; ++kj) {
        double* row = cols + (c * patch + ki * d.kw + kj) * (d.ho * d.wo);
        for (std::size_t oy = 0; oy < d.ho; ++oy) {
          const std::ptrdiff_t iy =
              static_cast<std::ptrdiff_t>(oy * stride + ki) - static_cast<std::ptrdiff_t>(pad);
          for (std::size_t ox = 0; ox < d.wo; ++ox) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox * stride + kj) - static_cast<std::ptrdiff_t>(pad);
            double v = 0.0;
            if (iy >= 0 && iy < static_cast<std::ptrdiff_t>(d.h) && ix >= 0 &&
                ix < static_cast<std::ptrdiff_t>(d.w)) {
              v = plane[iy * static_cast<std::ptrdiff_t>(d.w) + ix];
            }
            row[oy * d.wo + ox] = v;
          }
        }
      }
    }
  }
}

// Scatter-adds a (Cin*kh*kw) x (Ho*Wo) gradient back onto one sample's image.
void col2im(const double* cols, const ConvDims& d, std::size_t stride, std::size_t pad,
            double* img) {
  const std::size_t patch = d.kh * d.kw;
  for (std::size_t c = 0; c < d.cin; ++c) {
    double* plane = img + c * d.h * d.w;
    for (std::size_t ki = 0; ki < d.kh; ++ki) {
      for (std::size_t kj = 0; kj < d.kw; ++kj) {
        const double* row = cols + (c * patch + ki * d.kw + kj) * (d.ho * d.wo);
        for (std::size_t oy = 0; oy < d.ho; ++oy) {
          const std::ptrdiff_t iy =
              static_cast<std::ptrdiff_t>(oy * stride + ki) - static_cast<std::ptrdiff_t>(pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(d.h)) continue;
          for (std::size_t ox = 0; ox < d.wo; ++ox) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox * stride + kj) - static_cast<std::ptrdiff_t>(pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(d.w)) continue;
            plane[iy * static_cast<std::ptrdiff_t>(d.w) + ix] += row[oy * d.wo + ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              std::size_t stride, std::size_t pad) {
  if (stride == 0) throw ShapeError("conv2d: stride must be positive");
  const ConvDims d = conv_dims(input, weight, bias, stride, pad);
  const std::size_t ckk = d.cin * d.kh * d.kw;
  const std::size_t spatial = d.ho * d.wo;

  std::vector<double> out(d.n * d.cout * spatial, 0.0);
  std::vector<double> cols(ckk * spatial);
  auto xv = input.values(), wv = weight.values(), bv = bias.values();
  for (std::size_t n = 0; n < d.n; ++n) {
    im2col(xv.data() + n * d.cin * d.h * d.w, d, stride, pad, cols.data());
    double* out_n = out.data() + n * d.cout * spatial;
    gemm_accumulate(wv.data(), cols.data(), out_n, d.cout, ckk, spatial);
    for (std::size_t co = 0; co < d.cout; ++co) {
      const double b = bv[co];
      double* row = out_n + co * spatial;
      for (std::size_t s = 0; s < spatial; ++s) row[s] += b;
    }
  }

  const bool tx = input.requires_grad(), tw = weight.requires_grad(),
             tb = bias.requires_grad();
  const Tensor xc = input.detach(), wc = weight.detach();
  return make_result(
      {d.n, d.cout, d.ho, d.wo}, std::move(out), {&input, &weight, &bias},
      [tx, tw, tb, xc, wc, d, stride, pad, ckk, spatial](const Tensor& up) {
        auto uv = up.values();
        auto xv = xc.values();
        auto wv = wc.values();
        std::vector<double> cols(ckk * spatial);
        std::vector<double> dx, dw, dbv;
        if (tx) dx.assign(xc.numel(), 0.0);
        if (tw) dw.assign(wc.numel(), 0.0);
        if (tb) dbv.assign(d.cout, 0.0);
        std::vector<double> wt;
        if (tx) {
          wt.assign(ckk * d.cout, 0.0);
          for (std::size_t co = 0; co < d.cout; ++co)
            for (std::size_t p = 0; p < ckk; ++p) wt[p * d.cout + co] = wv[co * ckk + p];
        }
        std::vector<double> dcols(tx ? ckk * spatial : 0);
        std::vector<double> colsT(tw ? spatial * ckk : 0);
        for (std::size_t n = 0; n < d.n; ++n) {
          const double* up_n = uv.data() + n * d.cout * spatial;
          if (tw || tx) im2col(xv.data() + n * d.cin * d.h * d.w, d, stride, pad, cols.data());
          if (tw) {
            for (std::size_t p = 0; p < ckk; ++p)
              for (std::size_t s = 0; s < spatial; ++s)
                colsT[s * ckk + p] = cols[p * spatial + s];
            gemm_accumulate(up_n, colsT.data(), dw.data(), d.cout, spatial, ckk);
          }
          if (tb) {
            for (std::size_t co = 0; co < d.cout; ++co) {
              double s = 0.0;
              const double* row = up_n + co * spatial;
              for (std::size_t k = 0; k < spatial; ++k) s += row[k];
              dbv[co] += s;
            }
          }
          if (tx) {
            std::fill(dcols.begin(), dcols.end(), 0.0);
            gemm_accumulate(wt.data(), up_n, dcols.data(), ckk, d.cout, spatial);
            col2im(dcols.data(), d, stride, pad, dx.data() + n * d.cin * d.h * d.w);
          }
        }
        std::vector<Tensor> g;
        if (tx) g.emplace_back(xc.shape(), std::move(dx));
        if (tw) g.emplace_back(wc.shape(), std::move(dw));
        if (tb) g.emplace_back(Shape{d.cout}, std::move(dbv));
        return g;
      });
}

// ---------------------------------------------------------------------------
// Backward pass
// ---------------------------------------------------------------------------

Graph Graph::from(const Tensor& output) {
  Graph g;
  if (!output.requires_grad()) return g;
  // Iterative post-order DFS; parents end up before their consumers.
  std::unordered_set<const detail::Node*> visited;
  std::vector<std::pair<detail::NodePtr, std::size_t>> stack;
  stack.emplace_back(output.node(), 0);
  visited.insert(output.node().get());
  while (!stack.empty()) {
    auto& [node, next_child] = stack.back();
    if (next_child < node->parents.size()) {
      auto& child = node->parents[next_child++];
      if (visited.insert(child.get()).second) stack.emplace_back(child, 0);
    } else {
      g.nodes.push_back(node);
      stack.pop_back();
    }
  }
  return g;
}

std::vector<Tensor> gradients(const Tensor& loss, std::span<const Tensor> leaves) {
  if (loss.numel() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " +
                        shape_str(loss.shape()));
  }
  for (const Tensor& leaf : leaves) {
    if (!leaf.is_leaf()) throw ContractError("backward: non-leaf tensor in leaves");
  }

  std::unordered_map<const detail::Node*, Tensor> grad;
  if (loss.requires_grad()) {
    const Graph graph = Graph::from(loss);
    grad[loss.node().get()] = Tensor::full(loss.shape(), 1.0);
    for (auto it = graph.nodes.rbegin(); it != graph.nodes.rend(); ++it) {
      const detail::NodePtr& node = *it;
      if (!node->grad_fn) continue;
      auto found = grad.find(node.get());
      if (found == grad.end()) continue;
      std::vector<Tensor> parent_grads = node->grad_fn(found->second);
      if (parent_grads.size() != node->parents.size()) {
        throw ContractError("backward: grad_fn arity mismatch");
      }
      for (std::size_t i = 0; i < node->parents.size(); ++i) {
        const detail::Node* p = node->parents[i].get();
        auto slot = grad.find(p);
        if (slot == grad.end()) {
          grad.emplace(p, parent_grads[i]);
        } else {
          slot->second = add(slot->second, parent_grads[i]);
        }
      }
    }
  }

  std::vector<Tensor> out;
  out.reserve(leaves.size());
  for (const Tensor& leaf : leaves) {
    auto it = grad.find(leaf.node().get());
    out.push_back(it != grad.end() ? it->second : Tensor::zeros(leaf.shape()));
  }
  return out;
}

std::unordered_map<std::uint64_t, Tensor> backward(const Tensor& loss,
                                                   std::span<const Tensor> leaves) {
  std::vector<Tensor> grads = gradients(loss, leaves);
  std::unordered_map<std::uint64_t, Tensor> out;
  for (std::size_t i = 0; i < leaves.size(); ++i) out.emplace(leaves[i].leaf_id(), grads[i]);
  return out;
}

}  // namespace genaug

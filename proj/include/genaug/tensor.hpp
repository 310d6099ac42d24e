#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "genaug/errors.hpp"

namespace genaug {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node;
using NodePtr = std::shared_ptr<Node>;

}  // namespace detail

// Dense row-major tensor of 64-bit reals. Values are immutable after
// construction; every op returns a fresh tensor. A tensor participates in
// reverse-mode differentiation when it was created as a leaf (parameter)
// or derives from one.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);
  // Tracked parameter: gets a fresh leaf id.
  static Tensor leaf(Shape shape, std::vector<double> values);

  // Same values, fresh leaf id. Used each training step to re-root the graph
  // on the current parameter values.
  Tensor as_leaf() const;
  // Same values, not tracked (stop-gradient).
  Tensor detach() const;

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t numel() const;
  bool defined() const { return data_ != nullptr; }

  std::span<const double> values() const;
  double at(std::size_t flat_index) const;
  double scalar_value() const;

  bool requires_grad() const { return node_ != nullptr; }
  bool is_leaf() const;
  std::uint64_t leaf_id() const;

  const detail::NodePtr& node() const { return node_; }
  const std::shared_ptr<const std::vector<double>>& storage() const { return data_; }

  // Internal: attach an autodiff node. Used by op implementations.
  static Tensor with_node(Shape shape, std::vector<double> values, detail::NodePtr node);

 private:
  Shape shape_;
  std::shared_ptr<const std::vector<double>> data_;
  detail::NodePtr node_;
};

namespace detail {

// One op record in the computation graph. grad_fn maps the upstream gradient
// (w.r.t. this node's output) to gradients w.r.t. each tracked parent, in
// parent order. Leaves have no grad_fn.
struct Node {
  std::uint64_t id = 0;
  Shape shape;
  std::vector<NodePtr> parents;
  std::function<std::vector<Tensor>(const Tensor& upstream)> grad_fn;

  bool is_leaf() const { return parents.empty() && !grad_fn; }
};

std::uint64_t next_node_id();

}  // namespace detail

// Topologically ordered view of the graph reaching `output`; every node's
// parents precede it.
struct Graph {
  std::vector<detail::NodePtr> nodes;
  static Graph from(const Tensor& output);
};

// Reverse-mode gradients of a scalar loss w.r.t. the given leaves, aligned by
// position. Leaves not on any path to the loss get zero gradients.
std::vector<Tensor> gradients(const Tensor& loss, std::span<const Tensor> leaves);
// Same, keyed by leaf id.
std::unordered_map<std::uint64_t, Tensor> backward(const Tensor& loss,
                                                   std::span<const Tensor> leaves);

// ---------------------------------------------------------------------------
// Elementwise and matrix ops. All shapes are explicit: the only broadcast is
// add_row_vector (matrix + 1xN bias row).
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);  // errors on zero divisor
Tensor neg(const Tensor& a);
Tensor scalar_mul(const Tensor& a, double c);
Tensor scalar_add(const Tensor& a, double c);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor relu(const Tensor& a);
Tensor exp_op(const Tensor& a);
Tensor log_op(const Tensor& a);   // errors on non-positive input
Tensor sqrt_op(const Tensor& a);  // errors on negative input

Tensor sum_all(const Tensor& a);   // -> scalar (rank 0)
Tensor mean_all(const Tensor& a);  // -> scalar (rank 0)
Tensor row_sum(const Tensor& a);   // {m,n} -> {m,1}
Tensor col_sum(const Tensor& a);   // {m,n} -> {1,n}
// Row-wise max as an untracked constant {m,1}; used for stable log-sum-exp
// shifts, where treating the max as constant leaves gradients exact.
Tensor row_max_detached(const Tensor& a);

Tensor tile_cols(const Tensor& a, std::size_t n);  // {m,1} -> {m,n}
Tensor tile_rows(const Tensor& a, std::size_t m);  // {1,n} -> {m,n}
Tensor add_row_vector(const Tensor& a, const Tensor& bias);  // {m,n} + {1,n}

Tensor concat_rows(const Tensor& a, const Tensor& b);  // {m,n},{k,n} -> {m+k,n}
Tensor concat_cols(const Tensor& a, const Tensor& b);  // {m,n},{m,k} -> {m,n+k}
Tensor reshape(const Tensor& a, Shape shape);

// 2-D convolution over {N,C,H,W} with kernel {Cout,Cin,kh,kw}, zero padding.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              std::size_t stride, std::size_t pad);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

// c[m x n] += a[m x k] @ b[k x n]
void gemm_accumulate(const double* a, const double* b, double* c, std::size_t m,
                     std::size_t k, std::size_t n);

bool all_finite(const Tensor& a);

}  // namespace genaug

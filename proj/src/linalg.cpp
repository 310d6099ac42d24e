#include "genaug/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace genaug {

double frobenius_norm(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v * v;
  return std::sqrt(s);
}

double svd_nuclear_norm(const Tensor& m) {
  if (m.rank() != 2) {
    throw ShapeError("svd_nuclear_norm: expected rank-2 tensor, got " +
                     shape_str(m.shape()));
  }
  if (!all_finite(m)) throw NumericError("svd_nuclear_norm: non-finite entries");

  // One-sided Jacobi orthogonalizes the columns of a tall matrix; the final
  // column norms are the singular values. Work on the orientation with
  // rows >= cols (nuclear norm is transpose-invariant).
  std::size_t rows = m.dim(0), cols = m.dim(1);
  if (rows == 0 || cols == 0) return 0.0;
  std::vector<double> a(rows * cols);
  auto mv = m.values();
  if (rows >= cols) {
    std::copy(mv.begin(), mv.end(), a.begin());
  } else {
    std::swap(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) a[i * cols + j] = mv[j * rows + i];
  }

  auto col_dot = [&](std::size_t p, std::size_t q) {
    double s = 0.0;
    for (std::size_t i = 0; i < rows; ++i) s += a[i * cols + p] * a[i * cols + q];
    return s;
  };

  const double tol = 1e-14;
  for (int sweep = 0; sweep < 60; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < cols; ++p) {
      for (std::size_t q = p + 1; q < cols; ++q) {
        const double app = col_dot(p, p);
        const double aqq = col_dot(q, q);
        const double apq = col_dot(p, q);
        if (std::abs(apq) <= tol * std::sqrt(app * aqq)) continue;
        rotated = true;
        const double tau = (aqq - app) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < rows; ++i) {
          const double vp = a[i * cols + p];
          const double vq = a[i * cols + q];
          a[i * cols + p] = c * vp - s * vq;
          a[i * cols + q] = s * vp + c * vq;
        }
      }
    }
    if (!rotated) break;
  }

  std::vector<double> sigma(cols);
  double sigma_max = 0.0;
  for (std::size_t j = 0; j < cols; ++j) {
    sigma[j] = std::sqrt(col_dot(j, j));
    sigma_max = std::max(sigma_max, sigma[j]);
  }
  double sum = 0.0;
  for (double s : sigma) {
    if (s >= 1e-12 * sigma_max) sum += s;
  }
  return sum;
}

Tensor center_and_normalize(const Tensor& a) {
  if (a.rank() != 2) {
    throw ShapeError("center_and_normalize: expected rank-2 tensor, got " +
                     shape_str(a.shape()));
  }
  const std::size_t p = a.dim(0), n = a.dim(1);
  if (n < 2) throw ShapeError("center_and_normalize: need at least 2 examples");
  if (!all_finite(a)) throw NumericError("center_and_normalize: non-finite entries");

  auto av = a.values();
  std::vector<double> out(p * n);
  for (std::size_t i = 0; i < p; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += av[i * n + j];
    mean /= static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = av[i * n + j] - mean;
  }

  double fro = 0.0;
  for (double v : out) fro += v * v;
  fro = std::sqrt(fro);
  const double fro_orig = frobenius_norm(a);
  if (fro == 0.0 || fro <= 1e-12 * fro_orig) {
    throw DegenerateInputError("center_and_normalize: matrix vanishes after centering");
  }
  for (double& v : out) v /= fro;
  return Tensor({p, n}, std::move(out));
}

}  // namespace genaug

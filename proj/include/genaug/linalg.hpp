#pragma once

#include "genaug/tensor.hpp"

namespace genaug {

// Sum of singular values of a real matrix, via one-sided Jacobi on the side
// with fewer rows. Singular values below 1e-12 * sigma_max are clamped to 0.
double svd_nuclear_norm(const Tensor& m);

// Centers each feature row to zero mean over the examples, then divides the
// whole matrix by its Frobenius norm. Matrices that vanish after centering
// (constant rows) are rejected.
Tensor center_and_normalize(const Tensor& a);

double frobenius_norm(const Tensor& a);

}  // namespace genaug

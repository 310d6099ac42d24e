#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "genaug/rng.hpp"
#include "genaug/tensor.hpp"

namespace testutil {

// Scalar loss as a function of leaf values; rebuilt per evaluation so finite
// differences see a fresh graph.
using LossFn =
    std::function<genaug::Tensor(const std::vector<genaug::Tensor>& leaves)>;

struct FdReport {
  double max_rel_err = 0.0;
  std::string where;
};

inline std::vector<genaug::Tensor> make_leaves(
    const std::vector<genaug::Shape>& shapes,
    const std::vector<std::vector<double>>& values) {
  std::vector<genaug::Tensor> leaves;
  leaves.reserve(shapes.size());
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    leaves.push_back(genaug::Tensor::leaf(shapes[i], values[i]));
  }
  return leaves;
}

// Central finite differences on every element of every leaf. Relative error
// uses a floor so near-zero gradient pairs compare absolutely.
inline FdReport fd_check(const LossFn& f, const std::vector<genaug::Shape>& shapes,
                         std::vector<std::vector<double>> values,
                         double step = 1e-5, double floor = 1e-6) {
  FdReport report;
  auto leaves = make_leaves(shapes, values);
  const genaug::Tensor loss = f(leaves);
  const std::vector<genaug::Tensor> grads =
      genaug::gradients(loss, std::span<const genaug::Tensor>(leaves));

  for (std::size_t li = 0; li < shapes.size(); ++li) {
    for (std::size_t j = 0; j < values[li].size(); ++j) {
      const double saved = values[li][j];
      values[li][j] = saved + step;
      const double up = f(make_leaves(shapes, values)).scalar_value();
      values[li][j] = saved - step;
      const double down = f(make_leaves(shapes, values)).scalar_value();
      values[li][j] = saved;
      const double fd = (up - down) / (2.0 * step);
      const double an = grads[li].at(j);
      const double denom = std::max({std::abs(fd), std::abs(an), floor});
      const double rel = std::abs(fd - an) / denom;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        std::ostringstream os;
        os << "leaf " << li << " elem " << j << ": analytic " << an << " fd "
           << fd;
        report.where = os.str();
      }
    }
  }
  return report;
}

inline std::vector<double> rand_values(std::size_t n, genaug::SampleRng& rng,
                                       double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

inline genaug::Tensor rand_tensor(const genaug::Shape& shape,
                                  genaug::SampleRng& rng, double lo = -1.0,
                                  double hi = 1.0) {
  return genaug::Tensor(shape, rand_values(genaug::shape_numel(shape), rng, lo, hi));
}

// Unit-norm rows, well away from the zero-norm guard.
inline genaug::Tensor rand_unit_rows(std::size_t n, std::size_t d,
                                     genaug::SampleRng& rng) {
  std::vector<double> v(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      v[i * d + j] = rng.normal();
      sq += v[i * d + j] * v[i * d + j];
    }
    const double norm = std::sqrt(sq);
    for (std::size_t j = 0; j < d; ++j) v[i * d + j] /= norm;
  }
  return genaug::Tensor({n, d}, std::move(v));
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<unsigned> counter{0};
    const auto base = std::filesystem::temp_directory_path();
    path_ = base / ("genaug_test_" + tag + "_" + std::to_string(::getpid()) +
                    "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::string str(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string read_file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline bool files_equal(const std::filesystem::path& a,
                        const std::filesystem::path& b) {
  return read_file_bytes(a) == read_file_bytes(b);
}

// 99% binomial interval half-width around p over n draws.
inline double binom99(double p, std::size_t n) {
  return 2.576 * std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

}  // namespace testutil

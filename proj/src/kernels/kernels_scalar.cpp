#include "atscc/kernels.hpp"

#include <algorithm>

namespace atscc::kernels::scalar {

void gemm_nn(MatView a, MatView b, MutMatView c, bool accumulate) {
  for (std::size_t i = 0; i < a.rows; ++i) {
    double* crow = c.data + i * c.ld;
    if (!accumulate) std::fill(crow, crow + b.cols, 0.0);
    const double* arow = a.data + i * a.ld;
    for (std::size_t p = 0; p < a.cols; ++p) {
      const double av = arow[p];
      const double* brow = b.data + p * b.ld;
      for (std::size_t j = 0; j < b.cols; ++j) crow[j] += av * brow[j];
    }
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

}  // namespace atscc::kernels::scalar

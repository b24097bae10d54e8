#pragma once

// Dense double-precision inner loops shared by the tensor engine, the loss
// and the evaluation code. Each kernel has a scalar reference implementation
// and an AVX2/FMA variant; the variant is picked once at startup from CPUID
// and can be overridden for equivalence testing.

#include <cstddef>
#include <span>
#include <string_view>

namespace atscc::kernels {

enum class Isa { scalar, avx2 };

/// ISA used by the dispatching entry points below.
Isa active_isa();

/// Forces a specific ISA. Requesting avx2 on a CPU without AVX2+FMA falls
/// back to scalar. Returns the ISA actually selected.
Isa set_isa(Isa isa);

/// True when the running CPU supports the AVX2 kernels.
bool avx2_available();

std::string_view isa_name(Isa isa);

/// Row-major matrix view. `ld` is the row stride in elements.
struct MatView {
  const double* data;
  std::size_t rows;
  std::size_t cols;
  std::size_t ld;
};

struct MutMatView {
  double* data;
  std::size_t rows;
  std::size_t cols;
  std::size_t ld;
};

// C = op(A) * op(B), or C += op(A) * op(B) when accumulate is set.
// The suffix names the transposition of A and B (n = as stored, t = transposed).
void gemm_nn(MatView a, MatView b, MutMatView c, bool accumulate);
void gemm_nt(MatView a, MatView b, MutMatView c, bool accumulate);
void gemm_tn(MatView a, MatView b, MutMatView c, bool accumulate);

double dot(std::span<const double> a, std::span<const double> b);
double squared_distance(std::span<const double> a, std::span<const double> b);
// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

namespace scalar {
void gemm_nn(MatView a, MatView b, MutMatView c, bool accumulate);
double dot(std::span<const double> a, std::span<const double> b);
double squared_distance(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
}  // namespace scalar

namespace avx2 {
void gemm_nn(MatView a, MatView b, MutMatView c, bool accumulate);
double dot(std::span<const double> a, std::span<const double> b);
double squared_distance(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
}  // namespace avx2

}  // namespace atscc::kernels

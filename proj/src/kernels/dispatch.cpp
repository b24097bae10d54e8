#include <atomic>
#include <cstdlib>
#include <cstring>
#include <vector>

#include "atscc/kernels.hpp"

namespace atscc::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa initial_isa() {
  const char* force = std::getenv("ATSCC_FORCE_SCALAR");
  if (force != nullptr && std::strcmp(force, "0") != 0) return Isa::scalar;
  return cpu_has_avx2() ? Isa::avx2 : Isa::scalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{initial_isa()};
  return isa;
}

// Copies the transpose of `m` into `buf` and returns a view of it.
MatView transposed(MatView m, std::vector<double>& buf) {
  buf.resize(m.rows * m.cols);
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t j = 0; j < m.cols; ++j) buf[j * m.rows + i] = m.data[i * m.ld + j];
  }
  return {buf.data(), m.cols, m.rows, m.rows};
}

}  // namespace

bool avx2_available() {
  static const bool available = cpu_has_avx2();
  return available;
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

Isa set_isa(Isa isa) {
  if (isa == Isa::avx2 && !avx2_available()) isa = Isa::scalar;
  current().store(isa, std::memory_order_relaxed);
  return isa;
}

std::string_view isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

void gemm_nn(MatView a, MatView b, MutMatView c, bool accumulate) {
  if (active_isa() == Isa::avx2) {
    avx2::gemm_nn(a, b, c, accumulate);
  } else {
    scalar::gemm_nn(a, b, c, accumulate);
  }
}

void gemm_nt(MatView a, MatView b, MutMatView c, bool accumulate) {
  thread_local std::vector<double> buf;
  gemm_nn(a, transposed(b, buf), c, accumulate);
}

void gemm_tn(MatView a, MatView b, MutMatView c, bool accumulate) {
  thread_local std::vector<double> buf;
  gemm_nn(transposed(a, buf), b, c, accumulate);
}

double dot(std::span<const double> a, std::span<const double> b) {
  return active_isa() == Isa::avx2 ? avx2::dot(a, b) : scalar::dot(a, b);
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  return active_isa() == Isa::avx2 ? avx2::squared_distance(a, b) : scalar::squared_distance(a, b);
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  if (active_isa() == Isa::avx2) {
    avx2::axpy(alpha, x, y);
  } else {
    scalar::axpy(alpha, x, y);
  }
}

}  // namespace atscc::kernels

#include <doctest.h>

#include <cmath>
#include <random>

#include "atscc/kernels.hpp"
#include "support/oracles.hpp"

using namespace atscc::kernels;

namespace {

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

std::vector<double> naive_gemm(const std::vector<double>& a, const std::vector<double>& b, std::size_t m,
                               std::size_t k, std::size_t n) {
  std::vector<double> c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < k; ++p) c[i * n + j] += a[i * k + p] * b[p * n + j];
  return c;
}

std::vector<double> transposed(const std::vector<double>& a, std::size_t r, std::size_t c) {
  std::vector<double> t(a.size());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) t[j * r + i] = a[i * c + j];
  return t;
}

struct IsaRestore {
  Isa saved = active_isa();
  ~IsaRestore() { set_isa(saved); }
};

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("isa selection") {
    IsaRestore restore;
    CHECK(set_isa(Isa::scalar) == Isa::scalar);
    CHECK(active_isa() == Isa::scalar);
    CHECK(set_isa(Isa::avx2) == (avx2_available() ? Isa::avx2 : Isa::scalar));
    CHECK(isa_name(Isa::scalar) == "scalar");
  }

  TEST_CASE("gemm variants agree with a naive product") {
    IsaRestore restore;
    std::mt19937_64 rng(51);
    std::uniform_int_distribution<std::size_t> dim(1, 37);
    for (Isa isa : {Isa::scalar, Isa::avx2}) {
      set_isa(isa);
      for (int trial = 0; trial < 60; ++trial) {
        const std::size_t m = dim(rng), k = dim(rng), n = dim(rng);
        auto a = gen::gaussian(rng, m * k);
        auto b = gen::gaussian(rng, k * n);
        auto ref = naive_gemm(a, b, m, k, n);

        std::vector<double> c(m * n, 7.0);
        gemm_nn({a.data(), m, k, k}, {b.data(), k, n, n}, {c.data(), m, n, n}, false);
        CHECK(max_abs_diff(c, ref) < 1e-12 * static_cast<double>(k + 1) * 10);

        auto bt = transposed(b, k, n);
        std::vector<double> c2(m * n, 0.0);
        gemm_nt({a.data(), m, k, k}, {bt.data(), n, k, k}, {c2.data(), m, n, n}, false);
        CHECK(max_abs_diff(c2, ref) < 1e-11);

        auto at = transposed(a, m, k);
        std::vector<double> c3(m * n, 1.0);
        gemm_tn({at.data(), k, m, m}, {b.data(), k, n, n}, {c3.data(), m, n, n}, true);
        for (double& v : c3) v -= 1.0;
        CHECK(max_abs_diff(c3, ref) < 1e-11);
      }
    }
  }

  TEST_CASE("gemm respects leading dimensions") {
    IsaRestore restore;
    std::mt19937_64 rng(52);
    for (Isa isa : {Isa::scalar, Isa::avx2}) {
      set_isa(isa);
      auto big_a = gen::gaussian(rng, 10 * 12);
      auto big_b = gen::gaussian(rng, 12 * 9);
      std::vector<double> a(5 * 6), b(6 * 7);
      for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 6; ++j) a[i * 6 + j] = big_a[(i + 2) * 12 + j + 3];
      for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 7; ++j) b[i * 7 + j] = big_b[(i + 1) * 9 + j + 1];
      auto ref = naive_gemm(a, b, 5, 6, 7);
      std::vector<double> c(8 * 11, -3.0);
      gemm_nn({big_a.data() + 2 * 12 + 3, 5, 6, 12}, {big_b.data() + 9 + 1, 6, 7, 9}, {c.data() + 11 + 2, 5, 7, 11},
              false);
      for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 7; ++j) CHECK(std::abs(c[(i + 1) * 11 + j + 2] - ref[i * 7 + j]) < 1e-12);
      CHECK(c[0] == -3.0);
      CHECK(c[11 + 9] == -3.0);
    }
  }

  TEST_CASE("scalar and avx2 vector kernels are equivalent") {
    if (!avx2_available()) return;
    std::mt19937_64 rng(53);
    for (std::size_t n = 0; n < 70; ++n) {
      auto x = gen::gaussian(rng, n);
      auto y = gen::gaussian(rng, n);
      CHECK(std::abs(scalar::dot(x, y) - avx2::dot(x, y)) < 1e-12 * static_cast<double>(n + 1));
      CHECK(std::abs(scalar::squared_distance(x, y) - avx2::squared_distance(x, y)) <
            1e-12 * static_cast<double>(n + 1));
      auto y1 = y, y2 = y;
      scalar::axpy(0.37, x, y1);
      avx2::axpy(0.37, x, y2);
      CHECK(max_abs_diff(y1, y2) < 1e-14);

      const std::size_t m = n % 9 + 1, k = n % 13 + 1, p = n % 11 + 1;
      auto a = gen::gaussian(rng, m * k);
      auto b = gen::gaussian(rng, k * p);
      std::vector<double> c1(m * p, 0.5), c2(m * p, 0.5);
      scalar::gemm_nn({a.data(), m, k, k}, {b.data(), k, p, p}, {c1.data(), m, p, p}, true);
      avx2::gemm_nn({a.data(), m, k, k}, {b.data(), k, p, p}, {c2.data(), m, p, p}, true);
      CHECK(max_abs_diff(c1, c2) < 1e-12);
    }
  }

  TEST_CASE("dispatching entry points") {
    IsaRestore restore;
    std::vector<double> x{1, 2, 3, 4, 5}, y{5, 4, 3, 2, 1};
    for (Isa isa : {Isa::scalar, Isa::avx2}) {
      set_isa(isa);
      CHECK(dot(x, y) == 35.0);
      CHECK(squared_distance(x, y) == 40.0);
      auto z = y;
      axpy(2.0, x, z);
      CHECK(z == std::vector<double>{7, 8, 9, 10, 11});
    }
  }
}

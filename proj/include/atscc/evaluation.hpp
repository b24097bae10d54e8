#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "atscc/encoder.hpp"

namespace atscc::eval {

/// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> v);

  std::span<const double> row(std::size_t i) const { return {values.data() + i * cols, cols}; }
  std::span<double> row(std::size_t i) { return {values.data() + i * cols, cols}; }
  double& operator()(std::size_t i, std::size_t j) { return values[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
  Matrix select_rows(std::span<const std::size_t> idx) const;
};

/// Instance representation: the vector at each instance's last valid
/// timestep.
Matrix extract_instance_repr(std::span<const encoder::ReprSeq> seqs);

struct SvmParams {
  double c = 1.0;
  /// <= 0 selects 1 / (K * variance of the training entries).
  double gamma = 0.0;
  double tol = 1e-3;
  std::size_t max_iter = 1000000;
};

struct BinarySvm {
  int positive_class = 0;
  std::vector<double> coef;  // y_i * alpha_i per training row
  double rho = 0.0;
};

/// One-vs-rest RBF SVM trained by SMO with second-order working-set
/// selection.
struct SvmModel {
  std::vector<int> classes;
  std::vector<BinarySvm> machines;
  Matrix support;
  double gamma = 1.0;

  std::vector<double> decision_values(std::span<const double> x) const;
  int predict(std::span<const double> x) const;
  std::vector<int> predict(const Matrix& x) const;
};

double default_gamma(const Matrix& x);
double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma);

/// Trains one binary machine on labels y in {-1, +1} with a precomputed
/// kernel matrix. Returns coefficients y_i * alpha_i and rho so that the
/// decision value is sum_i coef_i K(x_i, x) - rho.
BinarySvm smo_solve(const Matrix& kernel, std::span<const int> y, const SvmParams& params);

SvmModel svm_rbf_fit(const Matrix& x, std::span<const int> labels, const SvmParams& params = {});
std::vector<int> svm_rbf_predict(const SvmModel& model, const Matrix& x);
double accuracy(std::span<const int> predicted, std::span<const int> truth);

struct KMeansResult {
  std::vector<int> assignments;
  Matrix centroids;
  double inertia = 0.0;
  std::size_t iterations = 0;
  /// Inertia after each Lloyd iteration of the winning restart.
  std::vector<double> inertia_history;
};

struct KMeansParams {
  std::size_t restarts = 10;
  std::size_t max_iter = 300;
  double tol = 1e-8;
};

/// k-means++ seeding and Lloyd iterations; best inertia over restarts.
/// Throws when k is 0 or exceeds the number of rows.
KMeansResult kmeans(const Matrix& x, std::size_t k, std::uint64_t seed, const KMeansParams& params = {});

struct Contingency {
  std::vector<int> a_labels;
  std::vector<int> b_labels;
  std::vector<std::size_t> counts;  // a_labels.size() x b_labels.size()
  std::size_t total = 0;

  std::size_t at(std::size_t i, std::size_t j) const { return counts[i * b_labels.size() + j]; }
};

Contingency contingency(std::span<const int> a, std::span<const int> b);
/// Natural-log mutual information.
double mutual_information(std::span<const int> a, std::span<const int> b);
double entropy(std::span<const int> a);
/// MI / sqrt(H(a) H(b)); 1 when both labelings are constant, 0 when exactly
/// one is.
double nmi(std::span<const int> a, std::span<const int> b);
double ari(std::span<const int> a, std::span<const int> b);

struct SweepPoint {
  std::size_t k = 0;
  double mi = 0.0;
};

/// MI between ground truth and k-means assignments for k = k_min, k_min +
/// step, ... <= k_max, using the same seed for every k.
std::vector<SweepPoint> mi_sweep(const Matrix& x, std::span<const int> labels, std::size_t k_min, std::size_t k_max,
                                 std::size_t step, std::uint64_t seed);
void write_sweep_csv(const std::filesystem::path& path, std::span<const SweepPoint> points);

struct Projection {
  Matrix coords;
  std::vector<double> explained_ratio;
};

/// Mean-centred PCA. Each component's sign makes its largest-magnitude
/// loading positive.
Projection pca_project(const Matrix& x, std::size_t dims = 2);
void write_projection_csv(const std::filesystem::path& path, std::span<const std::string> ids,
                          std::span<const int> labels, const Projection& proj);

struct MetricRow {
  std::string dataset;
  double epsilon = 0.0;
  double tau = 0.0;
  std::uint64_t seed = 0;
  double acc = 0.0;
  double nmi = 0.0;
  double ari = 0.0;
};

inline constexpr char kMetricsHeader[] = "dataset,epsilon,tau,seed,acc,nmi,ari";
void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricRow> rows);

struct Summary {
  double mean = 0.0;
  double stddev = 0.0;
};
/// Mean and sample standard deviation (0 for fewer than two values).
Summary summarize(std::span<const double> values);

/// Representation file: magic, version, N, K, then per instance the id,
/// label (-1 unlabeled) and K float32 values.
inline constexpr char kReprMagic[] = "ATSR";
void write_reprs(const std::filesystem::path& path, std::span<const std::string> ids, std::span<const int> labels,
                 const Matrix& reprs);
struct ReprFile {
  std::vector<std::string> ids;
  std::vector<int> labels;
  Matrix reprs;
};
ReprFile read_reprs(const std::filesystem::path& path);

}  // namespace atscc::eval

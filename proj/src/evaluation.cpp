#include "atscc/evaluation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>

#include "atscc/io.hpp"
#include "atscc/kernels.hpp"

namespace atscc::eval {

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> v) : rows(r), cols(c), values(std::move(v)) {
  if (values.size() != r * c) throw std::invalid_argument("matrix value count does not match shape");
}

Matrix Matrix::select_rows(std::span<const std::size_t> idx) const {
  Matrix out(idx.size(), cols);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    auto src = row(idx[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

Matrix extract_instance_repr(std::span<const encoder::ReprSeq> seqs) {
  if (seqs.empty()) return {};
  Matrix out(seqs.size(), seqs.front().cols);
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    if (seqs[i].rows == 0) throw std::invalid_argument("empty representation sequence");
    if (seqs[i].cols != out.cols) throw std::invalid_argument("inconsistent representation width");
    auto last = seqs[i].last();
    std::copy(last.begin(), last.end(), out.row(i).begin());
  }
  return out;
}

// ---------------------------------------------------------------- SVM

double default_gamma(const Matrix& x) {
  const double n = static_cast<double>(x.values.size());
  if (n == 0) return 1.0;
  double mean = std::accumulate(x.values.begin(), x.values.end(), 0.0) / n;
  double var = 0.0;
  for (double v : x.values) var += (v - mean) * (v - mean);
  var /= n;
  if (var <= 0.0) return 1.0;
  return 1.0 / (static_cast<double>(x.cols) * var);
}

double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma) {
  return std::exp(-gamma * kernels::squared_distance(a, b));
}

BinarySvm smo_solve(const Matrix& kernel, std::span<const int> y, const SvmParams& params) {
  const std::size_t n = y.size();
  if (kernel.rows != n || kernel.cols != n) throw std::invalid_argument("kernel matrix shape mismatch");
  const double c = params.c;
  constexpr double kTau = 1e-12;

  std::vector<double> alpha(n, 0.0);
  std::vector<double> grad(n, -1.0);
  auto q = [&](std::size_t i, std::size_t j) { return y[i] * y[j] * kernel(i, j); };
  auto upper = [&](std::size_t t) { return alpha[t] >= c; };
  auto lower = [&](std::size_t t) { return alpha[t] <= 0.0; };

  for (std::size_t iter = 0; iter < params.max_iter; ++iter) {
    double gmax = -std::numeric_limits<double>::infinity();
    std::ptrdiff_t gi = -1;
    for (std::size_t t = 0; t < n; ++t) {
      if (y[t] == 1) {
        if (!upper(t) && -grad[t] >= gmax) {
          gmax = -grad[t];
          gi = static_cast<std::ptrdiff_t>(t);
        }
      } else if (!lower(t) && grad[t] >= gmax) {
        gmax = grad[t];
        gi = static_cast<std::ptrdiff_t>(t);
      }
    }
    if (gi < 0) break;
    const auto i = static_cast<std::size_t>(gi);

    double gmax2 = -std::numeric_limits<double>::infinity();
    std::ptrdiff_t gj = -1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < n; ++t) {
      if (y[t] == 1) {
        if (lower(t)) continue;
        const double diff = gmax + grad[t];
        gmax2 = std::max(gmax2, grad[t]);
        if (diff > 0) {
          double quad = kernel(i, i) + kernel(t, t) - 2.0 * y[i] * q(i, t);
          double obj = -(diff * diff) / (quad > 0 ? quad : kTau);
          if (obj <= best) {
            best = obj;
            gj = static_cast<std::ptrdiff_t>(t);
          }
        }
      } else {
        if (upper(t)) continue;
        const double diff = gmax - grad[t];
        gmax2 = std::max(gmax2, -grad[t]);
        if (diff > 0) {
          double quad = kernel(i, i) + kernel(t, t) + 2.0 * y[i] * q(i, t);
          double obj = -(diff * diff) / (quad > 0 ? quad : kTau);
          if (obj <= best) {
            best = obj;
            gj = static_cast<std::ptrdiff_t>(t);
          }
        }
      }
    }
    if (gmax + gmax2 < params.tol || gj < 0) break;
    const auto j = static_cast<std::size_t>(gj);

    const double old_i = alpha[i];
    const double old_j = alpha[j];
    if (y[i] != y[j]) {
      double quad = kernel(i, i) + kernel(j, j) + 2.0 * q(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) {
          alpha[j] = 0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = -diff;
      }
      if (diff > 0) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = c - diff;
        }
      } else if (alpha[j] > c) {
        alpha[j] = c;
        alpha[i] = c + diff;
      }
    } else {
      double quad = kernel(i, i) + kernel(j, j) - 2.0 * q(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > c) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = sum - c;
        }
      } else if (alpha[j] < 0) {
        alpha[j] = 0;
        alpha[i] = sum;
      }
      if (sum > c) {
        if (alpha[j] > c) {
          alpha[j] = c;
          alpha[i] = sum - c;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = sum;
      }
    }
    const double di = alpha[i] - old_i;
    const double dj = alpha[j] - old_j;
    for (std::size_t t = 0; t < n; ++t) grad[t] += q(i, t) * di + q(j, t) * dj;
  }

  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double free_sum = 0.0;
  std::size_t free_count = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (upper(t)) {
      if (y[t] == -1) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (lower(t)) {
      if (y[t] == 1) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++free_count;
      free_sum += yg;
    }
  }
  BinarySvm out;
  out.rho = free_count > 0 ? free_sum / static_cast<double>(free_count) : (ub + lb) / 2.0;
  out.coef.resize(n);
  for (std::size_t t = 0; t < n; ++t) out.coef[t] = y[t] * alpha[t];
  return out;
}

SvmModel svm_rbf_fit(const Matrix& x, std::span<const int> labels, const SvmParams& params) {
  if (x.rows != labels.size()) throw std::invalid_argument("svm: label count does not match rows");
  if (x.rows == 0) throw std::invalid_argument("svm: empty training set");
  SvmModel model;
  model.classes.assign(labels.begin(), labels.end());
  std::sort(model.classes.begin(), model.classes.end());
  model.classes.erase(std::unique(model.classes.begin(), model.classes.end()), model.classes.end());
  if (model.classes.size() < 2) throw std::invalid_argument("svm: need at least two classes");
  model.gamma = params.gamma > 0 ? params.gamma : default_gamma(x);
  model.support = x;

  const std::size_t n = x.rows;
  Matrix k(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    k(i, i) = 1.0;
    for (std::size_t j = 0; j < i; ++j) k(i, j) = k(j, i) = rbf_kernel(x.row(i), x.row(j), model.gamma);
  }
  std::vector<int> y(n);
  for (int cls : model.classes) {
    for (std::size_t i = 0; i < n; ++i) y[i] = labels[i] == cls ? 1 : -1;
    BinarySvm m = smo_solve(k, y, params);
    m.positive_class = cls;
    model.machines.push_back(std::move(m));
  }
  return model;
}

std::vector<double> SvmModel::decision_values(std::span<const double> x) const {
  std::vector<double> kx(support.rows);
  for (std::size_t i = 0; i < support.rows; ++i) kx[i] = rbf_kernel(support.row(i), x, gamma);
  std::vector<double> out;
  out.reserve(machines.size());
  for (const auto& m : machines) out.push_back(kernels::dot(m.coef, kx) - m.rho);
  return out;
}

int SvmModel::predict(std::span<const double> x) const {
  auto dv = decision_values(x);
  auto best = std::max_element(dv.begin(), dv.end());
  return classes[static_cast<std::size_t>(best - dv.begin())];
}

std::vector<int> SvmModel::predict(const Matrix& x) const {
  if (x.cols != support.cols) throw std::invalid_argument("svm: feature width mismatch");
  std::vector<int> out(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) out[i] = predict(x.row(i));
  return out;
}

std::vector<int> svm_rbf_predict(const SvmModel& model, const Matrix& x) { return model.predict(x); }

double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size() || truth.empty()) throw std::invalid_argument("accuracy: size mismatch");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += predicted[i] == truth[i];
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

// ---------------------------------------------------------------- k-means

namespace {

struct LloydRun {
  std::vector<int> assign;
  Matrix centroids;
  double inertia = 0.0;
  std::size_t iterations = 0;
  std::vector<double> history;
};

Matrix kmeans_pp(const Matrix& x, std::size_t k, std::mt19937_64& rng) {
  const std::size_t n = x.rows;
  Matrix c(k, x.cols);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::size_t first = pick(rng);
  std::copy(x.row(first).begin(), x.row(first).end(), c.row(0).begin());
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = kernels::squared_distance(x.row(i), c.row(0));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t m = 1; m < k; ++m) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t chosen = 0;
    if (total <= 0.0) {
      chosen = pick(rng);
    } else {
      double r = u(rng) * total;
      chosen = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        r -= d2[i];
        if (r < 0.0 && d2[i] > 0.0) {
          chosen = i;
          break;
        }
      }
      while (d2[chosen] <= 0.0 && chosen > 0) --chosen;
    }
    std::copy(x.row(chosen).begin(), x.row(chosen).end(), c.row(m).begin());
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], kernels::squared_distance(x.row(i), c.row(m)));
  }
  return c;
}

double assign_points(const Matrix& x, const Matrix& c, std::vector<int>& assign) {
  double inertia = 0.0;
  for (std::size_t i = 0; i < x.rows; ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (std::size_t m = 0; m < c.rows; ++m) {
      double d = kernels::squared_distance(x.row(i), c.row(m));
      if (d < best) {
        best = d;
        arg = static_cast<int>(m);
      }
    }
    assign[i] = arg;
    inertia += best;
  }
  return inertia;
}

LloydRun lloyd(const Matrix& x, Matrix centroids, const KMeansParams& params) {
  LloydRun run;
  run.assign.assign(x.rows, 0);
  run.centroids = std::move(centroids);
  const std::size_t k = run.centroids.rows;
  run.inertia = assign_points(x, run.centroids, run.assign);
  for (std::size_t iter = 0; iter < params.max_iter; ++iter) {
    Matrix next(k, x.cols);
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < x.rows; ++i) {
      auto m = static_cast<std::size_t>(run.assign[i]);
      kernels::axpy(1.0, x.row(i), next.row(m));
      ++count[m];
    }
    double movement = 0.0;
    for (std::size_t m = 0; m < k; ++m) {
      if (count[m] == 0) {
        // An emptied cluster keeps its centroid.
        std::copy(run.centroids.row(m).begin(), run.centroids.row(m).end(), next.row(m).begin());
        continue;
      }
      for (double& v : next.row(m)) v /= static_cast<double>(count[m]);
      movement = std::max(movement, std::sqrt(kernels::squared_distance(next.row(m), run.centroids.row(m))));
    }
    run.centroids = std::move(next);
    run.inertia = assign_points(x, run.centroids, run.assign);
    run.history.push_back(run.inertia);
    run.iterations = iter + 1;
    if (movement < params.tol) break;
  }
  return run;
}

}  // namespace

KMeansResult kmeans(const Matrix& x, std::size_t k, std::uint64_t seed, const KMeansParams& params) {
  if (k == 0) throw std::invalid_argument("kmeans: k must be positive");
  if (k > x.rows)
    throw std::invalid_argument("kmeans: k = " + std::to_string(k) + " exceeds " + std::to_string(x.rows) + " rows");
  std::mt19937_64 rng(seed);
  LloydRun best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < std::max<std::size_t>(1, params.restarts); ++r) {
    LloydRun run = lloyd(x, kmeans_pp(x, k, rng), params);
    if (run.inertia < best.inertia) best = std::move(run);
  }
  KMeansResult out;
  out.assignments = std::move(best.assign);
  out.centroids = std::move(best.centroids);
  out.inertia = best.inertia;
  out.iterations = best.iterations;
  out.inertia_history = std::move(best.history);
  return out;
}

// ---------------------------------------------------------------- metrics

Contingency contingency(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw std::invalid_argument("labelings differ in length");
  Contingency c;
  c.a_labels.assign(a.begin(), a.end());
  c.b_labels.assign(b.begin(), b.end());
  for (auto* v : {&c.a_labels, &c.b_labels}) {
    std::sort(v->begin(), v->end());
    v->erase(std::unique(v->begin(), v->end()), v->end());
  }
  c.counts.assign(c.a_labels.size() * c.b_labels.size(), 0);
  c.total = a.size();
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto ia = static_cast<std::size_t>(std::lower_bound(c.a_labels.begin(), c.a_labels.end(), a[i]) - c.a_labels.begin());
    auto ib = static_cast<std::size_t>(std::lower_bound(c.b_labels.begin(), c.b_labels.end(), b[i]) - c.b_labels.begin());
    ++c.counts[ia * c.b_labels.size() + ib];
  }
  return c;
}

namespace {

std::vector<std::size_t> marginal(const Contingency& c, bool rows) {
  const std::size_t na = c.a_labels.size();
  const std::size_t nb = c.b_labels.size();
  std::vector<std::size_t> m(rows ? na : nb, 0);
  for (std::size_t i = 0; i < na; ++i)
    for (std::size_t j = 0; j < nb; ++j) m[rows ? i : j] += c.at(i, j);
  return m;
}

double entropy_of(std::span<const std::size_t> counts, double total) {
  double h = 0.0;
  for (std::size_t v : counts) {
    if (v == 0) continue;
    const double p = static_cast<double>(v) / total;
    h -= p * std::log(p);
  }
  return h;
}

double mi_of(const Contingency& c) {
  const double n = static_cast<double>(c.total);
  auto ra = marginal(c, true);
  auto rb = marginal(c, false);
  double mi = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    for (std::size_t j = 0; j < rb.size(); ++j) {
      const std::size_t nij = c.at(i, j);
      if (nij == 0) continue;
      const double p = static_cast<double>(nij) / n;
      mi += p * std::log(n * static_cast<double>(nij) / (static_cast<double>(ra[i]) * static_cast<double>(rb[j])));
    }
  }
  return std::max(mi, 0.0);
}

double pairs(double v) { return v * (v - 1.0) / 2.0; }

}  // namespace

double mutual_information(std::span<const int> a, std::span<const int> b) {
  if (a.empty()) throw std::invalid_argument("empty labeling");
  return mi_of(contingency(a, b));
}

double entropy(std::span<const int> a) {
  if (a.empty()) throw std::invalid_argument("empty labeling");
  auto c = contingency(a, a);
  return entropy_of(marginal(c, true), static_cast<double>(c.total));
}

double nmi(std::span<const int> a, std::span<const int> b) {
  if (a.empty()) throw std::invalid_argument("empty labeling");
  auto c = contingency(a, b);
  const double n = static_cast<double>(c.total);
  const double ha = entropy_of(marginal(c, true), n);
  const double hb = entropy_of(marginal(c, false), n);
  if (ha == 0.0 && hb == 0.0) return 1.0;
  if (ha == 0.0 || hb == 0.0) return 0.0;
  return std::min(1.0, mi_of(c) / std::sqrt(ha * hb));
}

double ari(std::span<const int> a, std::span<const int> b) {
  if (a.empty()) throw std::invalid_argument("empty labeling");
  auto c = contingency(a, b);
  double index = 0.0;
  for (std::size_t v : c.counts) index += pairs(static_cast<double>(v));
  double sa = 0.0;
  for (std::size_t v : marginal(c, true)) sa += pairs(static_cast<double>(v));
  double sb = 0.0;
  for (std::size_t v : marginal(c, false)) sb += pairs(static_cast<double>(v));
  const double total_pairs = pairs(static_cast<double>(c.total));
  const double expected = total_pairs > 0 ? sa * sb / total_pairs : 0.0;
  const double max_index = (sa + sb) / 2.0;
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

std::vector<SweepPoint> mi_sweep(const Matrix& x, std::span<const int> labels, std::size_t k_min, std::size_t k_max,
                                 std::size_t step, std::uint64_t seed) {
  if (step == 0 || k_min == 0 || k_min > k_max) throw std::invalid_argument("mi_sweep: bad k range");
  if (k_max > x.rows)
    throw std::invalid_argument("mi_sweep: k_max = " + std::to_string(k_max) + " exceeds " +
                                std::to_string(x.rows) + " instances");
  std::vector<SweepPoint> out;
  for (std::size_t k = k_min; k <= k_max; k += step) {
    auto km = kmeans(x, k, seed);
    out.push_back({k, mutual_information(labels, km.assignments)});
  }
  return out;
}

void write_sweep_csv(const std::filesystem::path& path, std::span<const SweepPoint> points) {
  auto out = io::open_output(path);
  out.precision(17);
  out << "k,mi\n";
  for (const auto& p : points) out << p.k << "," << p.mi << "\n";
}

// ---------------------------------------------------------------- PCA

Projection pca_project(const Matrix& x, std::size_t dims) {
  if (x.rows < 2) throw std::invalid_argument("pca: need at least two rows");
  if (dims == 0 || dims > x.cols) throw std::invalid_argument("pca: bad component count");
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(
      x.values.data(), static_cast<Eigen::Index>(x.rows), static_cast<Eigen::Index>(x.cols));
  Eigen::MatrixXd centered = m.rowwise() - m.colwise().mean();
  Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(x.rows - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  // Eigenvalues come out ascending.
  const Eigen::Index p = static_cast<Eigen::Index>(x.cols);
  const double total = std::max(solver.eigenvalues().sum(), 0.0);
  Projection out;
  out.coords = Matrix(x.rows, dims);
  for (std::size_t d = 0; d < dims; ++d) {
    const Eigen::Index col = p - 1 - static_cast<Eigen::Index>(d);
    Eigen::VectorXd v = solver.eigenvectors().col(col);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    Eigen::VectorXd proj = centered * v;
    for (std::size_t i = 0; i < x.rows; ++i) out.coords(i, d) = proj(static_cast<Eigen::Index>(i));
    out.explained_ratio.push_back(total > 0 ? std::max(solver.eigenvalues()(col), 0.0) / total : 0.0);
  }
  return out;
}

void write_projection_csv(const std::filesystem::path& path, std::span<const std::string> ids,
                          std::span<const int> labels, const Projection& proj) {
  if (ids.size() != proj.coords.rows || labels.size() != proj.coords.rows)
    throw std::invalid_argument("projection: id/label count mismatch");
  auto out = io::open_output(path);
  out.precision(17);
  out << "id,label";
  for (std::size_t d = 0; d < proj.coords.cols; ++d) out << ",pc" << d + 1;
  out << "\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out << ids[i] << "," << labels[i];
    for (std::size_t d = 0; d < proj.coords.cols; ++d) out << "," << proj.coords(i, d);
    out << "\n";
  }
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricRow> rows) {
  auto out = io::open_output(path);
  out.precision(17);
  out << kMetricsHeader << "\n";
  for (const auto& r : rows)
    out << r.dataset << "," << r.epsilon << "," << r.tau << "," << r.seed << "," << r.acc << "," << r.nmi << ","
        << r.ari << "\n";
}

Summary summarize(std::span<const double> values) {
  Summary s;
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

void write_reprs(const std::filesystem::path& path, std::span<const std::string> ids, std::span<const int> labels,
                 const Matrix& reprs) {
  if (ids.size() != reprs.rows || labels.size() != reprs.rows)
    throw std::invalid_argument("representation file: id/label count mismatch");
  auto out = io::open_output(path);
  io::BinaryWriter w(out);
  w.bytes(std::string_view(kReprMagic, 4));
  w.u16(1);
  w.u32(static_cast<std::uint32_t>(reprs.rows));
  w.u32(static_cast<std::uint32_t>(reprs.cols));
  for (std::size_t i = 0; i < reprs.rows; ++i) {
    w.str(ids[i]);
    w.i32(labels[i]);
    for (double v : reprs.row(i)) w.f32(static_cast<float>(v));
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

ReprFile read_reprs(const std::filesystem::path& path) {
  auto in = io::open_input(path);
  io::BinaryReader r(in);
  if (r.bytes(4) != std::string_view(kReprMagic, 4)) throw io::FormatError("not a representation file");
  const auto version = r.u16();
  if (version != 1) throw io::FormatError("unsupported representation format version " + std::to_string(version));
  ReprFile f;
  const std::uint32_t n = r.u32();
  const std::uint32_t k = r.u32();
  f.reprs = Matrix(n, k);
  for (std::uint32_t i = 0; i < n; ++i) {
    f.ids.push_back(r.str());
    f.labels.push_back(r.i32());
    for (double& v : f.reprs.row(i)) v = r.f32();
  }
  return f;
}

}  // namespace atscc::eval

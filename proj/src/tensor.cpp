#include "atscc/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <unordered_set>

#include "atscc/kernels.hpp"

namespace atscc::ad {

struct Node {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::uint64_t id = 0;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  std::vector<double>& ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

namespace {

std::atomic<std::uint64_t> next_id{1};

// exp() that short-circuits the underflow range. Masked logits land far below
// the cutoff, and libm's slow path for them dominated attention and the loss.
inline double exp_or_zero(double x) { return x < -745.0 ? 0.0 : std::exp(x); }
thread_local bool recording = true;

std::shared_ptr<Node> new_node(std::size_t rows, std::size_t cols, std::vector<double> value) {
  if (value.size() != rows * cols) {
    throw std::invalid_argument("tensor value count " + std::to_string(value.size()) +
                                " does not match shape " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  auto n = std::make_shared<Node>();
  n->rows = rows;
  n->cols = cols;
  n->value = std::move(value);
  n->id = next_id.fetch_add(1, std::memory_order_relaxed);
  return n;
}

// Builds an op result and records the backward closure when any input needs
// a gradient.
Tensor make_result(std::size_t rows, std::size_t cols, std::vector<double> value,
                   std::initializer_list<const Tensor*> inputs, std::function<void(Node&)> backward_fn) {
  auto n = new_node(rows, cols, std::move(value));
  if (recording) {
    bool any = false;
    for (const Tensor* t : inputs) any = any || t->requires_grad();
    if (any) {
      n->requires_grad = true;
      for (const Tensor* t : inputs) n->parents.push_back(t->node());
      n->backward = std::move(backward_fn);
    }
  }
  return Tensor::wrap(std::move(n));
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " + b.shape_string());
}

kernels::MatView view(const std::vector<double>& v, std::size_t rows, std::size_t cols) {
  return {v.data(), rows, cols, cols};
}
kernels::MutMatView mut_view(std::vector<double>& v, std::size_t rows, std::size_t cols) {
  return {v.data(), rows, cols, cols};
}

Node& parent(Node& self, std::size_t i) { return *self.parents[i]; }

Tensor add_impl(const Tensor& a, const Tensor& b, double sign, const char* op) {
  const bool row_broadcast = b.rows() == 1 && a.rows() != 1 && b.cols() == a.cols();
  if (!row_broadcast && (a.rows() != b.rows() || a.cols() != b.cols())) shape_error(op, a, b);
  const std::size_t rows = a.rows(), cols = a.cols();
  std::vector<double> out(a.values().begin(), a.values().end());
  const auto bv = b.values();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] += sign * bv[row_broadcast ? c : r * cols + c];
  }
  return make_result(rows, cols, std::move(out), {&a, &b}, [row_broadcast, sign, rows, cols](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) g[row_broadcast ? c : r * cols + c] += sign * self.grad[r * cols + c];
      }
    }
  });
}

}  // namespace

Tensor Tensor::constant(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor(new_node(rows, cols, std::move(values)));
}

Tensor Tensor::zeros(std::size_t rows, std::size_t cols) { return full(rows, cols, 0.0); }

Tensor Tensor::full(std::size_t rows, std::size_t cols, double value) {
  return constant(rows, cols, std::vector<double>(rows * cols, value));
}

Tensor Tensor::parameter(std::size_t rows, std::size_t cols, std::vector<double> values) {
  auto n = new_node(rows, cols, std::move(values));
  n->requires_grad = true;
  return Tensor(std::move(n));
}

std::size_t Tensor::rows() const { return node_->rows; }
std::size_t Tensor::cols() const { return node_->cols; }

std::string Tensor::shape_string() const {
  return "[" + std::to_string(rows()) + ", " + std::to_string(cols()) + "]";
}

std::span<const double> Tensor::values() const { return node_->value; }
std::span<double> Tensor::mutable_values() { return node_->value; }

double Tensor::item() const {
  if (size() != 1) throw std::invalid_argument("item() on tensor of shape " + shape_string());
  return node_->value[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

std::span<const double> Tensor::grad() const { return node_->ensure_grad(); }
std::span<double> Tensor::mutable_grad() { return node_->ensure_grad(); }
void Tensor::zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }
std::uint64_t Tensor::node_id() const { return node_->id; }

NoGradGuard::NoGradGuard() : previous_(recording) { recording = false; }
NoGradGuard::~NoGradGuard() { recording = previous_; }
bool grad_enabled() { return recording; }

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) shape_error("matmul", a, b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n);
  kernels::gemm_nn({a.values().data(), m, k, k}, {b.values().data(), k, n, n}, {out.data(), m, n, n}, false);
  return make_result(m, n, std::move(out), {&a, &b}, [m, k, n](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad) {
      kernels::gemm_nt(view(self.grad, m, n), view(pb.value, k, n), mut_view(pa.ensure_grad(), m, k), true);
    }
    if (pb.requires_grad) {
      kernels::gemm_tn(view(pa.value, m, k), view(self.grad, m, n), mut_view(pb.ensure_grad(), k, n), true);
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) { return add_impl(a, b, 1.0, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return add_impl(a, b, -1.0, "sub"); }

Tensor scale(const Tensor& a, double s) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (double& v : out) v *= s;
  return make_result(a.rows(), a.cols(), std::move(out), {&a}, [s](Node& self) {
    auto& g = parent(self, 0).ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * self.grad[i];
  });
}

Tensor transpose(const Tensor& a) {
  const std::size_t rows = a.rows(), cols = a.cols();
  std::vector<double> out(rows * cols);
  const auto v = a.values();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = v[r * cols + c];
  }
  return make_result(cols, rows, std::move(out), {&a}, [rows, cols](Node& self) {
    auto& g = parent(self, 0).ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] += self.grad[c * rows + r];
    }
  });
}

Tensor concat(std::span<const Tensor> parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat of nothing");
  if (axis != 0 && axis != 1) throw std::invalid_argument("concat axis must be 0 or 1");
  std::size_t rows = 0, cols = 0;
  for (const auto& p : parts) {
    if (axis == 0) {
      if (p.cols() != parts[0].cols()) shape_error("concat", parts[0], p);
      rows += p.rows();
      cols = p.cols();
    } else {
      if (p.rows() != parts[0].rows()) shape_error("concat", parts[0], p);
      cols += p.cols();
      rows = p.rows();
    }
  }
  std::vector<double> out(rows * cols);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const auto v = p.values();
    for (std::size_t r = 0; r < p.rows(); ++r) {
      const std::size_t dst = axis == 0 ? (offset + r) * cols : r * cols + offset;
      std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(r * p.cols()), p.cols(), out.begin() + static_cast<std::ptrdiff_t>(dst));
    }
    offset += axis == 0 ? p.rows() : p.cols();
  }

  auto n = new_node(rows, cols, std::move(out));
  bool any = false;
  for (const auto& p : parts) any = any || p.requires_grad();
  if (recording && any) {
    n->requires_grad = true;
    for (const auto& p : parts) n->parents.push_back(p.node());
    n->backward = [axis, cols](Node& self) {
      std::size_t off = 0;
      for (auto& pp : self.parents) {
        Node& p = *pp;
        if (p.requires_grad) {
          auto& g = p.ensure_grad();
          for (std::size_t r = 0; r < p.rows; ++r) {
            const std::size_t src = axis == 0 ? (off + r) * cols : r * cols + off;
            for (std::size_t c = 0; c < p.cols; ++c) g[r * p.cols + c] += self.grad[src + c];
          }
        }
        off += axis == 0 ? p.rows : p.cols;
      }
    };
  }
  return Tensor::wrap(std::move(n));
}

Tensor slice(const Tensor& a, std::size_t r0, std::size_t r1, std::size_t c0, std::size_t c1) {
  if (r0 > r1 || r1 > a.rows() || c0 > c1 || c1 > a.cols()) {
    throw std::invalid_argument("slice [" + std::to_string(r0) + ":" + std::to_string(r1) + ", " +
                                std::to_string(c0) + ":" + std::to_string(c1) + "] out of range for " +
                                a.shape_string());
  }
  const std::size_t rows = r1 - r0, cols = c1 - c0, src_cols = a.cols();
  std::vector<double> out(rows * cols);
  const auto v = a.values();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(v.begin() + static_cast<std::ptrdiff_t>((r0 + r) * src_cols + c0), cols,
                out.begin() + static_cast<std::ptrdiff_t>(r * cols));
  }
  return make_result(rows, cols, std::move(out), {&a}, [=](Node& self) {
    auto& g = parent(self, 0).ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) g[(r0 + r) * src_cols + c0 + c] += self.grad[r * cols + c];
    }
  });
}

Tensor masked_softmax(const Tensor& logits, const Tensor& additive_mask) {
  if (logits.rows() != additive_mask.rows() || logits.cols() != additive_mask.cols()) {
    shape_error("masked_softmax", logits, additive_mask);
  }
  const std::size_t rows = logits.rows(), cols = logits.cols();
  const auto x = logits.values();
  const auto m = additive_mask.values();
  std::vector<double> y(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cols; ++c) mx = std::max(mx, x[r * cols + c] + m[r * cols + c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double e = exp_or_zero(x[r * cols + c] + m[r * cols + c] - mx);
      y[r * cols + c] = e;
      sum += e;
    }
    for (std::size_t c = 0; c < cols; ++c) y[r * cols + c] /= sum;
  }
  return make_result(rows, cols, std::move(y), {&logits, &additive_mask}, [rows, cols](Node& self) {
    Node& px = parent(self, 0);
    if (!px.requires_grad) return;
    auto& g = px.ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* yr = &self.value[r * cols];
      const double* gr = &self.grad[r * cols];
      double s = 0.0;
      for (std::size_t c = 0; c < cols; ++c) s += yr[c] * gr[c];
      for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] += yr[c] * (gr[c] - s);
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const std::size_t rows = x.rows(), cols = x.cols();
  if (gain.rows() != 1 || gain.cols() != cols) shape_error("layer_norm gain", x, gain);
  if (bias.rows() != 1 || bias.cols() != cols) shape_error("layer_norm bias", x, bias);
  const auto xv = x.values();
  const auto gv = gain.values();
  const auto bv = bias.values();
  std::vector<double> y(rows * cols);
  auto xhat = std::make_shared<std::vector<double>>(rows * cols);
  auto rstd = std::make_shared<std::vector<double>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double mean = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mean += xv[r * cols + c];
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double d = xv[r * cols + c] - mean;
      var += d * d;
    }
    var /= static_cast<double>(cols);
    const double rs = 1.0 / std::sqrt(var + eps);
    (*rstd)[r] = rs;
    for (std::size_t c = 0; c < cols; ++c) {
      const double h = (xv[r * cols + c] - mean) * rs;
      (*xhat)[r * cols + c] = h;
      y[r * cols + c] = h * gv[c] + bv[c];
    }
  }
  return make_result(rows, cols, std::move(y), {&x, &gain, &bias}, [rows, cols, xhat, rstd](Node& self) {
    Node& px = parent(self, 0);
    Node& pg = parent(self, 1);
    Node& pb = parent(self, 2);
    const auto& gy = self.grad;
    if (pg.requires_grad) {
      auto& g = pg.ensure_grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) g[c] += gy[r * cols + c] * (*xhat)[r * cols + c];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) g[c] += gy[r * cols + c];
    }
    if (px.requires_grad) {
      auto& g = px.ensure_grad();
      const auto& gain_v = pg.value;
      const double inv_n = 1.0 / static_cast<double>(cols);
      for (std::size_t r = 0; r < rows; ++r) {
        double mean_gh = 0.0, mean_ghx = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
          const double gh = gy[r * cols + c] * gain_v[c];
          mean_gh += gh;
          mean_ghx += gh * (*xhat)[r * cols + c];
        }
        mean_gh *= inv_n;
        mean_ghx *= inv_n;
        for (std::size_t c = 0; c < cols; ++c) {
          const double gh = gy[r * cols + c] * gain_v[c];
          g[r * cols + c] += (*rstd)[r] * (gh - mean_gh - (*xhat)[r * cols + c] * mean_ghx);
        }
      }
    }
  });
}

Tensor gelu(const Tensor& x) {
  const auto xv = x.values();
  auto cdf = std::make_shared<std::vector<double>>(xv.size());
  std::vector<double> y(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    (*cdf)[i] = 0.5 * (1.0 + std::erf(xv[i] / std::numbers::sqrt2));
    y[i] = xv[i] * (*cdf)[i];
  }
  return make_result(x.rows(), x.cols(), std::move(y), {&x}, [cdf](Node& self) {
    Node& px = parent(self, 0);
    auto& g = px.ensure_grad();
    constexpr double inv_sqrt_2pi = 0.3989422804014327;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double v = px.value[i];
      const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
      g[i] += self.grad[i] * ((*cdf)[i] + v * pdf);
    }
  });
}

Tensor l2_normalize(const Tensor& x, int axis) {
  if (axis != 0 && axis != 1) throw std::invalid_argument("l2_normalize axis must be 0 or 1");
  constexpr double kFloor = 1e-12;
  const std::size_t rows = x.rows(), cols = x.cols();
  // Vectors are rows for axis 1 and columns for axis 0.
  const std::size_t count = axis == 1 ? rows : cols;
  const std::size_t len = axis == 1 ? cols : rows;
  const std::size_t outer_stride = axis == 1 ? cols : 1;
  const std::size_t inner_stride = axis == 1 ? 1 : cols;
  const auto xv = x.values();
  std::vector<double> y(rows * cols);
  auto norms = std::make_shared<std::vector<double>>(count);
  for (std::size_t v = 0; v < count; ++v) {
    double s = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      const double e = xv[v * outer_stride + i * inner_stride];
      s += e * e;
    }
    const double n = std::max(std::sqrt(s), kFloor);
    (*norms)[v] = n;
    for (std::size_t i = 0; i < len; ++i) {
      const std::size_t k = v * outer_stride + i * inner_stride;
      y[k] = xv[k] / n;
    }
  }
  return make_result(rows, cols, std::move(y), {&x}, [=](Node& self) {
    auto& g = parent(self, 0).ensure_grad();
    for (std::size_t v = 0; v < count; ++v) {
      const double n = (*norms)[v];
      double yg = 0.0;
      for (std::size_t i = 0; i < len; ++i) {
        const std::size_t k = v * outer_stride + i * inner_stride;
        yg += self.value[k] * self.grad[k];
      }
      const bool floored = n <= kFloor;
      for (std::size_t i = 0; i < len; ++i) {
        const std::size_t k = v * outer_stride + i * inner_stride;
        g[k] += floored ? self.grad[k] / n : (self.grad[k] - self.value[k] * yg) / n;
      }
    }
  });
}

Tensor dropout_mask_apply(const Tensor& x, const Tensor& mask) {
  const bool per_row = mask.cols() == 1 && mask.rows() == x.rows() && x.cols() != 1;
  if (!per_row && (mask.rows() != x.rows() || mask.cols() != x.cols())) shape_error("dropout_mask_apply", x, mask);
  const std::size_t rows = x.rows(), cols = x.cols();
  const auto xv = x.values();
  const auto mv = mask.values();
  std::vector<double> y(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) y[r * cols + c] = xv[r * cols + c] * mv[per_row ? r : r * cols + c];
  }
  return make_result(rows, cols, std::move(y), {&x, &mask}, [per_row, rows, cols](Node& self) {
    Node& px = parent(self, 0);
    if (!px.requires_grad) return;
    const auto& mv = parent(self, 1).value;
    auto& g = px.ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] += self.grad[r * cols + c] * mv[per_row ? r : r * cols + c];
    }
  });
}

Tensor log_sum_exp(const Tensor& x, int axis) {
  if (axis != 0 && axis != 1) throw std::invalid_argument("log_sum_exp axis must be 0 or 1");
  const std::size_t rows = x.rows(), cols = x.cols();
  const std::size_t count = axis == 1 ? rows : cols;
  const std::size_t len = axis == 1 ? cols : rows;
  const std::size_t outer_stride = axis == 1 ? cols : 1;
  const std::size_t inner_stride = axis == 1 ? 1 : cols;
  const auto xv = x.values();
  // Softmax weights along the reduced axis, which are exactly the gradient.
  auto weights = std::make_shared<std::vector<double>>(xv.size());
  std::vector<double> out(count);
  for (std::size_t v = 0; v < count; ++v) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < len; ++i) mx = std::max(mx, xv[v * outer_stride + i * inner_stride]);
    double s = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      const std::size_t k = v * outer_stride + i * inner_stride;
      (*weights)[k] = exp_or_zero(xv[k] - mx);
      s += (*weights)[k];
    }
    for (std::size_t i = 0; i < len; ++i) (*weights)[v * outer_stride + i * inner_stride] /= s;
    out[v] = mx + std::log(s);
  }
  const std::size_t out_rows = axis == 1 ? rows : 1;
  const std::size_t out_cols = axis == 1 ? 1 : cols;
  return make_result(out_rows, out_cols, std::move(out), {&x}, [=](Node& self) {
    auto& g = parent(self, 0).ensure_grad();
    for (std::size_t v = 0; v < count; ++v) {
      const double gv = self.grad[v];
      if (gv == 0.0) continue;
      for (std::size_t i = 0; i < len; ++i) {
        const std::size_t k = v * outer_stride + i * inner_stride;
        g[k] += gv * (*weights)[k];
      }
    }
  });
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw std::invalid_argument("backward needs a scalar loss, got " + (loss.defined() ? loss.shape_string() : "undefined"));
  }
  if (!loss.requires_grad()) return;
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack{loss.node().get()};
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    if (!seen.insert(n).second) continue;
    order.push_back(n);
    for (const auto& p : n->parents) {
      if (p->requires_grad) stack.push_back(p.get());
    }
  }
  std::sort(order.begin(), order.end(), [](const Node* a, const Node* b) { return a->id > b->id; });
  loss.node()->ensure_grad()[0] += 1.0;
  for (Node* n : order) {
    if (n->backward && n->grad.size() == n->value.size()) n->backward(*n);
  }
}

std::vector<double> numeric_gradient(const std::function<Tensor()>& fn, Tensor& input, double h,
                                     std::span<const std::size_t> coords) {
  std::vector<std::size_t> all;
  if (coords.empty()) {
    all.resize(input.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    coords = all;
  }
  NoGradGuard guard;
  auto values = input.mutable_values();
  std::vector<double> out;
  out.reserve(coords.size());
  for (std::size_t c : coords) {
    const double saved = values[c];
    const auto at = [&](double offset) {
      values[c] = saved + offset;
      return fn().item();
    };
    const double p1 = at(h), m1 = at(-h), p2 = at(2.0 * h), m2 = at(-2.0 * h);
    values[c] = saved;
    out.push_back((8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h));
  }
  return out;
}

double max_relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  if (analytic.size() != numeric.size()) throw std::invalid_argument("gradient size mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double a = analytic[i], n = numeric[i];
    const double denom = std::max({std::abs(a), std::abs(n), 1e-12});
    worst = std::max(worst, std::abs(a - n) / denom);
  }
  return worst;
}

GradCheckResult grad_check(const std::function<Tensor()>& fn, Tensor& input, double h, double tol,
                           std::span<const std::size_t> coords) {
  input.zero_grad();
  backward(fn());
  const auto grad = input.grad();
  std::vector<double> analytic;
  if (coords.empty()) {
    analytic.assign(grad.begin(), grad.end());
  } else {
    for (std::size_t c : coords) analytic.push_back(grad[c]);
  }
  const auto numeric = numeric_gradient(fn, input, h, coords);
  GradCheckResult r;
  r.max_rel_error = max_relative_error(analytic, numeric);
  r.passed = r.max_rel_error < tol;
  return r;
}

}  // namespace atscc::ad

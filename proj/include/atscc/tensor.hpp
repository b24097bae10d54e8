#pragma once

// Minimal dense rank-2 tensors with reverse-mode differentiation.
//
// Every op returns a new tensor. When gradient recording is enabled on the
// calling thread and any input requires a gradient, the result keeps its
// inputs alive and records a backward closure. backward() walks the recorded
// nodes in reverse creation order, which is a valid reverse topological order
// and makes gradient accumulation deterministic.
//
// A graph belongs to the thread that built it. Parameters may be shared
// read-only between threads only while no thread records gradients into
// them.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace atscc::ad {

/// Stand-in for -infinity in additive masks; masks compose by summation.
inline constexpr double kMaskedLogit = -1e9;

struct Node;

class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(std::size_t rows, std::size_t cols, std::vector<double> values);
  static Tensor zeros(std::size_t rows, std::size_t cols);
  static Tensor full(std::size_t rows, std::size_t cols, double value);
  /// Leaf that accumulates gradients.
  static Tensor parameter(std::size_t rows, std::size_t cols, std::vector<double> values);

  bool defined() const { return node_ != nullptr; }
  std::size_t rows() const;
  std::size_t cols() const;
  std::size_t size() const { return rows() * cols(); }
  std::vector<std::size_t> shape() const { return {rows(), cols()}; }
  std::string shape_string() const;

  std::span<const double> values() const;
  std::span<double> mutable_values();
  double at(std::size_t r, std::size_t c) const { return values()[r * cols() + c]; }
  /// Value of a 1 x 1 tensor.
  double item() const;

  bool requires_grad() const;
  /// Gradient buffer (zeros if nothing has been accumulated yet).
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  std::uint64_t node_id() const;
  const std::shared_ptr<Node>& node() const { return node_; }
  static Tensor wrap(std::shared_ptr<Node> node) { return Tensor(std::move(node)); }

 private:
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  std::shared_ptr<Node> node_;
};

/// Disables gradient recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

/// [m x k] * [k x n]
Tensor matmul(const Tensor& a, const Tensor& b);
/// Elementwise a + b. `b` may also be a 1 x cols row, broadcast over rows.
Tensor add(const Tensor& a, const Tensor& b);
/// Elementwise a - b, same broadcasting as add.
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor transpose(const Tensor& a);
/// axis 0 stacks rows, axis 1 stacks columns.
Tensor concat(std::span<const Tensor> parts, int axis);
/// Rows [r0, r1) and columns [c0, c1).
Tensor slice(const Tensor& a, std::size_t r0, std::size_t r1, std::size_t c0, std::size_t c1);
/// Row-wise softmax of logits + additive_mask. Positions carrying
/// kMaskedLogit come out as exact zeros provided each row keeps at least one
/// unmasked entry.
Tensor masked_softmax(const Tensor& logits, const Tensor& additive_mask);
/// Per-row normalisation with 1 x cols gain and bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
/// Exact (erf) GELU.
Tensor gelu(const Tensor& x);
/// Divides each row (axis 1) or column (axis 0) by its Euclidean norm,
/// floored at 1e-12.
Tensor l2_normalize(const Tensor& x, int axis = 1);
/// x * mask, where mask has x's shape or is rows x 1 (one factor per row).
Tensor dropout_mask_apply(const Tensor& x, const Tensor& mask);
/// Stable log(sum(exp(x))) over axis 1 (-> rows x 1) or axis 0 (-> 1 x cols).
Tensor log_sum_exp(const Tensor& x, int axis);

/// Accumulates d loss / d leaf into every reachable leaf that requires a
/// gradient. Throws std::invalid_argument if loss is not 1 x 1.
void backward(const Tensor& loss);

/// Central-difference gradient of a scalar function with respect to the
/// values of `input` (mutated in place and restored), using the five-point
/// stencil at offsets +-h and +-2h. `coords` selects flat indices; empty
/// means all.
std::vector<double> numeric_gradient(const std::function<Tensor()>& fn, Tensor& input, double h,
                                     std::span<const std::size_t> coords = {});

/// max_i |a_i - n_i| / max(|a_i|, |n_i|, 1e-12)
double max_relative_error(std::span<const double> analytic, std::span<const double> numeric);

struct GradCheckResult {
  double max_rel_error = 0.0;
  bool passed = false;
};

/// Compares backward() against central differences on `input`.
GradCheckResult grad_check(const std::function<Tensor()>& fn, Tensor& input, double h, double tol,
                           std::span<const std::size_t> coords = {});

}  // namespace atscc::ad

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace adaptermix {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);

struct TensorImpl {
  Shape shape;
  std::vector<double> data;   // row-major
  std::vector<double> grad;   // empty until first accumulation
  bool requires_grad = false;
};

/*
 * Dense row-major tensor of 64-bit reals with an optional gradient buffer.
 * Tensor is a cheap handle: copies share storage, which is how parameters
 * stay aliased between a model and its optimizer. Operation results never
 * alias their inputs.
 */
class Tensor {
 public:
  Tensor() : impl_(std::make_shared<TensorImpl>()) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> values,
                          bool requires_grad = false);
  static Tensor scalar(double value);

  const Shape& shape() const { return impl_->shape; }
  std::size_t ndim() const { return impl_->shape.size(); }
  std::size_t numel() const { return impl_->data.size(); }
  std::size_t rows() const;  // first dimension; matrices only
  std::size_t cols() const;  // second dimension; matrices only
  bool is_matrix() const { return ndim() == 2; }

  std::span<double> values() { return impl_->data; }
  std::span<const double> values() const { return impl_->data; }
  double operator()(std::size_t r, std::size_t c) const;
  double& operator()(std::size_t r, std::size_t c);
  /// Value of a one-element tensor; ContractError otherwise.
  double item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool flag);

  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<double> grad() { return impl_->grad; }
  std::span<const double> grad() const { return impl_->grad; }
  /// Allocates a zero gradient buffer if absent.
  void ensure_grad() const;
  void zero_grad();
  void clear_grad();

  /// Deep copy of the data (gradient is not copied).
  Tensor clone() const;
  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }
  bool all_finite() const;

  std::shared_ptr<TensorImpl> impl_;  // shared storage; treat as library-internal
};

/*
 * Tape of executed differentiable operations for one forward pass.
 * Execution order is a topological order by construction; backward()
 * visits each node exactly once, in reverse. Leaf gradients accumulate
 * across repeated backward() calls; intermediate gradients are scratch
 * space reset per sweep. The tape is freed with the Graph.
 */
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse.
  /// ContractError if loss is not a one-element tensor.
  void backward(const Tensor& loss);

  std::size_t size() const { return tape_.size(); }
  void record(Tensor output, std::function<void()> backward_fn);

  /// Graph recording into on this thread, or nullptr.
  static Graph* current();

 private:
  struct Node {
    Tensor output;
    std::function<void()> backward_fn;
  };
  std::vector<Node> tape_;
};

/// Activates a graph for the current thread for the scope's lifetime.
class GraphScope {
 public:
  explicit GraphScope(Graph& graph);
  ~GraphScope();
  GraphScope(const GraphScope&) = delete;
  GraphScope& operator=(const GraphScope&) = delete;

 private:
  Graph* prev_;
};

/// Suspends recording (forward passes inside run in inference mode).
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Graph* prev_;
};

// ---- differentiable operations ------------------------------------------

/// C = A B. Backward: dA += dC B^T, dB += A^T dC.
Tensor matmul(const Tensor& a, const Tensor& b);

/// Elementwise sum of same-shape tensors.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);

/// Multiplication by a compile-time-known constant.
Tensor scale(const Tensor& x, double factor);

/// y[i,j] = x[i,j] + bias[j]; bias shape {d} or {1,d}.
Tensor add_row_bias(const Tensor& x, const Tensor& bias);

/// y[i,j] = x[i,j] * s[i]; s shape {n} or {n,1}.
Tensor scale_rows(const Tensor& x, const Tensor& s);

Tensor relu(const Tensor& x);
Tensor tanh(const Tensor& x);

/// Row-wise softmax, stabilized by row-max subtraction.
Tensor softmax_rows(const Tensor& x);

/// Per-row (x - mean) / sqrt(var + eps) * gain + bias. Population variance.
/// DegenerateDimensionError when the feature dimension is < 2.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);

/// out[j] = x[indices[j]]. IndexError on out-of-range rows.
Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& indices);

/// out = copy of target; out[indices[j]] += rows[j]. Duplicates accumulate.
Tensor scatter_add_rows(const Tensor& target,
                        const std::vector<std::size_t>& indices,
                        const Tensor& rows);

/// Mean squared elementwise difference, as a one-element tensor.
Tensor mse_loss(const Tensor& pred, const Tensor& target);

/// Sum of all elements, as a one-element tensor.
Tensor sum_all(const Tensor& x);

Tensor transpose(const Tensor& x);
Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t count);
Tensor concat_cols(const std::vector<Tensor>& parts);

}  // namespace adaptermix

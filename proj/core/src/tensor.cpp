/*
 * Dense tensor math with reverse-mode autodiff on a per-forward tape.
 */

#include "adaptermix/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "adaptermix/errors.hpp"

namespace adaptermix {

namespace {

thread_local Graph* t_active_graph = nullptr;

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

void require_matrix(const Tensor& t, const char* op) {
  if (t.ndim() != 2) {
    throw ShapeError(std::string(op) + ": expected a matrix, got shape " +
                     shape_str(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch: " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

bool wants_grad(std::initializer_list<const Tensor*> inputs) {
  if (Graph::current() == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

}  // namespace

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ", ";
    out << shape[i];
  }
  out << "]";
  return out.str();
}

// ---- Tensor ---------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  Tensor t;
  t.impl_->data.assign(shape_numel(shape), value);
  t.impl_->shape = std::move(shape);
  t.impl_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<double> values,
                         bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("from_data: shape " + shape_str(shape) + " wants " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  Tensor t;
  t.impl_->shape = std::move(shape);
  t.impl_->data = std::move(values);
  t.impl_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::scalar(double value) { return from_data({1}, {value}); }

std::size_t Tensor::rows() const {
  require_matrix(*this, "rows");
  return impl_->shape[0];
}

std::size_t Tensor::cols() const {
  require_matrix(*this, "cols");
  return impl_->shape[1];
}

double Tensor::operator()(std::size_t r, std::size_t c) const {
  return impl_->data[r * cols() + c];
}

double& Tensor::operator()(std::size_t r, std::size_t c) {
  return impl_->data[r * cols() + c];
}

double Tensor::item() const {
  if (numel() != 1) {
    throw ContractError("item: tensor has shape " + shape_str(shape()) +
                        ", expected a single element");
  }
  return impl_->data[0];
}

Tensor& Tensor::set_requires_grad(bool flag) {
  impl_->requires_grad = flag;
  return *this;
}

void Tensor::ensure_grad() const {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
}

void Tensor::zero_grad() { impl_->grad.assign(impl_->data.size(), 0.0); }

void Tensor::clear_grad() { impl_->grad.clear(); }

Tensor Tensor::clone() const {
  Tensor t;
  t.impl_->shape = impl_->shape;
  t.impl_->data = impl_->data;
  t.impl_->requires_grad = impl_->requires_grad;
  return t;
}

bool Tensor::all_finite() const {
  for (double v : impl_->data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

// ---- Graph ----------------------------------------------------------------

Graph* Graph::current() { return t_active_graph; }

void Graph::record(Tensor output, std::function<void()> backward_fn) {
  tape_.push_back({std::move(output), std::move(backward_fn)});
}

void Graph::backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " +
                        shape_str(loss.shape()));
  }
  // Intermediates are scratch: reset them so a second sweep contributes
  // exactly one more unit of gradient to the leaves.
  for (Node& node : tape_) node.output.impl_->grad.clear();
  loss.ensure_grad();
  loss.impl_->grad[0] += 1.0;
  for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) {
    it->backward_fn();
  }
}

GraphScope::GraphScope(Graph& graph) : prev_(t_active_graph) {
  t_active_graph = &graph;
}
GraphScope::~GraphScope() { t_active_graph = prev_; }

NoGradScope::NoGradScope() : prev_(t_active_graph) { t_active_graph = nullptr; }
NoGradScope::~NoGradScope() { t_active_graph = prev_; }

// ---- operations -------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.rows(), p = a.cols(), q = b.cols();
  if (b.rows() != p) {
    throw ShapeError("matmul: inner dimensions disagree: " +
                     shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  Tensor out = Tensor::zeros({m, q});
  {
    const double* A = a.values().data();
    const double* B = b.values().data();
    double* C = out.values().data();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t k = 0; k < p; ++k) {
        const double aik = A[i * p + k];
        if (aik == 0.0) continue;
        const double* Brow = B + k * q;
        double* Crow = C + i * q;
        for (std::size_t j = 0; j < q; ++j) Crow[j] += aik * Brow[j];
      }
    }
  }
  if (wants_grad({&a, &b})) {
    out.set_requires_grad(true);
    Tensor ta = a, tb = b, to = out;
    Graph::current()->record(out, [ta, tb, to, m, p, q]() mutable {
      if (!to.has_grad()) return;
      const double* dC = to.grad().data();
      if (ta.requires_grad()) {
        ta.ensure_grad();
        double* dA = ta.grad().data();
        const double* B = tb.values().data();
        // dA[i,k] += sum_j dC[i,j] B[k,j]
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t k = 0; k < p; ++k) {
            double s = 0.0;
            const double* dCrow = dC + i * q;
            const double* Brow = B + k * q;
            for (std::size_t j = 0; j < q; ++j) s += dCrow[j] * Brow[j];
            dA[i * p + k] += s;
          }
        }
      }
      if (tb.requires_grad()) {
        tb.ensure_grad();
        double* dB = tb.grad().data();
        const double* A = ta.values().data();
        // dB[k,j] += sum_i A[i,k] dC[i,j]
        for (std::size_t i = 0; i < m; ++i) {
          const double* dCrow = dC + i * q;
          for (std::size_t k = 0; k < p; ++k) {
            const double aik = A[i * p + k];
            if (aik == 0.0) continue;
            double* dBrow = dB + k * q;
            for (std::size_t j = 0; j < q; ++j) dBrow[j] += aik * dCrow[j];
          }
        }
      }
    });
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = Tensor::zeros(a.shape());
  const std::size_t n = a.numel();
  for (std::size_t i = 0; i < n; ++i)
    out.values()[i] = a.values()[i] + b.values()[i];
  if (wants_grad({&a, &b})) {
    out.set_requires_grad(true);
    Tensor ta = a, tb = b, to = out;
    Graph::current()->record(out, [ta, tb, to, n]() mutable {
      if (!to.has_grad()) return;
      const double* d = to.grad().data();
      if (ta.requires_grad()) {
        ta.ensure_grad();
        for (std::size_t i = 0; i < n; ++i) ta.grad()[i] += d[i];
      }
      if (tb.requires_grad()) {
        tb.ensure_grad();
        for (std::size_t i = 0; i < n; ++i) tb.grad()[i] += d[i];
      }
    });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out = Tensor::zeros(a.shape());
  const std::size_t n = a.numel();
  for (std::size_t i = 0; i < n; ++i)
    out.values()[i] = a.values()[i] - b.values()[i];
  if (wants_grad({&a, &b})) {
    out.set_requires_grad(true);
    Tensor ta = a, tb = b, to = out;
    Graph::current()->record(out, [ta, tb, to, n]() mutable {
      if (!to.has_grad()) return;
      const double* d = to.grad().data();
      if (ta.requires_grad()) {
        ta.ensure_grad();
        for (std::size_t i = 0; i < n; ++i) ta.grad()[i] += d[i];
      }
      if (tb.requires_grad()) {
        tb.ensure_grad();
        for (std::size_t i = 0; i < n; ++i) tb.grad()[i] -= d[i];
      }
    });
  }
  return out;
}

Tensor scale(const Tensor& x, double factor) {
  Tensor out = Tensor::zeros(x.shape());
  const std::size_t n = x.numel();
  for (std::size_t i = 0; i < n; ++i) out.values()[i] = x.values()[i] * factor;
  if (wants_grad({&x})) {
    out.set_requires_grad(true);
    Tensor tx = x, to = out;
    Graph::current()->record(out, [tx, to, n, factor]() mutable {
      if (!to.has_grad()) return;
      tx.ensure_grad();
      for (std::size_t i = 0; i < n; ++i) tx.grad()[i] += to.grad()[i] * factor;
    });
  }
  return out;
}

Tensor add_row_bias(const Tensor& x, const Tensor& bias) {
  require_matrix(x, "add_row_bias");
  const std::size_t n = x.rows(), d = x.cols();
  if (bias.numel() != d || bias.ndim() > 2 ||
      (bias.ndim() == 2 && bias.shape()[0] != 1)) {
    throw ShapeError("add_row_bias: bias shape " + shape_str(bias.shape()) +
                     " does not broadcast over rows of " +
                     shape_str(x.shape()));
  }
  Tensor out = Tensor::zeros(x.shape());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      out.values()[i * d + j] = x.values()[i * d + j] + bias.values()[j];
  if (wants_grad({&x, &bias})) {
    out.set_requires_grad(true);
    Tensor tx = x, tb = bias, to = out;
    Graph::current()->record(out, [tx, tb, to, n, d]() mutable {
      if (!to.has_grad()) return;
      const double* g = to.grad().data();
      if (tx.requires_grad()) {
        tx.ensure_grad();
        for (std::size_t i = 0; i < n * d; ++i) tx.grad()[i] += g[i];
      }
      if (tb.requires_grad()) {
        tb.ensure_grad();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < d; ++j) tb.grad()[j] += g[i * d + j];
      }
    });
  }
  return out;
}

Tensor scale_rows(const Tensor& x, const Tensor& s) {
  require_matrix(x, "scale_rows");
  const std::size_t n = x.rows(), d = x.cols();
  if (s.numel() != n || (s.ndim() == 2 && s.shape()[1] != 1)) {
    throw ShapeError("scale_rows: scale shape " + shape_str(s.shape()) +
                     " does not match rows of " + shape_str(x.shape()));
  }
  Tensor out = Tensor::zeros(x.shape());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      out.values()[i * d + j] = x.values()[i * d + j] * s.values()[i];
  if (wants_grad({&x, &s})) {
    out.set_requires_grad(true);
    Tensor tx = x, ts = s, to = out;
    Graph::current()->record(out, [tx, ts, to, n, d]() mutable {
      if (!to.has_grad()) return;
      const double* g = to.grad().data();
      if (tx.requires_grad()) {
        tx.ensure_grad();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < d; ++j)
            tx.grad()[i * d + j] += g[i * d + j] * ts.values()[i];
      }
      if (ts.requires_grad()) {
        ts.ensure_grad();
        for (std::size_t i = 0; i < n; ++i) {
          double acc = 0.0;
          for (std::size_t j = 0; j < d; ++j)
            acc += g[i * d + j] * tx.values()[i * d + j];
          ts.grad()[i] += acc;
        }
      }
    });
  }
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  const std::size_t n = x.numel();
  for (std::size_t i = 0; i < n; ++i)
    out.values()[i] = x.values()[i] > 0.0 ? x.values()[i] : 0.0;
  if (wants_grad({&x})) {
    out.set_requires_grad(true);
    Tensor tx = x, to = out;
    Graph::current()->record(out, [tx, to, n]() mutable {
      if (!to.has_grad()) return;
      tx.ensure_grad();
      for (std::size_t i = 0; i < n; ++i)
        if (tx.values()[i] > 0.0) tx.grad()[i] += to.grad()[i];
    });
  }
  return out;
}

Tensor tanh(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  const std::size_t n = x.numel();
  for (std::size_t i = 0; i < n; ++i) out.values()[i] = std::tanh(x.values()[i]);
  if (wants_grad({&x})) {
    out.set_requires_grad(true);
    Tensor tx = x, to = out;
    Graph::current()->record(out, [tx, to, n]() mutable {
      if (!to.has_grad()) return;
      tx.ensure_grad();
      for (std::size_t i = 0; i < n; ++i) {
        const double y = to.values()[i];
        tx.grad()[i] += to.grad()[i] * (1.0 - y * y);
      }
    });
  }
  return out;
}

Tensor softmax_rows(const Tensor& x) {
  require_matrix(x, "softmax_rows");
  const std::size_t n = x.rows(), d = x.cols();
  Tensor out = Tensor::zeros(x.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = x.values().data() + i * d;
    double* orow = out.values().data() + i * d;
    double mx = row[0];
    for (std::size_t j = 1; j < d; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      orow[j] = std::exp(row[j] - mx);
      sum += orow[j];
    }
    for (std::size_t j = 0; j < d; ++j) orow[j] /= sum;
  }
  if (wants_grad({&x})) {
    out.set_requires_grad(true);
    Tensor tx = x, to = out;
    Graph::current()->record(out, [tx, to, n, d]() mutable {
      if (!to.has_grad()) return;
      tx.ensure_grad();
      for (std::size_t i = 0; i < n; ++i) {
        const double* y = to.values().data() + i * d;
        const double* dy = to.grad().data() + i * d;
        double dot = 0.0;
        for (std::size_t j = 0; j < d; ++j) dot += dy[j] * y[j];
        double* dx = tx.grad().data() + i * d;
        for (std::size_t j = 0; j < d; ++j) dx[j] += y[j] * (dy[j] - dot);
      }
    });
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps) {
  require_matrix(x, "layer_norm");
  const std::size_t n = x.rows(), d = x.cols();
  if (d < 2) {
    throw DegenerateDimensionError(
        "layer_norm: feature dimension must be >= 2, got " +
        std::to_string(d));
  }
  if (gain.numel() != d || bias.numel() != d) {
    throw ShapeError("layer_norm: gain " + shape_str(gain.shape()) +
                     " / bias " + shape_str(bias.shape()) +
                     " do not match feature dim of " + shape_str(x.shape()));
  }
  Tensor out = Tensor::zeros(x.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = x.values().data() + i * d;
    double* orow = out.values().data() + i * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += row[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double c = row[j] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j)
      orow[j] = (row[j] - mean) * inv * gain.values()[j] + bias.values()[j];
  }
  if (wants_grad({&x, &gain, &bias})) {
    out.set_requires_grad(true);
    Tensor tx = x, tg = gain, tb = bias, to = out;
    Graph::current()->record(out, [tx, tg, tb, to, n, d, eps]() mutable {
      if (!to.has_grad()) return;
      std::vector<double> xhat(d);
      std::vector<double> dxhat(d);
      for (std::size_t i = 0; i < n; ++i) {
        const double* row = tx.values().data() + i * d;
        const double* dy = to.grad().data() + i * d;
        double mean = 0.0;
        for (std::size_t j = 0; j < d; ++j) mean += row[j];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          const double c = row[j] - mean;
          var += c * c;
        }
        var /= static_cast<double>(d);
        const double inv = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < d; ++j) xhat[j] = (row[j] - mean) * inv;
        if (tg.requires_grad()) {
          tg.ensure_grad();
          for (std::size_t j = 0; j < d; ++j)
            tg.grad()[j] += dy[j] * xhat[j];
        }
        if (tb.requires_grad()) {
          tb.ensure_grad();
          for (std::size_t j = 0; j < d; ++j) tb.grad()[j] += dy[j];
        }
        if (tx.requires_grad()) {
          tx.ensure_grad();
          double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            dxhat[j] = dy[j] * tg.values()[j];
            mean_dxhat += dxhat[j];
            mean_dxhat_xhat += dxhat[j] * xhat[j];
          }
          mean_dxhat /= static_cast<double>(d);
          mean_dxhat_xhat /= static_cast<double>(d);
          double* dx = tx.grad().data() + i * d;
          for (std::size_t j = 0; j < d; ++j)
            dx[j] += inv * (dxhat[j] - mean_dxhat - xhat[j] * mean_dxhat_xhat);
        }
      }
    });
  }
  return out;
}

Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& indices) {
  require_matrix(x, "gather_rows");
  const std::size_t n = x.rows(), d = x.cols();
  for (std::size_t idx : indices) {
    if (idx >= n) {
      throw IndexError("gather_rows: row index " + std::to_string(idx) +
                       " out of range [0, " + std::to_string(n) + ")");
    }
  }
  Tensor out = Tensor::zeros({indices.size(), d});
  for (std::size_t j = 0; j < indices.size(); ++j)
    std::copy_n(x.values().data() + indices[j] * d, d,
                out.values().data() + j * d);
  if (wants_grad({&x})) {
    out.set_requires_grad(true);
    Tensor tx = x, to = out;
    auto idx = indices;
    Graph::current()->record(out, [tx, to, idx, d]() mutable {
      if (!to.has_grad()) return;
      tx.ensure_grad();
      for (std::size_t j = 0; j < idx.size(); ++j) {
        const double* g = to.grad().data() + j * d;
        double* dst = tx.grad().data() + idx[j] * d;
        for (std::size_t c = 0; c < d; ++c) dst[c] += g[c];
      }
    });
  }
  return out;
}

Tensor scatter_add_rows(const Tensor& target,
                        const std::vector<std::size_t>& indices,
                        const Tensor& rows) {
  require_matrix(target, "scatter_add_rows");
  require_matrix(rows, "scatter_add_rows");
  const std::size_t n = target.rows(), d = target.cols();
  if (rows.cols() != d) {
    throw ShapeError("scatter_add_rows: row width mismatch: " +
                     shape_str(target.shape()) + " vs " +
                     shape_str(rows.shape()));
  }
  if (rows.rows() != indices.size()) {
    throw ShapeError("scatter_add_rows: " + std::to_string(indices.size()) +
                     " indices for " + std::to_string(rows.rows()) + " rows");
  }
  for (std::size_t idx : indices) {
    if (idx >= n) {
      throw IndexError("scatter_add_rows: row index " + std::to_string(idx) +
                       " out of range [0, " + std::to_string(n) + ")");
    }
  }
  Tensor out = target.clone();
  out.set_requires_grad(false);
  for (std::size_t j = 0; j < indices.size(); ++j) {
    double* dst = out.values().data() + indices[j] * d;
    const double* src = rows.values().data() + j * d;
    for (std::size_t c = 0; c < d; ++c) dst[c] += src[c];
  }
  if (wants_grad({&target, &rows})) {
    out.set_requires_grad(true);
    Tensor tt = target, tr = rows, to = out;
    auto idx = indices;
    Graph::current()->record(out, [tt, tr, to, idx, d]() mutable {
      if (!to.has_grad()) return;
      const double* g = to.grad().data();
      if (tt.requires_grad()) {
        tt.ensure_grad();
        for (std::size_t i = 0; i < tt.numel(); ++i) tt.grad()[i] += g[i];
      }
      if (tr.requires_grad()) {
        tr.ensure_grad();
        for (std::size_t j = 0; j < idx.size(); ++j) {
          const double* src = g + idx[j] * d;
          double* dst = tr.grad().data() + j * d;
          for (std::size_t c = 0; c < d; ++c) dst[c] += src[c];
        }
      }
    });
  }
  return out;
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  require_same_shape(pred, target, "mse_loss");
  const std::size_t n = pred.numel();
  if (n == 0) throw ContractError("mse_loss: empty tensors");
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double diff = pred.values()[i] - target.values()[i];
    acc += diff * diff;
  }
  Tensor out = Tensor::scalar(acc / static_cast<double>(n));
  if (wants_grad({&pred, &target})) {
    out.set_requires_grad(true);
    Tensor tp = pred, tt = target, to = out;
    Graph::current()->record(out, [tp, tt, to, n]() mutable {
      if (!to.has_grad()) return;
      const double g = to.grad()[0] * 2.0 / static_cast<double>(n);
      if (tp.requires_grad()) {
        tp.ensure_grad();
        for (std::size_t i = 0; i < n; ++i)
          tp.grad()[i] += g * (tp.values()[i] - tt.values()[i]);
      }
      if (tt.requires_grad()) {
        tt.ensure_grad();
        for (std::size_t i = 0; i < n; ++i)
          tt.grad()[i] -= g * (tp.values()[i] - tt.values()[i]);
      }
    });
  }
  return out;
}

Tensor sum_all(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  Tensor out = Tensor::scalar(acc);
  if (wants_grad({&x})) {
    out.set_requires_grad(true);
    Tensor tx = x, to = out;
    Graph::current()->record(out, [tx, to]() mutable {
      if (!to.has_grad()) return;
      tx.ensure_grad();
      const double g = to.grad()[0];
      for (std::size_t i = 0; i < tx.numel(); ++i) tx.grad()[i] += g;
    });
  }
  return out;
}

Tensor transpose(const Tensor& x) {
  require_matrix(x, "transpose");
  const std::size_t n = x.rows(), d = x.cols();
  Tensor out = Tensor::zeros({d, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      out.values()[j * n + i] = x.values()[i * d + j];
  if (wants_grad({&x})) {
    out.set_requires_grad(true);
    Tensor tx = x, to = out;
    Graph::current()->record(out, [tx, to, n, d]() mutable {
      if (!to.has_grad()) return;
      tx.ensure_grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j)
          tx.grad()[i * d + j] += to.grad()[j * n + i];
    });
  }
  return out;
}

Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t count) {
  require_matrix(x, "slice_cols");
  const std::size_t n = x.rows(), d = x.cols();
  if (start + count > d) {
    throw IndexError("slice_cols: columns [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") out of range [0, " +
                     std::to_string(d) + ")");
  }
  Tensor out = Tensor::zeros({n, count});
  for (std::size_t i = 0; i < n; ++i)
    std::copy_n(x.values().data() + i * d + start, count,
                out.values().data() + i * count);
  if (wants_grad({&x})) {
    out.set_requires_grad(true);
    Tensor tx = x, to = out;
    Graph::current()->record(out, [tx, to, n, d, start, count]() mutable {
      if (!to.has_grad()) return;
      tx.ensure_grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < count; ++j)
          tx.grad()[i * d + start + j] += to.grad()[i * count + j];
    });
  }
  return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no tensors given");
  const std::size_t n = parts[0].rows();
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    require_matrix(p, "concat_cols");
    if (p.rows() != n) {
      throw ShapeError("concat_cols: row count mismatch: " +
                       shape_str(parts[0].shape()) + " vs " +
                       shape_str(p.shape()));
    }
    total += p.cols();
  }
  Tensor out = Tensor::zeros({n, total});
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    const std::size_t w = p.cols();
    for (std::size_t i = 0; i < n; ++i)
      std::copy_n(p.values().data() + i * w, w,
                  out.values().data() + i * total + offset);
    offset += w;
  }
  bool any_grad = false;
  for (const Tensor& p : parts) any_grad = any_grad || p.requires_grad();
  if (Graph::current() != nullptr && any_grad) {
    out.set_requires_grad(true);
    std::vector<Tensor> tp = parts;
    Tensor to = out;
    Graph::current()->record(out, [tp, to, n, total]() mutable {
      if (!to.has_grad()) return;
      std::size_t offset = 0;
      for (Tensor& p : tp) {
        const std::size_t w = p.cols();
        if (p.requires_grad()) {
          p.ensure_grad();
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < w; ++j)
              p.grad()[i * w + j] += to.grad()[i * total + offset + j];
        }
        offset += w;
      }
    });
  }
  return out;
}

}  // namespace adaptermix

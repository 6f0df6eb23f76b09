/*
 * Residual adapters and the mixture with expert-choice routing.
 */

#include "adaptermix/adapters.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "adaptermix/errors.hpp"

namespace adaptermix {

namespace {

void check_width(const Tensor& h, std::size_t d_model, const char* op) {
  if (h.ndim() != 2 || h.cols() != d_model) {
    throw ShapeError(std::string(op) + ": input shape " +
                     shape_str(h.shape()) + " does not match model width [" +
                     std::to_string(d_model) + "]");
  }
}

}  // namespace

ResidualAdapter ResidualAdapter::init(std::size_t d_model, std::size_t r,
                                      SplitMix64& rng) {
  if (d_model < 2) {
    throw ConfigError("adapter d_model must be >= 2, got " +
                      std::to_string(d_model));
  }
  if (r < 1 || r > d_model) {
    throw ConfigError("adapter bottleneck r must be in [1, d_model=" +
                      std::to_string(d_model) + "], got " + std::to_string(r));
  }
  ResidualAdapter p;
  p.d_model = d_model;
  p.r = r;
  const double bound = 1.0 / std::sqrt(static_cast<double>(d_model));
  std::vector<double> down(d_model * r);
  for (double& v : down) v = rng.uniform(-bound, bound);
  p.w_down = Tensor::from_data({d_model, r}, std::move(down));
  // Zero up-projection: the adapter starts as the identity map.
  p.w_up = Tensor::zeros({r, d_model});
  p.ln_gain = Tensor::full({d_model}, 1.0);
  p.ln_bias = Tensor::zeros({d_model});
  return p;
}

MixtureOfAdapters MixtureOfAdapters::init(std::size_t d_model, std::size_t r,
                                          std::size_t n_adapters,
                                          double capacity, SplitMix64& rng) {
  if (n_adapters < 1) {
    throw ConfigError("mixture needs at least one adapter, got " +
                      std::to_string(n_adapters));
  }
  if (!(capacity > 0.0)) {
    throw ConfigError("mixture capacity must be > 0, got " +
                      std::to_string(capacity));
  }
  MixtureOfAdapters moa;
  moa.capacity = capacity;
  moa.adapters.reserve(n_adapters);
  for (std::size_t i = 0; i < n_adapters; ++i)
    moa.adapters.push_back(ResidualAdapter::init(d_model, r, rng));
  std::vector<double> g(d_model * n_adapters);
  for (double& v : g) v = rng.normal(0.0, 0.01);
  moa.gate_weight = Tensor::from_data({d_model, n_adapters}, std::move(g));
  return moa;
}

std::size_t compute_k(std::size_t n, double capacity, std::size_t n_adapters) {
  if (n < 1 || n_adapters < 1 || !(capacity > 0.0)) {
    throw ContractError("compute_k: need n >= 1, N >= 1, c > 0");
  }
  const double raw = static_cast<double>(n) * capacity /
                     static_cast<double>(n_adapters);
  auto k = static_cast<std::size_t>(std::floor(raw));
  k = std::max<std::size_t>(k, 1);
  k = std::min(k, n);
  return k;
}

Tensor adapter_core(const ResidualAdapter& params, const Tensor& h) {
  check_width(h, params.d_model, "adapter_core");
  const Tensor normed = layer_norm(h, params.ln_gain, params.ln_bias);
  return matmul(relu(matmul(normed, params.w_down)), params.w_up);
}

std::vector<std::vector<std::size_t>> select_topk_tokens(const Tensor& affinity,
                                                         std::size_t k) {
  const std::size_t n = affinity.rows(), N = affinity.cols();
  if (k < 1 || k > n) {
    throw ContractError("select_topk_tokens: k = " + std::to_string(k) +
                        " outside [1, n = " + std::to_string(n) + "]");
  }
  std::vector<std::vector<std::size_t>> picked(N);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < N; ++i) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Descending affinity; equal scores keep the smaller token index first.
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) {
                       return affinity(a, i) > affinity(b, i);
                     });
    picked[i].assign(order.begin(), order.begin() + k);
  }
  return picked;
}

RoutingPlan route(const MixtureOfAdapters& moa, const Tensor& h) {
  check_width(h, moa.d_model(), "route");
  NoGradScope no_grad;
  RoutingPlan plan;
  plan.affinity = softmax_rows(matmul(h, moa.gate_weight));
  plan.k = compute_k(h.rows(), moa.capacity, moa.n_adapters());
  plan.indices = select_topk_tokens(plan.affinity, plan.k);
  plan.gates = Tensor::zeros({moa.n_adapters(), plan.k});
  for (std::size_t i = 0; i < moa.n_adapters(); ++i)
    for (std::size_t j = 0; j < plan.k; ++j)
      plan.gates(i, j) = plan.affinity(plan.indices[i][j], i);
  return plan;
}

Tensor moa_forward_with_indices(
    const MixtureOfAdapters& moa, const Tensor& h,
    const std::vector<std::vector<std::size_t>>& indices) {
  check_width(h, moa.d_model(), "moa_forward");
  if (indices.size() != moa.n_adapters()) {
    throw ContractError("moa_forward: " + std::to_string(indices.size()) +
                        " index lists for " +
                        std::to_string(moa.n_adapters()) + " adapters");
  }
  const Tensor affinity = softmax_rows(matmul(h, moa.gate_weight));
  Tensor out = h;
  for (std::size_t i = 0; i < moa.n_adapters(); ++i) {
    const auto& idx = indices[i];
    const Tensor tokens = gather_rows(h, idx);
    const Tensor core = adapter_core(moa.adapters[i], tokens);
    const Tensor gate = gather_rows(slice_cols(affinity, i, 1), idx);
    out = scatter_add_rows(out, idx, scale_rows(core, gate));
  }
  return out;
}

Tensor moa_forward(const MixtureOfAdapters& moa, const Tensor& h) {
  check_width(h, moa.d_model(), "moa_forward");
  std::vector<std::vector<std::size_t>> indices;
  {
    NoGradScope no_grad;
    const Tensor affinity = softmax_rows(matmul(h, moa.gate_weight));
    const std::size_t k = compute_k(h.rows(), moa.capacity, moa.n_adapters());
    indices = select_topk_tokens(affinity, k);
  }
  return moa_forward_with_indices(moa, h, indices);
}

}  // namespace adaptermix

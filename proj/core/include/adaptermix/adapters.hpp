#pragma once

#include <cstddef>
#include <vector>

#include "adaptermix/rng.hpp"
#include "adaptermix/tensor.hpp"

namespace adaptermix {

/*
 * One residual adapter: LayerNorm -> down projection -> ReLU -> up
 * projection, added back onto its input. The up projection starts at zero
 * so a fresh adapter is exactly the identity map.
 */
struct ResidualAdapter {
  Tensor w_down;   // [d_model, r]
  Tensor w_up;     // [r, d_model]
  Tensor ln_gain;  // [d_model]
  Tensor ln_bias;  // [d_model]
  std::size_t d_model = 0;
  std::size_t r = 0;

  static ResidualAdapter init(std::size_t d_model, std::size_t r,
                              SplitMix64& rng);
};

/*
 * N residual adapters sharing one insertion slot, plus the routing
 * embedding W_g used to score tokens against adapters.
 */
struct MixtureOfAdapters {
  std::vector<ResidualAdapter> adapters;
  Tensor gate_weight;  // W_g [d_model, N]
  double capacity = 1.0;

  std::size_t n_adapters() const { return adapters.size(); }
  std::size_t d_model() const {
    return adapters.empty() ? 0 : adapters.front().d_model;
  }
  std::size_t bottleneck() const {
    return adapters.empty() ? 0 : adapters.front().r;
  }

  static MixtureOfAdapters init(std::size_t d_model, std::size_t r,
                                std::size_t n_adapters, double capacity,
                                SplitMix64& rng);
};

/*
 * Expert-choice routing decision for one sequence: each adapter
 * independently picks its k highest-affinity tokens. A token may be picked
 * by several adapters, or by none (it then passes through on the residual).
 */
struct RoutingPlan {
  Tensor affinity;  // S [n, N]; each row is a softmax over adapters
  std::size_t k = 0;
  std::vector<std::vector<std::size_t>> indices;  // per adapter, k token ids
  Tensor gates;  // [N, k]; gates(i, j) == affinity(indices[i][j], i)
};

/// Tokens per adapter: clamp(floor(n * c / N), 1, n).
std::size_t compute_k(std::size_t n, double capacity, std::size_t n_adapters);

/// The bottleneck transform without the residual: ReLU(LN(h) Wd) Wu.
/// Adding h to the result gives the full residual-adapter output.
Tensor adapter_core(const ResidualAdapter& params, const Tensor& h);

/// Per-adapter top-k token selection from an affinity matrix [n, N].
/// Ties break toward the smaller token index; each selection list is
/// ordered by descending affinity, then ascending index.
std::vector<std::vector<std::size_t>> select_topk_tokens(const Tensor& affinity,
                                                         std::size_t k);

/// Routing decision for h [n, d_model]. Runs outside the autodiff tape.
RoutingPlan route(const MixtureOfAdapters& moa, const Tensor& h);

/// Mixture forward with the routing indices fixed by the caller. Affinities
/// and gates are recomputed from the current weights, so gradients flow
/// through the gates (and W_g) and through the adapter weights; the discrete
/// indices themselves are treated as constants.
Tensor moa_forward_with_indices(
    const MixtureOfAdapters& moa, const Tensor& h,
    const std::vector<std::vector<std::size_t>>& indices);

/// Full mixture forward: route, then gather -> adapter core -> gate ->
/// scatter-add onto the residual.
Tensor moa_forward(const MixtureOfAdapters& moa, const Tensor& h);

}  // namespace adaptermix

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "adaptermix/data.hpp"
#include "adaptermix/model.hpp"

namespace adaptermix {

enum class TrainPhase { pretrain, adapt };

struct TrainConfig {
  double base_lr = 1e-3;
  std::size_t warmup_steps = 4000;
  std::vector<std::size_t> anneal_steps{6000, 7000, 8000};
  double anneal_rate = 0.3;
  std::size_t total_steps = 10000;
  std::size_t batch_size = 64;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 1;
  TrainPhase phase = TrainPhase::pretrain;

  /// warmup < min(anneal) < total, 0 < rate < 1. ConfigError naming the field.
  void validate() const;
};

/// base_lr * min(1, step/warmup) * rate^(number of anneal steps <= step).
/// Linear warmup from zero; the anneal power is an iterated product so the
/// value is reproducible to the bit.
double lr_at_step(const TrainConfig& config, std::size_t step);

/// Adam moments for one parameter tensor.
struct AdamSlot {
  std::vector<double> m, v;
  std::size_t t = 0;
  double beta1_t = 1.0;  // beta1^t, maintained incrementally
  double beta2_t = 1.0;
};

struct AdamState {
  std::vector<AdamSlot> slots;  // aligned with parameters() order
};

AdamState make_adam_state(const std::vector<ParamRef>& params);

/// Bias-corrected Adam on mask-trainable parameters only; frozen tensors
/// are never touched, even with a spurious gradient present. ContractError
/// when a trainable parameter has no gradient.
void adam_step(const std::vector<ParamRef>& params, const TrainableMask& mask,
               AdamState& state, double lr, const TrainConfig& config);

struct TrainRecord {
  std::size_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
};

/// Frame MSE + duration MSE + pitch MSE for one utterance, recorded on
/// the active graph.
Tensor utterance_loss(const BackboneModel& model, const Utterance& utterance);

/// Deterministic mini-batch training: per-epoch shuffles derived from
/// (seed, epoch), gradients averaged in fixed example order, one Adam step
/// per batch. DivergenceError naming the step if the loss leaves the reals.
std::vector<TrainRecord> train(BackboneModel& model,
                               const std::vector<Utterance>& dataset,
                               const TrainConfig& config,
                               const TrainableMask& mask);

/// Line-delimited (step, lr, loss) records.
void save_history(const std::vector<TrainRecord>& history,
                  const std::string& path);

}  // namespace adaptermix

/*
 * Adam, the warmup/annealing schedule, and the mini-batch training loop.
 */

#include "adaptermix/training.hpp"

#include <algorithm>
#include <utility>
#include <cmath>

#include "adaptermix/errors.hpp"
#include "adaptermix/rng.hpp"
#include "json_util.hpp"

namespace adaptermix {

void TrainConfig::validate() const {
  if (base_lr < 0.0) throw ConfigError("train.base_lr must be >= 0");
  if (!(anneal_rate > 0.0 && anneal_rate < 1.0))
    throw ConfigError("train.anneal_rate must be in (0, 1)");
  if (total_steps < 1) throw ConfigError("train.total_steps must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!anneal_steps.empty()) {
    const std::size_t lo =
        *std::min_element(anneal_steps.begin(), anneal_steps.end());
    if (warmup_steps >= lo)
      throw ConfigError(
          "train.warmup_steps must be below the first anneal step");
    if (lo >= total_steps)
      throw ConfigError("train.anneal_steps must lie below train.total_steps");
  }
  if (!(beta1 > 0.0 && beta1 < 1.0)) throw ConfigError("train.beta1 must be in (0, 1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) throw ConfigError("train.beta2 must be in (0, 1)");
  if (!(eps > 0.0)) throw ConfigError("train.eps must be > 0");
}

double lr_at_step(const TrainConfig& config, std::size_t step) {
  const double warm =
      (config.warmup_steps == 0 || step >= config.warmup_steps)
          ? 1.0
          : static_cast<double>(step) /
                static_cast<double>(config.warmup_steps);
  double anneal = 1.0;
  for (std::size_t at : config.anneal_steps)
    if (at <= step) anneal *= config.anneal_rate;
  return config.base_lr * warm * anneal;
}

AdamState make_adam_state(const std::vector<ParamRef>& params) {
  AdamState state;
  state.slots.resize(params.size());
  return state;
}

void adam_step(const std::vector<ParamRef>& params, const TrainableMask& mask,
               AdamState& state, double lr, const TrainConfig& config) {
  if (params.size() != mask.trainable.size() ||
      params.size() != state.slots.size()) {
    throw ContractError("adam_step: params/mask/state sizes disagree");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!mask.trainable[i]) continue;  // frozen stays frozen, grad or not
    Tensor t = params[i].tensor;  // handle copy; storage is shared
    if (!t.has_grad()) {
      throw ContractError("adam_step: trainable parameter '" +
                          params[i].name + "' has no gradient");
    }
    AdamSlot& slot = state.slots[i];
    if (slot.m.empty()) {
      slot.m.assign(t.numel(), 0.0);
      slot.v.assign(t.numel(), 0.0);
    }
    slot.t += 1;
    slot.beta1_t *= config.beta1;
    slot.beta2_t *= config.beta2;
    const double corr1 = 1.0 - slot.beta1_t;
    const double corr2 = 1.0 - slot.beta2_t;
    std::span<double> w = t.values();
    std::span<const double> g = std::as_const(t).grad();
    for (std::size_t j = 0; j < w.size(); ++j) {
      slot.m[j] = config.beta1 * slot.m[j] + (1.0 - config.beta1) * g[j];
      slot.v[j] = config.beta2 * slot.v[j] + (1.0 - config.beta2) * g[j] * g[j];
      const double m_hat = slot.m[j] / corr1;
      const double v_hat = slot.v[j] / corr2;
      w[j] -= lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
  }
}

Tensor utterance_loss(const BackboneModel& model, const Utterance& u) {
  const ForwardResult out =
      model.forward(u.tokens, u.speaker, &u.durations, &u.pitch);
  std::vector<double> dur(u.durations.size());
  for (std::size_t i = 0; i < u.durations.size(); ++i)
    dur[i] = static_cast<double>(u.durations[i]);
  const Tensor dur_target =
      Tensor::from_data({u.durations.size(), 1}, std::move(dur));
  const Tensor pitch_target = Tensor::from_data({u.pitch.size(), 1}, u.pitch);
  return add(add(mse_loss(out.frames, u.frames),
                 mse_loss(out.duration_pred, dur_target)),
             mse_loss(out.pitch, pitch_target));
}

std::vector<TrainRecord> train(BackboneModel& model,
                               const std::vector<Utterance>& dataset,
                               const TrainConfig& config,
                               const TrainableMask& mask) {
  config.validate();
  if (dataset.empty()) throw ContractError("train: empty dataset");
  apply_mask(model, mask);
  auto params = model.parameters();
  AdamState state = make_adam_state(params);

  std::vector<TrainRecord> history;
  history.reserve(config.total_steps);
  std::vector<std::size_t> order(dataset.size());
  std::size_t cursor = order.size();  // forces a shuffle on first use
  std::size_t epoch = 0;

  for (std::size_t step = 0; step < config.total_steps; ++step) {
    // Assemble the batch from the per-epoch permutation.
    std::vector<std::size_t> batch;
    batch.reserve(config.batch_size);
    while (batch.size() < config.batch_size) {
      if (cursor == order.size()) {
        if (!batch.empty()) break;  // partial batch closes the epoch
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        SplitMix64 rng(mix_seed(config.seed, 0xE90C + epoch));
        for (std::size_t i = order.size(); i > 1; --i)
          std::swap(order[i - 1], order[rng.next_below(i)]);
        cursor = 0;
        ++epoch;
      }
      batch.push_back(order[cursor++]);
    }

    for (std::size_t i = 0; i < params.size(); ++i)
      if (mask.trainable[i]) params[i].tensor.zero_grad();

    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    double mean_loss = 0.0;
    for (std::size_t idx : batch) {
      Graph graph;
      GraphScope scope(graph);
      const Tensor loss = utterance_loss(model, dataset[idx]);
      mean_loss += loss.item() * inv_batch;
      graph.backward(scale(loss, inv_batch));
    }
    if (!std::isfinite(mean_loss)) {
      throw DivergenceError(step, "training diverged at step " +
                                      std::to_string(step) +
                                      ": loss is not finite");
    }
    const double lr = lr_at_step(config, step);
    adam_step(params, mask, state, lr, config);
    history.push_back({step, lr, mean_loss});
  }
  return history;
}

void save_history(const std::vector<TrainRecord>& history,
                  const std::string& path) {
  std::string out;
  for (const TrainRecord& r : history) {
    out += json{{"step", r.step}, {"lr", r.lr}, {"loss", r.loss}}.dump();
    out += '\n';
  }
  write_text_file(path, out);
}

}  // namespace adaptermix

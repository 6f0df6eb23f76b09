#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adaptermix/adapters.hpp"
#include "adaptermix/tensor.hpp"

namespace adaptermix {

struct ModelConfig {
  std::size_t n_encoder_layers = 2;
  std::size_t n_decoder_layers = 3;
  std::size_t d_model = 32;
  std::size_t n_heads = 2;
  std::size_t d_ffn = 64;
  std::size_t vocab_size = 40;
  std::size_t n_speakers = 12;
  std::size_t mel_dim = 16;
  std::size_t max_duration = 4;

  /// ConfigError naming the offending field.
  void validate() const;

  /// CPU-trainable in minutes; the config every test corpus uses.
  static ModelConfig desk_default();
  /// Full-size dimensions, kept for parameter accounting only.
  static ModelConfig full_scale();
};

enum class StrategyKind { finetune, single_adapter, adapter_mix };

std::string to_string(StrategyKind kind);
StrategyKind strategy_kind_from_string(const std::string& name);

/*
 * How a pretrained backbone is specialized to a new speaker. single_adapter
 * is adapter_mix with one adapter and capacity 1.
 */
struct AdaptationStrategy {
  StrategyKind kind = StrategyKind::adapter_mix;
  std::size_t decoder_r = 128;
  std::size_t variance_r = 64;
  std::size_t n_adapters = 4;
  double capacity = 1.0;

  std::size_t effective_n() const {
    return kind == StrategyKind::single_adapter ? 1 : n_adapters;
  }
  double effective_c() const {
    return kind == StrategyKind::single_adapter ? 1.0 : capacity;
  }
};

struct LayerNormParams {
  Tensor gain;  // [d]
  Tensor bias;  // [d]
};

struct AttentionParams {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
};

struct FeedForwardParams {
  Tensor w1, b1, w2, b2;
};

struct TransformerLayer {
  LayerNormParams attn_norm;
  AttentionParams attn;
  LayerNormParams ffn_norm;
  FeedForwardParams ffn;
  // Decoder layers carry one slot after the feed-forward sub-layer,
  // empty until adapters are inserted.
  std::optional<MixtureOfAdapters> adapter_slot;
};

struct VarianceStub {
  Tensor duration_w, duration_b;  // d_model -> 1, predicts the duration
  Tensor pitch_w, pitch_b;        // d_model -> 1
  Tensor pitch_proj;              // [1, d_model], embeds the pitch scalar
  std::optional<ResidualAdapter> adapter;
};

/// Pre-norm multi-head self-attention. Exposed for gradient checking.
Tensor multi_head_self_attention(const AttentionParams& p, const Tensor& x,
                                 std::size_t n_heads);

/// Sinusoidal position table [n, d], constant (never trained).
Tensor sinusoid_positions(std::size_t n, std::size_t d);

/// Frame index list realizing length regulation: token i repeated
/// durations[i] times.
std::vector<std::size_t> frame_indices(const std::vector<std::size_t>& durations);

/// Inference duration from the head output: round half up, floor 1, cap.
std::size_t rounded_duration(double predicted, std::size_t max_duration);

struct ForwardResult {
  Tensor frames;         // [T, mel_dim]
  Tensor duration_pred;  // [n, 1] head output, linear-space durations
  Tensor pitch;          // [n, 1] head output
  std::vector<std::size_t> durations;  // per token, as used for regulation
};

struct ParamRef {
  std::string name;
  Tensor tensor;
};

struct TrainableMask {
  std::vector<std::uint8_t> trainable;  // aligned with parameters() order
};

struct ParamCounts {
  std::size_t total = 0;
  std::size_t trainable = 0;
  double fraction() const {
    return total == 0 ? 0.0
                      : static_cast<double>(trainable) /
                            static_cast<double>(total);
  }
};

/*
 * Toy transformer TTS-like backbone: token/speaker embeddings, pre-norm
 * encoder, variance stub with length regulation, pre-norm decoder with one
 * adapter slot per layer, linear output projection and a residual affine
 * postnet. Forward is a pure function of (parameters, inputs).
 */
class BackboneModel {
 public:
  BackboneModel(const ModelConfig& config, std::uint64_t init_seed);

  const ModelConfig& config() const { return config_; }
  std::uint64_t init_seed() const { return init_seed_; }

  /// Teacher durations/pitch drive length regulation and the pitch
  /// embedding when given (training); otherwise the model runs free
  /// (durations rounded from its own head, capped at max_duration).
  ForwardResult forward(std::span<const std::size_t> tokens,
                        std::size_t speaker,
                        const std::vector<std::size_t>* teacher_durations =
                            nullptr,
                        const std::vector<double>* teacher_pitch = nullptr)
      const;

  /// Fills every decoder slot with a mixture and appends the variance
  /// adapter. Forward output is unchanged until training (zero-init up
  /// projections). StateError on double insertion.
  void insert_adapters(const AdaptationStrategy& strategy, std::uint64_t seed);
  bool adapters_inserted() const { return adapter_strategy_.has_value(); }
  const AdaptationStrategy* adapter_strategy() const {
    return adapter_strategy_ ? &*adapter_strategy_ : nullptr;
  }

  /// Every named parameter tensor, in a construction-stable order.
  std::vector<ParamRef> parameters() const;

  // Internals exposed for targeted tests and the training loop.
  std::vector<TransformerLayer>& decoder_layers() { return decoder_; }
  const std::vector<TransformerLayer>& decoder_layers() const {
    return decoder_;
  }
  VarianceStub& variance() { return variance_; }

 private:
  Tensor encode(const Tensor& x) const;  // encoder stack incl. final norm

  ModelConfig config_;
  std::uint64_t init_seed_ = 0;
  Tensor token_embedding_;            // [vocab, d]
  std::vector<Tensor> speaker_rows_;  // n_speakers x [1, d]
  std::vector<TransformerLayer> encoder_;
  LayerNormParams encoder_norm_;
  VarianceStub variance_;
  std::vector<TransformerLayer> decoder_;
  LayerNormParams decoder_norm_;
  Tensor output_w, output_b;    // [d, mel], [mel]
  Tensor postnet_w, postnet_b;  // [mel, mel], [mel]
  std::optional<AdaptationStrategy> adapter_strategy_;
};

/// finetune: everything. Adapter strategies: adapter parameters plus the
/// adapt speaker's embedding row; everything else frozen.
TrainableMask build_trainable_mask(const BackboneModel& model,
                                   const AdaptationStrategy& strategy,
                                   std::size_t adapt_speaker);

/// Sets requires_grad on every parameter from the mask.
void apply_mask(BackboneModel& model, const TrainableMask& mask);

/// Mask implied by the current requires_grad flags.
TrainableMask mask_from_flags(const BackboneModel& model);

ParamCounts count_parameters(const BackboneModel& model,
                             const TrainableMask& mask);

}  // namespace adaptermix

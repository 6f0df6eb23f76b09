/*
 * The frozen-backbone model: embeddings, pre-norm transformer stacks,
 * variance stub with length regulation, adapter slots, output head.
 */

#include "adaptermix/model.hpp"

#include <cmath>
#include <stdexcept>

#include "adaptermix/errors.hpp"

namespace adaptermix {

namespace {

Tensor init_weight(std::size_t rows, std::size_t cols, SplitMix64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
  std::vector<double> v(rows * cols);
  for (double& x : v) x = rng.uniform(-bound, bound);
  return Tensor::from_data({rows, cols}, std::move(v));
}

Tensor init_embedding(std::size_t rows, std::size_t cols, SplitMix64& rng) {
  std::vector<double> v(rows * cols);
  for (double& x : v) x = rng.uniform(-0.3, 0.3);
  return Tensor::from_data({rows, cols}, std::move(v));
}

LayerNormParams init_norm(std::size_t d) {
  return {Tensor::full({d}, 1.0), Tensor::zeros({d})};
}

AttentionParams init_attention(std::size_t d, SplitMix64& rng) {
  AttentionParams p;
  p.wq = init_weight(d, d, rng);
  p.bq = Tensor::zeros({d});
  p.wk = init_weight(d, d, rng);
  p.bk = Tensor::zeros({d});
  p.wv = init_weight(d, d, rng);
  p.bv = Tensor::zeros({d});
  p.wo = init_weight(d, d, rng);
  p.bo = Tensor::zeros({d});
  return p;
}

FeedForwardParams init_ffn(std::size_t d, std::size_t d_ffn, SplitMix64& rng) {
  FeedForwardParams p;
  p.w1 = init_weight(d, d_ffn, rng);
  p.b1 = Tensor::zeros({d_ffn});
  p.w2 = init_weight(d_ffn, d, rng);
  p.b2 = Tensor::zeros({d});
  return p;
}

Tensor feed_forward(const FeedForwardParams& p, const Tensor& x) {
  return add_row_bias(matmul(relu(add_row_bias(matmul(x, p.w1), p.b1)), p.w2),
                      p.b2);
}

Tensor transformer_layer_forward(const TransformerLayer& layer, const Tensor& x,
                                 std::size_t n_heads) {
  Tensor h = add(x, multi_head_self_attention(
                        layer.attn,
                        layer_norm(x, layer.attn_norm.gain, layer.attn_norm.bias),
                        n_heads));
  h = add(h, feed_forward(layer.ffn, layer_norm(h, layer.ffn_norm.gain,
                                                layer.ffn_norm.bias)));
  if (layer.adapter_slot) h = moa_forward(*layer.adapter_slot, h);
  return h;
}

void push_norm(std::vector<ParamRef>& out, const std::string& prefix,
               const LayerNormParams& p) {
  out.push_back({prefix + ".gain", p.gain});
  out.push_back({prefix + ".bias", p.bias});
}

void push_attention(std::vector<ParamRef>& out, const std::string& prefix,
                    const AttentionParams& p) {
  out.push_back({prefix + ".wq", p.wq});
  out.push_back({prefix + ".bq", p.bq});
  out.push_back({prefix + ".wk", p.wk});
  out.push_back({prefix + ".bk", p.bk});
  out.push_back({prefix + ".wv", p.wv});
  out.push_back({prefix + ".bv", p.bv});
  out.push_back({prefix + ".wo", p.wo});
  out.push_back({prefix + ".bo", p.bo});
}

void push_ffn(std::vector<ParamRef>& out, const std::string& prefix,
              const FeedForwardParams& p) {
  out.push_back({prefix + ".w1", p.w1});
  out.push_back({prefix + ".b1", p.b1});
  out.push_back({prefix + ".w2", p.w2});
  out.push_back({prefix + ".b2", p.b2});
}

void push_adapter(std::vector<ParamRef>& out, const std::string& prefix,
                  const ResidualAdapter& a) {
  out.push_back({prefix + ".w_down", a.w_down});
  out.push_back({prefix + ".w_up", a.w_up});
  out.push_back({prefix + ".ln_gain", a.ln_gain});
  out.push_back({prefix + ".ln_bias", a.ln_bias});
}

void push_layer(std::vector<ParamRef>& out, const std::string& prefix,
                const TransformerLayer& layer) {
  push_norm(out, prefix + ".attn_norm", layer.attn_norm);
  push_attention(out, prefix + ".attn", layer.attn);
  push_norm(out, prefix + ".ffn_norm", layer.ffn_norm);
  push_ffn(out, prefix + ".ffn", layer.ffn);
  if (layer.adapter_slot) {
    const MixtureOfAdapters& moa = *layer.adapter_slot;
    for (std::size_t i = 0; i < moa.n_adapters(); ++i)
      push_adapter(out, prefix + ".adapters." + std::to_string(i),
                   moa.adapters[i]);
    out.push_back({prefix + ".gate.weight", moa.gate_weight});
  }
}

bool is_adapter_param(const std::string& name) {
  return name.find(".adapters.") != std::string::npos ||
         name.find(".gate.") != std::string::npos ||
         name.rfind("variance.adapter.", 0) == 0;
}

}  // namespace

void ModelConfig::validate() const {
  if (d_model < 2) throw ConfigError("model.d_model must be >= 2");
  if (n_heads < 1) throw ConfigError("model.n_heads must be >= 1");
  if (d_model % n_heads != 0)
    throw ConfigError("model.d_model must be divisible by model.n_heads");
  if (n_encoder_layers < 1)
    throw ConfigError("model.n_encoder_layers must be >= 1");
  if (n_decoder_layers < 1)
    throw ConfigError("model.n_decoder_layers must be >= 1");
  if (d_ffn < 1) throw ConfigError("model.d_ffn must be >= 1");
  if (vocab_size < 1) throw ConfigError("model.vocab_size must be >= 1");
  if (n_speakers < 1) throw ConfigError("model.n_speakers must be >= 1");
  if (mel_dim < 2) throw ConfigError("model.mel_dim must be >= 2");
  if (max_duration < 1) throw ConfigError("model.max_duration must be >= 1");
}

ModelConfig ModelConfig::desk_default() { return ModelConfig{}; }

ModelConfig ModelConfig::full_scale() {
  ModelConfig c;
  c.n_encoder_layers = 4;
  c.n_decoder_layers = 6;
  c.d_model = 256;
  c.n_heads = 4;
  c.d_ffn = 128;
  c.vocab_size = 80;
  c.n_speakers = 251;
  c.mel_dim = 80;
  c.max_duration = 8;
  return c;
}

std::string to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::finetune: return "finetune";
    case StrategyKind::single_adapter: return "single_adapter";
    case StrategyKind::adapter_mix: return "adapter_mix";
  }
  throw std::logic_error("unreachable strategy kind");
}

StrategyKind strategy_kind_from_string(const std::string& name) {
  if (name == "finetune") return StrategyKind::finetune;
  if (name == "single_adapter") return StrategyKind::single_adapter;
  if (name == "adapter_mix") return StrategyKind::adapter_mix;
  throw ConfigError("strategy.kind: unknown value '" + name + "'");
}

Tensor multi_head_self_attention(const AttentionParams& p, const Tensor& x,
                                 std::size_t n_heads) {
  const std::size_t d = x.cols();
  if (n_heads == 0 || d % n_heads != 0) {
    throw ShapeError("attention: width " + std::to_string(d) +
                     " not divisible into " + std::to_string(n_heads) +
                     " heads");
  }
  const std::size_t d_head = d / n_heads;
  const Tensor q = add_row_bias(matmul(x, p.wq), p.bq);
  const Tensor k = add_row_bias(matmul(x, p.wk), p.bk);
  const Tensor v = add_row_bias(matmul(x, p.wv), p.bv);
  std::vector<Tensor> heads;
  heads.reserve(n_heads);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(d_head));
  for (std::size_t h = 0; h < n_heads; ++h) {
    const Tensor qh = slice_cols(q, h * d_head, d_head);
    const Tensor kh = slice_cols(k, h * d_head, d_head);
    const Tensor vh = slice_cols(v, h * d_head, d_head);
    const Tensor weights =
        softmax_rows(scale(matmul(qh, transpose(kh)), inv_sqrt));
    heads.push_back(matmul(weights, vh));
  }
  return add_row_bias(matmul(concat_cols(heads), p.wo), p.bo);
}

Tensor sinusoid_positions(std::size_t n, std::size_t d) {
  Tensor pe = Tensor::zeros({n, d});
  for (std::size_t pos = 0; pos < n; ++pos) {
    for (std::size_t i = 0; i < d; i += 2) {
      const double angle =
          static_cast<double>(pos) /
          std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d));
      pe(pos, i) = std::sin(angle);
      if (i + 1 < d) pe(pos, i + 1) = std::cos(angle);
    }
  }
  return pe;
}

std::vector<std::size_t> frame_indices(
    const std::vector<std::size_t>& durations) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < durations.size(); ++i)
    idx.insert(idx.end(), durations[i], i);
  return idx;
}

std::size_t rounded_duration(double predicted, std::size_t max_duration) {
  const double raw = std::floor(predicted + 0.5);
  if (!(raw >= 1.0)) return 1;
  if (raw >= static_cast<double>(max_duration)) return max_duration;
  return static_cast<std::size_t>(raw);
}

BackboneModel::BackboneModel(const ModelConfig& config, std::uint64_t init_seed)
    : config_(config), init_seed_(init_seed) {
  config_.validate();
  SplitMix64 rng(mix_seed(init_seed, 0xB0D1));
  const std::size_t d = config_.d_model;
  token_embedding_ = init_embedding(config_.vocab_size, d, rng);
  speaker_rows_.reserve(config_.n_speakers);
  for (std::size_t s = 0; s < config_.n_speakers; ++s)
    speaker_rows_.push_back(init_embedding(1, d, rng));
  for (std::size_t l = 0; l < config_.n_encoder_layers; ++l) {
    TransformerLayer layer;
    layer.attn_norm = init_norm(d);
    layer.attn = init_attention(d, rng);
    layer.ffn_norm = init_norm(d);
    layer.ffn = init_ffn(d, config_.d_ffn, rng);
    encoder_.push_back(std::move(layer));
  }
  encoder_norm_ = init_norm(d);
  variance_.duration_w = init_weight(d, 1, rng);
  variance_.duration_b = Tensor::zeros({1});
  variance_.pitch_w = init_weight(d, 1, rng);
  variance_.pitch_b = Tensor::zeros({1});
  variance_.pitch_proj = init_weight(1, d, rng);
  for (std::size_t l = 0; l < config_.n_decoder_layers; ++l) {
    TransformerLayer layer;
    layer.attn_norm = init_norm(d);
    layer.attn = init_attention(d, rng);
    layer.ffn_norm = init_norm(d);
    layer.ffn = init_ffn(d, config_.d_ffn, rng);
    decoder_.push_back(std::move(layer));
  }
  decoder_norm_ = init_norm(d);
  output_w = init_weight(d, config_.mel_dim, rng);
  output_b = Tensor::zeros({config_.mel_dim});
  postnet_w = init_weight(config_.mel_dim, config_.mel_dim, rng);
  postnet_b = Tensor::zeros({config_.mel_dim});
}

Tensor BackboneModel::encode(const Tensor& x) const {
  Tensor h = x;
  for (const TransformerLayer& layer : encoder_)
    h = transformer_layer_forward(layer, h, config_.n_heads);
  return layer_norm(h, encoder_norm_.gain, encoder_norm_.bias);
}

ForwardResult BackboneModel::forward(
    std::span<const std::size_t> tokens, std::size_t speaker,
    const std::vector<std::size_t>* teacher_durations,
    const std::vector<double>* teacher_pitch) const {
  if (speaker >= config_.n_speakers) {
    throw IdError("unknown speaker id " + std::to_string(speaker) +
                  " (model has " + std::to_string(config_.n_speakers) + ")");
  }
  for (std::size_t t : tokens) {
    if (t >= config_.vocab_size) {
      throw IdError("unknown token id " + std::to_string(t) + " (vocab " +
                    std::to_string(config_.vocab_size) + ")");
    }
  }
  const std::size_t n = tokens.size();
  if (n == 0) {
    return {Tensor::zeros({0, config_.mel_dim}), Tensor::zeros({0, 1}),
            Tensor::zeros({0, 1}), {}};
  }
  if (teacher_durations && teacher_durations->size() != n) {
    throw ContractError("forward: teacher durations length " +
                        std::to_string(teacher_durations->size()) +
                        " for " + std::to_string(n) + " tokens");
  }
  if (teacher_pitch && teacher_pitch->size() != n) {
    throw ContractError("forward: teacher pitch length " +
                        std::to_string(teacher_pitch->size()) + " for " +
                        std::to_string(n) + " tokens");
  }

  const std::vector<std::size_t> token_ids(tokens.begin(), tokens.end());
  Tensor x = gather_rows(token_embedding_, token_ids);
  x = add(x, sinusoid_positions(n, config_.d_model));
  x = encode(x);
  x = add_row_bias(x, speaker_rows_[speaker]);

  const Tensor duration_pred =
      add_row_bias(matmul(x, variance_.duration_w), variance_.duration_b);
  const Tensor pitch_pred =
      add_row_bias(matmul(x, variance_.pitch_w), variance_.pitch_b);

  const Tensor pitch_in =
      teacher_pitch ? Tensor::from_data({n, 1}, *teacher_pitch) : pitch_pred;
  x = add(x, matmul(pitch_in, variance_.pitch_proj));
  if (variance_.adapter) x = add(x, adapter_core(*variance_.adapter, x));

  std::vector<std::size_t> durations;
  if (teacher_durations) {
    durations = *teacher_durations;
  } else {
    durations.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
      durations.push_back(
          rounded_duration(duration_pred.values()[i], config_.max_duration));
  }

  Tensor y = gather_rows(x, frame_indices(durations));
  y = add(y, sinusoid_positions(y.rows(), config_.d_model));
  for (const TransformerLayer& layer : decoder_)
    y = transformer_layer_forward(layer, y, config_.n_heads);
  y = layer_norm(y, decoder_norm_.gain, decoder_norm_.bias);

  Tensor frames = add_row_bias(matmul(y, output_w), output_b);
  frames = add(frames, add_row_bias(matmul(frames, postnet_w), postnet_b));
  return {frames, duration_pred, pitch_pred, std::move(durations)};
}

void BackboneModel::insert_adapters(const AdaptationStrategy& strategy,
                                    std::uint64_t seed) {
  if (strategy.kind == StrategyKind::finetune) {
    throw ContractError("insert_adapters: finetune strategy has no adapters");
  }
  if (adapter_strategy_) {
    throw StateError("insert_adapters: adapters already inserted");
  }
  SplitMix64 rng(mix_seed(seed, 0xADA7));
  for (TransformerLayer& layer : decoder_) {
    layer.adapter_slot = MixtureOfAdapters::init(
        config_.d_model, strategy.decoder_r, strategy.effective_n(),
        strategy.effective_c(), rng);
  }
  variance_.adapter =
      ResidualAdapter::init(config_.d_model, strategy.variance_r, rng);
  adapter_strategy_ = strategy;
}

std::vector<ParamRef> BackboneModel::parameters() const {
  std::vector<ParamRef> out;
  out.push_back({"token_embedding.weight", token_embedding_});
  for (std::size_t s = 0; s < speaker_rows_.size(); ++s)
    out.push_back({"speaker_embedding." + std::to_string(s), speaker_rows_[s]});
  for (std::size_t l = 0; l < encoder_.size(); ++l)
    push_layer(out, "encoder." + std::to_string(l), encoder_[l]);
  push_norm(out, "encoder_norm", encoder_norm_);
  out.push_back({"variance.duration.weight", variance_.duration_w});
  out.push_back({"variance.duration.bias", variance_.duration_b});
  out.push_back({"variance.pitch.weight", variance_.pitch_w});
  out.push_back({"variance.pitch.bias", variance_.pitch_b});
  out.push_back({"variance.pitch_proj.weight", variance_.pitch_proj});
  if (variance_.adapter)
    push_adapter(out, "variance.adapter", *variance_.adapter);
  for (std::size_t l = 0; l < decoder_.size(); ++l)
    push_layer(out, "decoder." + std::to_string(l), decoder_[l]);
  push_norm(out, "decoder_norm", decoder_norm_);
  out.push_back({"output_proj.weight", output_w});
  out.push_back({"output_proj.bias", output_b});
  out.push_back({"postnet.weight", postnet_w});
  out.push_back({"postnet.bias", postnet_b});
  return out;
}

TrainableMask build_trainable_mask(const BackboneModel& model,
                                   const AdaptationStrategy& strategy,
                                   std::size_t adapt_speaker) {
  if (adapt_speaker >= model.config().n_speakers) {
    throw IdError("unknown adapt speaker id " + std::to_string(adapt_speaker));
  }
  const auto params = model.parameters();
  TrainableMask mask;
  mask.trainable.assign(params.size(), 0);
  if (strategy.kind == StrategyKind::finetune) {
    mask.trainable.assign(params.size(), 1);
    return mask;
  }
  if (!model.adapters_inserted()) {
    throw StateError("build_trainable_mask: " + to_string(strategy.kind) +
                     " strategy requires adapters to be inserted first");
  }
  const std::string speaker_name =
      "speaker_embedding." + std::to_string(adapt_speaker);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (is_adapter_param(params[i].name) || params[i].name == speaker_name)
      mask.trainable[i] = 1;
  }
  return mask;
}

void apply_mask(BackboneModel& model, const TrainableMask& mask) {
  auto params = model.parameters();
  if (params.size() != mask.trainable.size()) {
    throw ContractError("apply_mask: mask covers " +
                        std::to_string(mask.trainable.size()) +
                        " tensors, model has " +
                        std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i)
    params[i].tensor.set_requires_grad(mask.trainable[i] != 0);
}

TrainableMask mask_from_flags(const BackboneModel& model) {
  TrainableMask mask;
  for (const ParamRef& p : model.parameters())
    mask.trainable.push_back(p.tensor.requires_grad() ? 1 : 0);
  return mask;
}

ParamCounts count_parameters(const BackboneModel& model,
                             const TrainableMask& mask) {
  const auto params = model.parameters();
  if (params.size() != mask.trainable.size()) {
    throw ContractError("count_parameters: mask covers " +
                        std::to_string(mask.trainable.size()) +
                        " tensors, model has " +
                        std::to_string(params.size()));
  }
  ParamCounts counts;
  for (std::size_t i = 0; i < params.size(); ++i) {
    counts.total += params[i].tensor.numel();
    if (mask.trainable[i]) counts.trainable += params[i].tensor.numel();
  }
  return counts;
}

}  // namespace adaptermix

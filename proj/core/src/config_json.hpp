#pragma once

#include "adaptermix/data.hpp"
#include "adaptermix/evaluation.hpp"
#include "adaptermix/model.hpp"
#include "adaptermix/training.hpp"
#include "json_util.hpp"

namespace adaptermix {

inline json model_config_to_json(const ModelConfig& c) {
  return json{{"n_encoder_layers", c.n_encoder_layers},
              {"n_decoder_layers", c.n_decoder_layers},
              {"d_model", c.d_model},
              {"n_heads", c.n_heads},
              {"d_ffn", c.d_ffn},
              {"vocab_size", c.vocab_size},
              {"n_speakers", c.n_speakers},
              {"mel_dim", c.mel_dim},
              {"max_duration", c.max_duration}};
}

inline ModelConfig model_config_from_json(const json& j,
                                          const std::string& path) {
  ModelConfig c;
  c.n_encoder_layers = field_as<std::size_t>(j, "n_encoder_layers", path);
  c.n_decoder_layers = field_as<std::size_t>(j, "n_decoder_layers", path);
  c.d_model = field_as<std::size_t>(j, "d_model", path);
  c.n_heads = field_as<std::size_t>(j, "n_heads", path);
  c.d_ffn = field_as<std::size_t>(j, "d_ffn", path);
  c.vocab_size = field_as<std::size_t>(j, "vocab_size", path);
  c.n_speakers = field_as<std::size_t>(j, "n_speakers", path);
  c.mel_dim = field_as<std::size_t>(j, "mel_dim", path);
  c.max_duration = field_as<std::size_t>(j, "max_duration", path);
  return c;
}

inline json strategy_to_json(const AdaptationStrategy& s) {
  return json{{"kind", to_string(s.kind)},
              {"decoder_r", s.decoder_r},
              {"variance_r", s.variance_r},
              {"n_adapters", s.n_adapters},
              {"capacity", s.capacity}};
}

inline AdaptationStrategy strategy_from_json(const json& j,
                                             const std::string& path) {
  AdaptationStrategy s;
  s.kind = strategy_kind_from_string(field_as<std::string>(j, "kind", path));
  s.decoder_r = field_as<std::size_t>(j, "decoder_r", path);
  s.variance_r = field_as<std::size_t>(j, "variance_r", path);
  s.n_adapters = field_as<std::size_t>(j, "n_adapters", path);
  s.capacity = field_as<double>(j, "capacity", path);
  return s;
}

inline json corpus_config_to_json(const CorpusConfig& c) {
  return json{{"n_speakers", c.n_speakers},
              {"n_adapt_speakers", c.n_adapt_speakers},
              {"utterances_per_speaker", c.utterances_per_speaker},
              {"adapt_utterances_per_speaker", c.adapt_utterances_per_speaker},
              {"min_tokens", c.min_tokens},
              {"max_tokens", c.max_tokens},
              {"vocab_size", c.vocab_size},
              {"mel_dim", c.mel_dim},
              {"max_duration", c.max_duration},
              {"frames_per_minute", c.frames_per_minute},
              {"seed", c.seed}};
}

inline CorpusConfig corpus_config_from_json(const json& j,
                                            const std::string& path) {
  CorpusConfig c;
  c.n_speakers = field_as<std::size_t>(j, "n_speakers", path);
  c.n_adapt_speakers = field_as<std::size_t>(j, "n_adapt_speakers", path);
  c.utterances_per_speaker =
      field_as<std::size_t>(j, "utterances_per_speaker", path);
  c.adapt_utterances_per_speaker =
      field_as<std::size_t>(j, "adapt_utterances_per_speaker", path);
  c.min_tokens = field_as<std::size_t>(j, "min_tokens", path);
  c.max_tokens = field_as<std::size_t>(j, "max_tokens", path);
  c.vocab_size = field_as<std::size_t>(j, "vocab_size", path);
  c.mel_dim = field_as<std::size_t>(j, "mel_dim", path);
  c.max_duration = field_as<std::size_t>(j, "max_duration", path);
  c.frames_per_minute = field_as<std::size_t>(j, "frames_per_minute", path);
  c.seed = field_as<std::uint64_t>(j, "seed", path);
  return c;
}

inline json train_config_to_json(const TrainConfig& c) {
  return json{{"base_lr", c.base_lr},
              {"warmup_steps", c.warmup_steps},
              {"anneal_steps", c.anneal_steps},
              {"anneal_rate", c.anneal_rate},
              {"total_steps", c.total_steps},
              {"batch_size", c.batch_size},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"eps", c.eps},
              {"seed", c.seed}};
}

inline TrainConfig train_config_from_json(const json& j,
                                          const std::string& path) {
  TrainConfig c;
  c.base_lr = field_as<double>(j, "base_lr", path);
  c.warmup_steps = field_as<std::size_t>(j, "warmup_steps", path);
  c.anneal_steps =
      field_as<std::vector<std::size_t>>(j, "anneal_steps", path);
  c.anneal_rate = field_as<double>(j, "anneal_rate", path);
  c.total_steps = field_as<std::size_t>(j, "total_steps", path);
  c.batch_size = field_as<std::size_t>(j, "batch_size", path);
  c.beta1 = field_as<double>(j, "beta1", path);
  c.beta2 = field_as<double>(j, "beta2", path);
  c.eps = field_as<double>(j, "eps", path);
  c.seed = field_as<std::uint64_t>(j, "seed", path);
  return c;
}

inline json embedder_options_to_json(const EmbedderOptions& o) {
  return json{{"embedding_dim", o.embedding_dim},
              {"steps", o.steps},
              {"lr", o.lr},
              {"seed", o.seed}};
}

inline EmbedderOptions embedder_options_from_json(const json& j,
                                                  const std::string& path) {
  EmbedderOptions o;
  o.embedding_dim = field_as<std::size_t>(j, "embedding_dim", path);
  o.steps = field_as<std::size_t>(j, "steps", path);
  o.lr = field_as<double>(j, "lr", path);
  o.seed = field_as<std::uint64_t>(j, "seed", path);
  return o;
}

}  // namespace adaptermix

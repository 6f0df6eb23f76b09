#include "adaptermix/experiment.hpp"

#include "config_json.hpp"

namespace adaptermix {

void ExperimentConfig::validate() const {
  model.validate();
  corpus.validate();
  pretrain.validate();
  adapt.validate();
  if (model.vocab_size != corpus.vocab_size)
    throw ConfigError("corpus.vocab_size must equal model.vocab_size");
  if (model.mel_dim != corpus.mel_dim)
    throw ConfigError("corpus.mel_dim must equal model.mel_dim");
  if (model.n_speakers != corpus.total_speakers())
    throw ConfigError(
        "model.n_speakers must equal corpus.n_speakers + "
        "corpus.n_adapt_speakers");
  if (adapt_speaker < corpus.n_speakers ||
      adapt_speaker >= corpus.total_speakers())
    throw ConfigError("adapt_speaker must name an adaptation speaker");
  if (budgets_minutes.empty())
    throw ConfigError("budgets_minutes must not be empty");
  if (strategy.kind != StrategyKind::finetune) {
    if (strategy.decoder_r > model.d_model)
      throw ConfigError("strategy.decoder_r must be <= model.d_model");
    if (strategy.variance_r > model.d_model)
      throw ConfigError("strategy.variance_r must be <= model.d_model");
  }
  if (embedder.embedding_dim < 8)
    throw ConfigError("embedder.embedding_dim must be >= 8");
}

std::string ExperimentConfig::to_json_string() const {
  json doc;
  doc["model"] = model_config_to_json(model);
  doc["corpus"] = corpus_config_to_json(corpus);
  doc["pretrain"] = train_config_to_json(pretrain);
  doc["adapt"] = train_config_to_json(adapt);
  doc["strategy"] = strategy_to_json(strategy);
  doc["budgets_minutes"] = budgets_minutes;
  doc["adapt_speaker"] = adapt_speaker;
  doc["seeds"] = json{{"model_init", model_init_seed},
                      {"adapter", adapter_seed}};
  doc["embedder"] = embedder_options_to_json(embedder);
  return doc.dump(2) + "\n";
}

ExperimentConfig ExperimentConfig::from_json_string(const std::string& text) {
  const json doc = parse_json(text, "experiment config");
  ExperimentConfig c;
  c.model =
      model_config_from_json(require_field(doc, "model", ""), "model");
  c.corpus =
      corpus_config_from_json(require_field(doc, "corpus", ""), "corpus");
  c.pretrain = train_config_from_json(require_field(doc, "pretrain", ""),
                                      "pretrain");
  c.pretrain.phase = TrainPhase::pretrain;
  c.adapt = train_config_from_json(require_field(doc, "adapt", ""), "adapt");
  c.adapt.phase = TrainPhase::adapt;
  c.strategy =
      strategy_from_json(require_field(doc, "strategy", ""), "strategy");
  c.budgets_minutes =
      field_as<std::vector<std::size_t>>(doc, "budgets_minutes", "");
  c.adapt_speaker = field_as<std::size_t>(doc, "adapt_speaker", "");
  const json& seeds = require_field(doc, "seeds", "");
  c.model_init_seed = field_as<std::uint64_t>(seeds, "model_init", "seeds");
  c.adapter_seed = field_as<std::uint64_t>(seeds, "adapter", "seeds");
  c.embedder = embedder_options_from_json(require_field(doc, "embedder", ""),
                                          "embedder");
  return c;
}

void ExperimentConfig::save(const std::string& path) const {
  write_text_file(path, to_json_string());
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  return from_json_string(read_text_file(path));
}

ExperimentConfig ExperimentConfig::desk_reference() {
  ExperimentConfig c;
  c.model = ModelConfig::desk_default();

  c.corpus = CorpusConfig{};
  c.corpus.seed = 1234;

  c.pretrain.base_lr = 1e-3;
  c.pretrain.warmup_steps = 250;
  c.pretrain.anneal_steps = {3500, 4200, 4800};
  c.pretrain.anneal_rate = 0.3;
  c.pretrain.total_steps = 5000;
  c.pretrain.batch_size = 8;
  c.pretrain.seed = 7;
  c.pretrain.phase = TrainPhase::pretrain;

  c.adapt.base_lr = 3e-3;
  c.adapt.warmup_steps = 100;
  c.adapt.anneal_steps = {700, 820, 940};
  c.adapt.anneal_rate = 0.3;
  c.adapt.total_steps = 1000;
  c.adapt.batch_size = 8;
  c.adapt.seed = 11;
  c.adapt.phase = TrainPhase::adapt;

  c.strategy.kind = StrategyKind::adapter_mix;
  c.strategy.decoder_r = 16;
  c.strategy.variance_r = 8;
  c.strategy.n_adapters = 2;
  c.strategy.capacity = 2.0;

  c.budgets_minutes = {1, 10, 15};
  c.adapt_speaker = 10;
  c.model_init_seed = 3;
  c.adapter_seed = 17;
  c.embedder = EmbedderOptions{};
  return c;
}

}  // namespace adaptermix

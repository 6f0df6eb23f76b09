/*
 * adaptermix CLI: corpus generation, two-phase training, adaptation
 * strategies, and the objective comparison grid, all seed-reproducible.
 */

#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "adaptermix/checkpoint.hpp"
#include "adaptermix/data.hpp"
#include "adaptermix/errors.hpp"
#include "adaptermix/evaluation.hpp"
#include "adaptermix/experiment.hpp"
#include "adaptermix/model.hpp"
#include "adaptermix/training.hpp"

namespace {

using namespace adaptermix;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;       // config / usage / IO problems
constexpr int kExitDivergence = 2;  // training left the reals

struct CommonArgs {
  std::string config_path;
  std::string corpus_path;
  std::string checkpoint_path;
};

ExperimentConfig load_config(const std::string& path) {
  ExperimentConfig config = ExperimentConfig::load(path);
  config.validate();
  return config;
}

Corpus load_or_fail_corpus(const std::string& path) {
  if (path.empty()) throw ConfigError("missing required flag '--corpus'");
  return load_corpus(path);
}

BackboneModel load_or_fail_checkpoint(const std::string& path,
                                      SeedProvenance* seeds) {
  if (path.empty()) throw ConfigError("missing required flag '--checkpoint'");
  return load_checkpoint(path, seeds);
}

std::vector<Utterance> speaker_utterances(const Corpus& corpus,
                                          std::size_t speaker) {
  std::vector<Utterance> utts;
  for (const Utterance* u : corpus.of_speaker(speaker)) utts.push_back(*u);
  if (utts.empty()) {
    throw ConfigError("corpus has no utterances for speaker " +
                      std::to_string(speaker));
  }
  return utts;
}

int cmd_gen_data(const std::string& config_path, const std::string& out_path) {
  const ExperimentConfig config = load_config(config_path);
  const Corpus corpus = generate_corpus(config.corpus);
  save_corpus(corpus, out_path);
  std::printf("wrote %zu utterances (%zu speakers) to %s\n",
              corpus.utterances.size(), corpus.config.total_speakers(),
              out_path.c_str());
  return kExitOk;
}

int cmd_pretrain(const CommonArgs& args, const std::string& out_path,
                 const std::string& history_path, std::size_t steps_override,
                 std::uint64_t seed_override, bool has_seed) {
  ExperimentConfig config = load_config(args.config_path);
  if (steps_override > 0) config.pretrain.total_steps = steps_override;
  if (has_seed) config.pretrain.seed = seed_override;
  const Corpus corpus = load_or_fail_corpus(args.corpus_path);

  BackboneModel model(config.model, config.model_init_seed);
  TrainableMask mask =
      build_trainable_mask(model, {StrategyKind::finetune}, 0);
  std::vector<Utterance> dataset;
  for (const Utterance* u : corpus.pretrain_set()) dataset.push_back(*u);
  const auto history = train(model, dataset, config.pretrain, mask);

  SeedProvenance seeds;
  seeds.init_seed = config.model_init_seed;
  seeds.train_seeds = {config.pretrain.seed};
  save_checkpoint(model, seeds, out_path);
  if (!history_path.empty()) save_history(history, history_path);
  std::printf("pretrained %zu steps, final loss %.6f, checkpoint %s\n",
              history.size(), history.back().loss, out_path.c_str());
  return kExitOk;
}

int cmd_adapt(const CommonArgs& args, const std::string& out_path,
              const std::string& history_path, const std::string& strategy_name,
              std::size_t budget_minutes, std::size_t speaker_override,
              bool has_speaker, std::size_t steps_override,
              std::uint64_t seed_override, bool has_seed) {
  ExperimentConfig config = load_config(args.config_path);
  if (!strategy_name.empty())
    config.strategy.kind = strategy_kind_from_string(strategy_name);
  if (has_speaker) config.adapt_speaker = speaker_override;
  if (steps_override > 0) config.adapt.total_steps = steps_override;
  if (has_seed) config.adapt.seed = seed_override;
  if (budget_minutes == 0) budget_minutes = config.budgets_minutes.back();

  const Corpus corpus = load_or_fail_corpus(args.corpus_path);
  SeedProvenance seeds;
  BackboneModel model = load_or_fail_checkpoint(args.checkpoint_path, &seeds);

  const auto utts = speaker_utterances(corpus, config.adapt_speaker);
  auto [adapt_set, heldout] = split_by_budget(
      utts, budget_minutes * corpus.config.frames_per_minute);

  if (config.strategy.kind != StrategyKind::finetune) {
    model.insert_adapters(config.strategy, config.adapter_seed);
  }
  const TrainableMask mask =
      build_trainable_mask(model, config.strategy, config.adapt_speaker);
  config.adapt.phase = TrainPhase::adapt;
  const auto history = train(model, adapt_set, config.adapt, mask);

  seeds.train_seeds.push_back(config.adapt.seed);
  save_checkpoint(model, seeds, out_path);
  if (!history_path.empty()) save_history(history, history_path);
  const ParamCounts counts = count_parameters(model, mask);
  std::printf(
      "adapted speaker %zu (%s, %zu min): %zu steps, final loss %.6f, "
      "trainable %.2f%%, checkpoint %s\n",
      config.adapt_speaker, to_string(config.strategy.kind).c_str(),
      budget_minutes, history.size(), history.back().loss,
      100.0 * counts.fraction(), out_path.c_str());
  return kExitOk;
}

int cmd_eval(const CommonArgs& args, const std::string& out_path,
             std::size_t budget_minutes, std::size_t speaker_override,
             bool has_speaker) {
  ExperimentConfig config = load_config(args.config_path);
  if (has_speaker) config.adapt_speaker = speaker_override;
  if (budget_minutes == 0) budget_minutes = config.budgets_minutes.back();

  const Corpus corpus = load_or_fail_corpus(args.corpus_path);
  SeedProvenance seeds;
  const BackboneModel model =
      load_or_fail_checkpoint(args.checkpoint_path, &seeds);

  const auto utts = speaker_utterances(corpus, config.adapt_speaker);
  auto [adapt_set, heldout] = split_by_budget(
      utts, budget_minutes * corpus.config.frames_per_minute);
  const SpeakerEmbedder embedder = train_embedder(corpus, config.embedder);
  const HeldoutMetrics metrics = evaluate_heldout(model, heldout, embedder);

  nlohmann::json doc{{"speaker", config.adapt_speaker},
                     {"budget_minutes", budget_minutes},
                     {"heldout_utterances", heldout.size()},
                     {"mean_mcd", metrics.mean_mcd},
                     {"mean_cosine", metrics.mean_cosine},
                     {"heldout_loss", metrics.loss}};
  if (!out_path.empty()) {
    std::FILE* f = std::fopen(out_path.c_str(), "wb");
    if (!f) throw ConfigError("cannot write file '" + out_path + "'");
    const std::string text = doc.dump(2) + "\n";
    std::fwrite(text.data(), 1, text.size(), f);
    std::fclose(f);
  }
  std::printf("speaker %zu @ %zu min: mcd %.4f dB, cosine %.4f, loss %.6f\n",
              config.adapt_speaker, budget_minutes, metrics.mean_mcd,
              metrics.mean_cosine, metrics.loss);
  return kExitOk;
}

int cmd_compare(const CommonArgs& args, const std::string& out_dir) {
  const ExperimentConfig config = load_config(args.config_path);
  const Corpus corpus = load_or_fail_corpus(args.corpus_path);
  SeedProvenance seeds;
  const BackboneModel model =
      load_or_fail_checkpoint(args.checkpoint_path, &seeds);

  CompareOptions options;
  options.budgets_minutes = config.budgets_minutes;
  options.adapt_speaker = config.adapt_speaker;
  options.adapt = config.adapt;
  options.adapter_seed = config.adapter_seed;
  options.embedder = config.embedder;
  AdaptationStrategy finetune = config.strategy;
  finetune.kind = StrategyKind::finetune;
  AdaptationStrategy single = config.strategy;
  single.kind = StrategyKind::single_adapter;
  AdaptationStrategy mix = config.strategy;
  mix.kind = StrategyKind::adapter_mix;
  options.strategies = {finetune, single, mix};

  const ComparisonReport report = compare(model, corpus, options);
  std::filesystem::create_directories(out_dir);
  const std::string jsonl = report_to_jsonl(report);
  const std::string text = report_to_text(report);
  {
    std::FILE* f =
        std::fopen((out_dir + "/report.jsonl").c_str(), "wb");
    if (!f) throw ConfigError("cannot write file '" + out_dir + "/report.jsonl'");
    std::fwrite(jsonl.data(), 1, jsonl.size(), f);
    std::fclose(f);
  }
  {
    std::FILE* f = std::fopen((out_dir + "/report.txt").c_str(), "wb");
    if (!f) throw ConfigError("cannot write file '" + out_dir + "/report.txt'");
    std::fwrite(text.data(), 1, text.size(), f);
    std::fclose(f);
  }
  std::fputs(text.c_str(), stdout);
  return kExitOk;
}

int cmd_params(const std::string& config_path, const std::string& strategy_name,
               bool full_scale, bool as_json) {
  ExperimentConfig config = load_config(config_path);
  if (!strategy_name.empty())
    config.strategy.kind = strategy_kind_from_string(strategy_name);
  ModelConfig model_config = full_scale ? ModelConfig::full_scale()
                                        : config.model;
  BackboneModel model(model_config, config.model_init_seed);
  if (config.strategy.kind != StrategyKind::finetune) {
    model.insert_adapters(config.strategy, config.adapter_seed);
  }
  const std::size_t adapt_speaker =
      full_scale ? model_config.n_speakers - 1 : config.adapt_speaker;
  const TrainableMask mask =
      build_trainable_mask(model, config.strategy, adapt_speaker);
  const ParamCounts counts = count_parameters(model, mask);
  if (as_json) {
    nlohmann::json doc{{"strategy", to_string(config.strategy.kind)},
                       {"total", counts.total},
                       {"trainable", counts.trainable},
                       {"fraction", counts.fraction()}};
    std::printf("%s\n", doc.dump().c_str());
  } else {
    std::printf("strategy:            %s\n",
                to_string(config.strategy.kind).c_str());
    std::printf("total parameters:    %zu\n", counts.total);
    std::printf("trainable parameters: %zu\n", counts.trainable);
    std::printf("trainable fraction:  %.2f%%\n", 100.0 * counts.fraction());
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mixture-of-adapters speaker adaptation experiments"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string out_path, out_dir, history_path, strategy_name;
  std::size_t budget_minutes = 0, steps_override = 0, speaker_override = 0;
  std::uint64_t seed_override = 0;
  bool full_scale = false, as_json = false;

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic corpus");
  gen->add_option("--config", args.config_path)->required();
  gen->add_option("--out", out_path)->required();

  auto* pre = app.add_subcommand("pretrain", "train the multi-speaker backbone");
  pre->add_option("--config", args.config_path)->required();
  pre->add_option("--corpus", args.corpus_path)->required();
  pre->add_option("--out", out_path)->required();
  pre->add_option("--history", history_path);
  pre->add_option("--steps", steps_override);
  auto* pre_seed = pre->add_option("--seed", seed_override);

  auto* ada = app.add_subcommand("adapt", "specialize a checkpoint to a speaker");
  ada->add_option("--config", args.config_path)->required();
  ada->add_option("--corpus", args.corpus_path)->required();
  ada->add_option("--checkpoint", args.checkpoint_path)->required();
  ada->add_option("--out", out_path)->required();
  ada->add_option("--history", history_path);
  ada->add_option("--strategy", strategy_name);
  ada->add_option("--budget-minutes", budget_minutes);
  auto* ada_speaker = ada->add_option("--speaker", speaker_override);
  ada->add_option("--steps", steps_override);
  auto* ada_seed = ada->add_option("--seed", seed_override);

  auto* ev = app.add_subcommand("eval", "held-out metrics for one checkpoint");
  ev->add_option("--config", args.config_path)->required();
  ev->add_option("--corpus", args.corpus_path)->required();
  ev->add_option("--checkpoint", args.checkpoint_path)->required();
  ev->add_option("--out", out_path);
  ev->add_option("--budget-minutes", budget_minutes);
  auto* ev_speaker = ev->add_option("--speaker", speaker_override);

  auto* cmp = app.add_subcommand("compare", "full strategy-by-budget grid");
  cmp->add_option("--config", args.config_path)->required();
  cmp->add_option("--corpus", args.corpus_path)->required();
  cmp->add_option("--checkpoint", args.checkpoint_path)->required();
  cmp->add_option("--out-dir", out_dir)->required();

  auto* par = app.add_subcommand("params", "parameter counts for a strategy");
  par->add_option("--config", args.config_path)->required();
  par->add_option("--strategy", strategy_name);
  par->add_flag("--full-scale", full_scale,
                "count at full-size model dimensions");
  par->add_flag("--json", as_json);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(args.config_path, out_path);
    if (pre->parsed())
      return cmd_pretrain(args, out_path, history_path, steps_override,
                          seed_override, pre_seed->count() > 0);
    if (ada->parsed())
      return cmd_adapt(args, out_path, history_path, strategy_name,
                       budget_minutes, speaker_override,
                       ada_speaker->count() > 0, steps_override, seed_override,
                       ada_seed->count() > 0);
    if (ev->parsed())
      return cmd_eval(args, out_path, budget_minutes, speaker_override,
                      ev_speaker->count() > 0);
    if (cmp->parsed()) return cmd_compare(args, out_dir);
    if (par->parsed())
      return cmd_params(args.config_path, strategy_name, full_scale, as_json);
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitError;
  }
  return kExitError;
}

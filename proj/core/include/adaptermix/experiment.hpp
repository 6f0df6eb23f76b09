#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adaptermix/data.hpp"
#include "adaptermix/evaluation.hpp"
#include "adaptermix/model.hpp"
#include "adaptermix/training.hpp"

namespace adaptermix {

/*
 * One reproducible experiment: corpus, backbone, both training phases,
 * the adaptation strategy, and every seed, in a single JSON file.
 * Nothing defaults to wall-clock time.
 */
struct ExperimentConfig {
  ModelConfig model;
  CorpusConfig corpus;
  TrainConfig pretrain;
  TrainConfig adapt;
  AdaptationStrategy strategy;
  std::vector<std::size_t> budgets_minutes{1, 10, 15};
  std::size_t adapt_speaker = 10;
  std::uint64_t model_init_seed = 3;
  std::uint64_t adapter_seed = 17;
  EmbedderOptions embedder;

  /// Cross-field consistency; ConfigError naming the field.
  void validate() const;

  std::string to_json_string() const;
  static ExperimentConfig from_json_string(const std::string& text);
  void save(const std::string& path) const;
  static ExperimentConfig load(const std::string& path);

  /// The committed reference experiment: desk-scale everything, tuned to
  /// run the full comparison grid in minutes on one CPU core.
  static ExperimentConfig desk_reference();
};

}  // namespace adaptermix

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "adaptermix/data.hpp"
#include "adaptermix/model.hpp"
#include "adaptermix/training.hpp"

namespace adaptermix {

/// Mel-cepstral distortion in dB between two frame matrices:
/// (10/ln 10) * mean over frames of sqrt(2 * sum_d (ref - syn)^2).
/// Lengths may differ; both are truncated to the shorter one.
double mcd(const Tensor& ref, const Tensor& syn);

/// a.b / (|a||b|). DegenerateInputError on zero vectors.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/*
 * Toy speaker classifier standing in for a full verification model:
 * frame mean-pool -> tanh hidden layer -> speaker logits. The hidden
 * activation is the embedding.
 */
struct SpeakerEmbedder {
  Tensor w1, b1;  // [mel, dim], [dim]
  Tensor w2, b2;  // [dim, n_classes], [n_classes]
  std::size_t embedding_dim = 64;

  std::vector<double> embed(const Tensor& frames) const;
  std::size_t classify(const Tensor& frames) const;
};

struct EmbedderOptions {
  std::size_t embedding_dim = 64;
  std::size_t steps = 300;
  double lr = 0.02;
  std::uint64_t seed = 99;
};

/// Trains on the pretraining speakers. ContractError with fewer than two.
SpeakerEmbedder train_embedder(const Corpus& corpus,
                               const EmbedderOptions& options = {});

/// Fraction of pretraining utterances classified as their own speaker.
double embedder_train_accuracy(const SpeakerEmbedder& embedder,
                               const Corpus& corpus);

struct ReportRow {
  std::string strategy;
  std::size_t budget_minutes = 0;
  std::size_t budget_frames = 0;
  double trainable_fraction = 0.0;
  double mean_mcd = 0.0;
  double mean_cosine = 0.0;
  double heldout_loss = 0.0;
};

struct ComparisonReport {
  std::vector<ReportRow> rows;  // budget-major, strategy order as given
};

struct CompareOptions {
  std::vector<AdaptationStrategy> strategies;
  std::vector<std::size_t> budgets_minutes{1, 10, 15};
  std::size_t adapt_speaker = 0;
  TrainConfig adapt;  // per-cell seeds are derived from adapt.seed
  std::uint64_t adapter_seed = 17;
  EmbedderOptions embedder;
  bool include_unadapted = true;
};

/// Held-out metrics for one adapted (or not) model.
struct HeldoutMetrics {
  double mean_mcd = 0.0;
  double mean_cosine = 0.0;
  double loss = 0.0;
};

HeldoutMetrics evaluate_heldout(const BackboneModel& model,
                                const std::vector<Utterance>& heldout,
                                const SpeakerEmbedder& embedder);

/// The full strategy x budget grid against one pretrained backbone.
/// Pure function of (model, corpus, options): repeat runs are identical.
ComparisonReport compare(const BackboneModel& pretrained, const Corpus& corpus,
                         const CompareOptions& options);

/// Machine-readable (one JSON record per row) and aligned human-readable
/// renderings. Both are byte-deterministic.
std::string report_to_jsonl(const ComparisonReport& report);
std::string report_to_text(const ComparisonReport& report);

}  // namespace adaptermix

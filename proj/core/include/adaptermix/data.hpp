#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "adaptermix/tensor.hpp"

namespace adaptermix {

/*
 * A synthetic speaker is a well-conditioned affine warp of the shared
 * base frame pattern plus duration and pitch offsets.
 */
struct SpeakerProfile {
  std::size_t speaker_id = 0;
  std::vector<double> transform;  // A_s, row-major [mel, mel]
  std::vector<double> bias;       // b_s [mel]
  int duration_bias = 0;          // -1 / 0 / +1
  double pitch_offset = 0.0;
  std::uint64_t seed = 0;  // stream seed the profile was drawn from
};

struct Utterance {
  std::size_t speaker = 0;
  std::vector<std::size_t> tokens;
  std::vector<std::size_t> durations;  // teacher, per token
  std::vector<double> pitch;           // teacher, per token
  Tensor frames;                       // [T, mel], T == sum(durations)

  std::size_t total_frames() const { return frames.shape()[0]; }
};

struct CorpusConfig {
  std::size_t n_speakers = 10;       // pretraining pool, ids [0, n_speakers)
  std::size_t n_adapt_speakers = 2;  // new speakers, ids continue upward
  std::size_t utterances_per_speaker = 60;
  std::size_t adapt_utterances_per_speaker = 300;
  std::size_t min_tokens = 4;
  std::size_t max_tokens = 12;
  std::size_t vocab_size = 40;
  std::size_t mel_dim = 16;
  std::size_t max_duration = 4;
  std::size_t frames_per_minute = 250;  // the minutes-analogue unit
  std::uint64_t seed = 1234;

  std::size_t total_speakers() const { return n_speakers + n_adapt_speakers; }
  void validate() const;
};

struct Corpus {
  CorpusConfig config;
  std::vector<SpeakerProfile> profiles;  // one per speaker, pool then adapt
  std::vector<Utterance> utterances;     // grouped by speaker, pool first

  std::vector<const Utterance*> of_speaker(std::size_t speaker) const;
  std::vector<const Utterance*> pretrain_set() const;
  bool is_adapt_speaker(std::size_t speaker) const {
    return speaker >= config.n_speakers &&
           speaker < config.total_speakers();
  }
};

/// Fully deterministic from config.seed; bit-identical across platforms.
Corpus generate_corpus(const CorpusConfig& config);

/// Scans in order, keeping every utterance that still fits the frame
/// budget (always at least one), so the adapt set never exceeds the budget
/// except through that floor. BudgetError when the budget exceeds the
/// speaker's total frames.
std::pair<std::vector<Utterance>, std::vector<Utterance>> split_by_budget(
    const std::vector<Utterance>& utterances, std::size_t frame_budget);

/// Line-delimited file: a header record with config + seed, then one
/// utterance per line. Decimal values round-trip exactly.
void save_corpus(const Corpus& corpus, const std::string& path);
Corpus load_corpus(const std::string& path);

}  // namespace adaptermix

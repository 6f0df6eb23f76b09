/*
 * Objective metrics (MCD, embedding cosine similarity) and the
 * strategy-by-budget comparison grid.
 */

#include "adaptermix/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "adaptermix/checkpoint.hpp"
#include "adaptermix/errors.hpp"
#include "adaptermix/rng.hpp"
#include "json_util.hpp"

namespace adaptermix {

double mcd(const Tensor& ref, const Tensor& syn) {
  if (ref.ndim() != 2 || syn.ndim() != 2 || ref.cols() != syn.cols()) {
    throw ShapeError("mcd: coefficient dims disagree: " +
                     shape_str(ref.shape()) + " vs " + shape_str(syn.shape()));
  }
  const std::size_t frames = std::min(ref.rows(), syn.rows());
  if (frames == 0) {
    throw DegenerateInputError("mcd: no overlapping frames to compare");
  }
  const std::size_t d = ref.cols();
  double acc = 0.0;
  for (std::size_t i = 0; i < frames; ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = ref(i, j) - syn(i, j);
      sq += diff * diff;
    }
    acc += std::sqrt(2.0 * sq);
  }
  return 10.0 / std::log(10.0) * (acc / static_cast<double>(frames));
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError("cosine_similarity: lengths disagree: " +
                     std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) {
    throw DegenerateInputError("cosine_similarity: zero vector");
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

namespace {

Tensor mean_pool(const Tensor& frames) {
  const std::size_t n = frames.rows(), d = frames.cols();
  std::vector<double> pooled(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) pooled[j] += frames(i, j);
  if (n > 0)
    for (double& v : pooled) v /= static_cast<double>(n);
  return Tensor::from_data({1, d}, std::move(pooled));
}

Tensor embedder_hidden(const SpeakerEmbedder& e, const Tensor& pooled) {
  return tanh(add_row_bias(matmul(pooled, e.w1), e.b1));
}

}  // namespace

std::vector<double> SpeakerEmbedder::embed(const Tensor& frames) const {
  NoGradScope no_grad;
  const Tensor h = embedder_hidden(*this, mean_pool(frames));
  return {h.values().begin(), h.values().end()};
}

std::size_t SpeakerEmbedder::classify(const Tensor& frames) const {
  NoGradScope no_grad;
  const Tensor h = embedder_hidden(*this, mean_pool(frames));
  const Tensor logits = add_row_bias(matmul(h, w2), b2);
  std::size_t best = 0;
  for (std::size_t j = 1; j < logits.cols(); ++j)
    if (logits.values()[j] > logits.values()[best]) best = j;
  return best;
}

SpeakerEmbedder train_embedder(const Corpus& corpus,
                               const EmbedderOptions& options) {
  const std::size_t n_classes = corpus.config.n_speakers;
  if (n_classes < 2) {
    throw ContractError("train_embedder: need at least two speakers, got " +
                        std::to_string(n_classes));
  }
  const auto pretrain = corpus.pretrain_set();
  const std::size_t mel = corpus.config.mel_dim;

  // Pooling has no parameters, so pool once and train a plain MLP on it.
  std::vector<double> inputs;
  std::vector<double> targets;
  inputs.reserve(pretrain.size() * mel);
  targets.reserve(pretrain.size() * n_classes);
  for (const Utterance* u : pretrain) {
    const Tensor pooled = mean_pool(u->frames);
    inputs.insert(inputs.end(), pooled.values().begin(),
                  pooled.values().end());
    for (std::size_t c = 0; c < n_classes; ++c)
      targets.push_back(c == u->speaker ? 1.0 : 0.0);
  }
  const Tensor x = Tensor::from_data({pretrain.size(), mel}, std::move(inputs));
  const Tensor y =
      Tensor::from_data({pretrain.size(), n_classes}, std::move(targets));

  SplitMix64 rng(mix_seed(options.seed, 0xE3BED));
  SpeakerEmbedder e;
  e.embedding_dim = options.embedding_dim;
  const double b1v = 1.0 / std::sqrt(static_cast<double>(mel));
  std::vector<double> w1(mel * options.embedding_dim);
  for (double& v : w1) v = rng.uniform(-b1v, b1v);
  e.w1 = Tensor::from_data({mel, options.embedding_dim}, std::move(w1), true);
  e.b1 = Tensor::zeros({options.embedding_dim}, true);
  const double b2v = 1.0 / std::sqrt(static_cast<double>(options.embedding_dim));
  std::vector<double> w2(options.embedding_dim * n_classes);
  for (double& v : w2) v = rng.uniform(-b2v, b2v);
  e.w2 = Tensor::from_data({options.embedding_dim, n_classes}, std::move(w2),
                           true);
  e.b2 = Tensor::zeros({n_classes}, true);

  std::vector<ParamRef> params{
      {"w1", e.w1}, {"b1", e.b1}, {"w2", e.w2}, {"b2", e.b2}};
  TrainableMask mask;
  mask.trainable.assign(params.size(), 1);
  AdamState state = make_adam_state(params);
  TrainConfig adam_cfg;  // only the Adam constants matter here
  for (std::size_t step = 0; step < options.steps; ++step) {
    for (auto& p : params) p.tensor.zero_grad();
    Graph graph;
    GraphScope scope(graph);
    const Tensor h = embedder_hidden(e, x);
    const Tensor logits = add_row_bias(matmul(h, e.w2), e.b2);
    graph.backward(mse_loss(logits, y));
    adam_step(params, mask, state, options.lr, adam_cfg);
  }
  for (auto& p : params) {
    p.tensor.set_requires_grad(false);
    p.tensor.clear_grad();
  }
  return e;
}

double embedder_train_accuracy(const SpeakerEmbedder& embedder,
                               const Corpus& corpus) {
  const auto pretrain = corpus.pretrain_set();
  if (pretrain.empty()) return 0.0;
  std::size_t hits = 0;
  for (const Utterance* u : pretrain)
    if (embedder.classify(u->frames) == u->speaker) ++hits;
  return static_cast<double>(hits) / static_cast<double>(pretrain.size());
}

HeldoutMetrics evaluate_heldout(const BackboneModel& model,
                                const std::vector<Utterance>& heldout,
                                const SpeakerEmbedder& embedder) {
  if (heldout.empty()) {
    throw ContractError("evaluate_heldout: empty held-out set");
  }
  NoGradScope no_grad;
  HeldoutMetrics metrics;
  for (const Utterance& u : heldout) {
    // Free-running synthesis for the objective metrics.
    const ForwardResult synth = model.forward(u.tokens, u.speaker);
    metrics.mean_mcd += mcd(u.frames, synth.frames);
    metrics.mean_cosine += cosine_similarity(embedder.embed(u.frames),
                                             embedder.embed(synth.frames));
    // Teacher-driven loss, same objective as training.
    metrics.loss += utterance_loss(model, u).item();
  }
  const double inv = 1.0 / static_cast<double>(heldout.size());
  metrics.mean_mcd *= inv;
  metrics.mean_cosine *= inv;
  metrics.loss *= inv;
  return metrics;
}

ComparisonReport compare(const BackboneModel& pretrained, const Corpus& corpus,
                         const CompareOptions& options) {
  if (!corpus.is_adapt_speaker(options.adapt_speaker)) {
    throw IdError("compare: speaker " + std::to_string(options.adapt_speaker) +
                  " is not an adaptation speaker of this corpus");
  }
  const SpeakerEmbedder embedder = train_embedder(corpus, options.embedder);

  std::vector<Utterance> speaker_utts;
  for (const Utterance* u : corpus.of_speaker(options.adapt_speaker))
    speaker_utts.push_back(*u);

  ComparisonReport report;
  for (std::size_t bi = 0; bi < options.budgets_minutes.size(); ++bi) {
    const std::size_t minutes = options.budgets_minutes[bi];
    const std::size_t budget_frames =
        minutes * corpus.config.frames_per_minute;
    auto [adapt_set, heldout] = split_by_budget(speaker_utts, budget_frames);
    if (heldout.empty()) {
      throw BudgetError("compare: budget of " + std::to_string(budget_frames) +
                        " frames leaves no held-out utterances");
    }

    if (options.include_unadapted) {
      const HeldoutMetrics m =
          evaluate_heldout(pretrained, heldout, embedder);
      report.rows.push_back({"unadapted", minutes, budget_frames, 0.0,
                             m.mean_mcd, m.mean_cosine, m.loss});
    }
    for (std::size_t si = 0; si < options.strategies.size(); ++si) {
      const AdaptationStrategy& strategy = options.strategies[si];
      const std::uint64_t cell = bi * 97 + si;
      BackboneModel model = clone_model(pretrained);
      if (strategy.kind != StrategyKind::finetune) {
        model.insert_adapters(strategy, mix_seed(options.adapter_seed, cell));
      }
      const TrainableMask mask =
          build_trainable_mask(model, strategy, options.adapt_speaker);
      TrainConfig cell_cfg = options.adapt;
      cell_cfg.phase = TrainPhase::adapt;
      cell_cfg.seed = mix_seed(options.adapt.seed, cell);
      train(model, adapt_set, cell_cfg, mask);
      const ParamCounts counts = count_parameters(model, mask);
      const HeldoutMetrics m = evaluate_heldout(model, heldout, embedder);
      report.rows.push_back({to_string(strategy.kind), minutes, budget_frames,
                             counts.fraction(), m.mean_mcd, m.mean_cosine,
                             m.loss});
    }
  }
  return report;
}

std::string report_to_jsonl(const ComparisonReport& report) {
  std::string out;
  for (const ReportRow& r : report.rows) {
    out += json{{"strategy", r.strategy},
                {"budget_minutes", r.budget_minutes},
                {"budget_frames", r.budget_frames},
                {"trainable_fraction", r.trainable_fraction},
                {"mean_mcd", r.mean_mcd},
                {"mean_cosine", r.mean_cosine},
                {"heldout_loss", r.heldout_loss}}
               .dump();
    out += '\n';
  }
  return out;
}

std::string report_to_text(const ComparisonReport& report) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-16s %8s %8s %10s %10s %10s %12s\n",
                "strategy", "minutes", "frames", "params%", "mcd", "cosine",
                "heldout");
  out += line;
  out += std::string(78, '-') + "\n";
  for (const ReportRow& r : report.rows) {
    std::snprintf(line, sizeof(line),
                  "%-16s %8zu %8zu %9.2f%% %10.4f %10.4f %12.6f\n",
                  r.strategy.c_str(), r.budget_minutes, r.budget_frames,
                  100.0 * r.trainable_fraction, r.mean_mcd, r.mean_cosine,
                  r.heldout_loss);
    out += line;
  }
  return out;
}

}  // namespace adaptermix

#include <algorithm>
#include <cmath>

#include <doctest.h>

#include "adaptermix/errors.hpp"
#include "adaptermix/evaluation.hpp"
#include "support/metric_oracles.hpp"
#include "support/test_support.hpp"

using namespace adaptermix;
using testsupport::random_tensor;
using testsupport::brute_mcd;
using testsupport::brute_cosine;

namespace {

CorpusConfig eval_corpus_config() {
  CorpusConfig c;
  c.n_speakers = 4;
  c.n_adapt_speakers = 1;
  c.utterances_per_speaker = 20;
  c.adapt_utterances_per_speaker = 10;
  c.min_tokens = 3;
  c.max_tokens = 8;
  c.vocab_size = 12;
  c.mel_dim = 8;
  c.seed = 2718;
  return c;
}

}  // namespace

TEST_CASE("mcd") {
  SUBCASE("identical matrices score zero") {
    const Tensor x = random_tensor({7, 5}, 1);
    CHECK(mcd(x, x) == 0.0);
  }
  SUBCASE("unit difference in one coefficient") {
    const Tensor ref = Tensor::from_data({1, 4}, {1.0, 0.0, 0.0, 0.0});
    const Tensor syn = Tensor::zeros({1, 4});
    const double expect = 10.0 / std::log(10.0) * std::sqrt(2.0);
    CHECK(std::abs(mcd(ref, syn) - expect) < 1e-6);
  }
  SUBCASE("doubling the difference doubles the score") {
    const Tensor ref = random_tensor({6, 4}, 2);
    const Tensor zero = Tensor::zeros({6, 4});
    Tensor doubled = ref.clone();
    for (double& v : doubled.values()) v *= 2.0;
    CHECK(mcd(doubled, zero) == doctest::Approx(2.0 * mcd(ref, zero)));
  }
  SUBCASE("symmetric, nonnegative, truncates to the shorter input") {
    const Tensor a = random_tensor({5, 4}, 3);
    const Tensor b = random_tensor({8, 4}, 4);
    CHECK(mcd(a, b) == mcd(b, a));
    CHECK(mcd(a, b) >= 0.0);
    const Tensor b5 = gather_rows(b, {0, 1, 2, 3, 4});
    CHECK(mcd(a, b) == mcd(a, b5));
  }
  SUBCASE("agrees with the brute-force oracle on random pairs") {
    SplitMix64 rng(55);
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = 1 + rng.next_below(6);
      const Tensor a = random_tensor({n, 6}, rng.next_u64(), -3.0, 3.0);
      const Tensor b = random_tensor({n, 6}, rng.next_u64(), -3.0, 3.0);
      CHECK(std::abs(mcd(a, b) - brute_mcd(a, b)) < 1e-9);
    }
  }
  SUBCASE("empty overlap is an error") {
    CHECK_THROWS_AS(mcd(Tensor::zeros({0, 4}), Tensor::zeros({3, 4})),
                    DegenerateInputError);
  }
}

TEST_CASE("cosine_similarity") {
  const std::vector<double> a{1.0, 2.0, -1.0};
  SUBCASE("trivial geometry") {
    CHECK(cosine_similarity(a, a) == doctest::Approx(1.0));
    const std::vector<double> neg{-1.0, -2.0, 1.0};
    CHECK(cosine_similarity(a, neg) == doctest::Approx(-1.0));
    const std::vector<double> x{1.0, 0.0}, y{0.0, 3.0};
    CHECK(cosine_similarity(x, y) == doctest::Approx(0.0));
  }
  SUBCASE("invariant under positive scaling") {
    std::vector<double> scaled = a;
    for (double& v : scaled) v *= 731.0;
    CHECK(std::abs(cosine_similarity(a, scaled) - 1.0) <= 1e-12);
  }
  SUBCASE("zero vectors are rejected") {
    const std::vector<double> zero{0.0, 0.0, 0.0};
    CHECK_THROWS_AS(cosine_similarity(a, zero), DegenerateInputError);
  }
  SUBCASE("agrees with the brute-force oracle") {
    SplitMix64 rng(56);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> x(8), y(8);
      for (double& v : x) v = rng.uniform(-2.0, 2.0);
      for (double& v : y) v = rng.uniform(-2.0, 2.0);
      CHECK(std::abs(cosine_similarity(x, y) - brute_cosine(x, y)) < 1e-9);
    }
  }
}

TEST_CASE("speaker embedder") {
  const Corpus corpus = generate_corpus(eval_corpus_config());
  EmbedderOptions options;
  options.embedding_dim = 16;
  options.steps = 300;
  const SpeakerEmbedder embedder = train_embedder(corpus, options);

  SUBCASE("reaches the accuracy bar on its own training speakers") {
    CHECK(embedder_train_accuracy(embedder, corpus) >= 0.9);
  }
  SUBCASE("same-speaker pairs read as more similar than cross-speaker") {
    double same = 0.0, cross = 0.0;
    std::size_t same_n = 0, cross_n = 0;
    const auto utts = corpus.pretrain_set();
    for (std::size_t i = 0; i < utts.size(); ++i) {
      for (std::size_t j = i + 1; j < utts.size(); ++j) {
        const double sim = cosine_similarity(embedder.embed(utts[i]->frames),
                                             embedder.embed(utts[j]->frames));
        if (utts[i]->speaker == utts[j]->speaker) {
          same += sim;
          ++same_n;
        } else {
          cross += sim;
          ++cross_n;
        }
      }
    }
    CHECK(same / same_n > cross / cross_n);
  }
  SUBCASE("frame order does not matter, repeat calls are identical") {
    const Tensor frames = corpus.utterances[0].frames;
    std::vector<std::size_t> reversed(frames.rows());
    for (std::size_t i = 0; i < reversed.size(); ++i)
      reversed[i] = reversed.size() - 1 - i;
    const auto a = embedder.embed(frames);
    const auto b = embedder.embed(gather_rows(frames, reversed));
    const auto c = embedder.embed(frames);
    CHECK(testsupport::max_abs_diff(a, b) < 1e-12);
    CHECK(a == c);
  }
  SUBCASE("a single-speaker corpus is rejected") {
    CorpusConfig solo = eval_corpus_config();
    solo.n_speakers = 1;
    CHECK_THROWS_AS(train_embedder(generate_corpus(solo), options),
                    ContractError);
  }
}

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <doctest.h>

#include "adaptermix/data.hpp"
#include "adaptermix/errors.hpp"
#include "support/test_support.hpp"

using namespace adaptermix;

namespace {

CorpusConfig small_corpus_config() {
  CorpusConfig c;
  c.n_speakers = 3;
  c.n_adapt_speakers = 1;
  c.utterances_per_speaker = 5;
  c.adapt_utterances_per_speaker = 8;
  c.min_tokens = 2;
  c.max_tokens = 6;
  c.vocab_size = 10;
  c.mel_dim = 6;
  c.max_duration = 4;
  c.frames_per_minute = 20;
  c.seed = 321;
  return c;
}

}  // namespace

TEST_CASE("corpus generation") {
  const CorpusConfig config = small_corpus_config();
  const Corpus corpus = generate_corpus(config);

  SUBCASE("regeneration is bit-identical") {
    const Corpus again = generate_corpus(config);
    REQUIRE(corpus.utterances.size() == again.utterances.size());
    for (std::size_t i = 0; i < corpus.utterances.size(); ++i) {
      const Utterance& a = corpus.utterances[i];
      const Utterance& b = again.utterances[i];
      CHECK(a.tokens == b.tokens);
      CHECK(a.durations == b.durations);
      CHECK(std::memcmp(a.frames.values().data(), b.frames.values().data(),
                        a.frames.numel() * sizeof(double)) == 0);
    }
  }
  SUBCASE("frame count equals the duration sum") {
    for (const Utterance& u : corpus.utterances) {
      std::size_t total = 0;
      for (std::size_t d : u.durations) total += d;
      CHECK(u.total_frames() == total);
      CHECK(u.frames.all_finite());
      for (std::size_t d : u.durations) {
        CHECK(d >= 1);
        CHECK(d <= config.max_duration);
      }
    }
  }
  SUBCASE("speakers produce different frames for the same tokens") {
    // Same token content through two different speaker transforms.
    const SpeakerProfile& p0 = corpus.profiles[0];
    const SpeakerProfile& p1 = corpus.profiles[1];
    CHECK(testsupport::max_abs_diff(p0.transform, p1.transform) > 0.0);
    CHECK(testsupport::max_abs_diff(p0.bias, p1.bias) > 0.0);
  }
  SUBCASE("speaker transforms are well-conditioned by construction") {
    for (const SpeakerProfile& p : corpus.profiles) {
      const std::size_t m = config.mel_dim;
      double frob = 0.0;
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
          const double e = p.transform[i * m + j] - (i == j ? 1.0 : 0.0);
          frob += e * e;
        }
      // ||A - I||_F < 0.5 bounds the condition number by 3, far under 100.
      CHECK(std::sqrt(frob) < 0.5);
    }
  }
  SUBCASE("adaptation speakers own the tail ids") {
    for (const Utterance& u : corpus.utterances) {
      if (corpus.is_adapt_speaker(u.speaker)) CHECK(u.speaker >= 3);
    }
    CHECK(corpus.of_speaker(3).size() == 8);
    CHECK(corpus.pretrain_set().size() == 15);
  }
}

TEST_CASE("split_by_budget") {
  const Corpus corpus = generate_corpus(small_corpus_config());
  std::vector<Utterance> utts;
  for (const Utterance* u : corpus.of_speaker(3)) utts.push_back(*u);
  std::size_t total = 0;
  for (const Utterance& u : utts) total += u.total_frames();

  SUBCASE("one frame short of everything keeps a held-out set") {
    const auto [adapt, heldout] = split_by_budget(utts, total - 1);
    CHECK_FALSE(heldout.empty());
  }
  SUBCASE("a tiny budget still trains on one utterance") {
    const auto [adapt, heldout] =
        split_by_budget(utts, utts.front().total_frames() - 1);
    CHECK(adapt.size() == 1);
  }
  SUBCASE("partition is disjoint and exhaustive") {
    const auto [adapt, heldout] = split_by_budget(utts, total / 2);
    CHECK(adapt.size() + heldout.size() == utts.size());
    std::size_t adapt_frames = 0;
    for (const Utterance& u : adapt) adapt_frames += u.total_frames();
    CHECK(adapt_frames <= std::max(total / 2, utts.front().total_frames()));
  }
  SUBCASE("budget over the available frames is an error") {
    CHECK_THROWS_AS(split_by_budget(utts, total + 1), BudgetError);
  }
}

TEST_CASE("corpus file round trip") {
  const Corpus corpus = generate_corpus(small_corpus_config());
  const std::string path = "tmp_corpus_test.jsonl";
  save_corpus(corpus, path);
  const Corpus loaded = load_corpus(path);

  CHECK(loaded.config.seed == corpus.config.seed);
  CHECK(loaded.config.n_speakers == corpus.config.n_speakers);
  REQUIRE(loaded.utterances.size() == corpus.utterances.size());
  for (std::size_t i = 0; i < corpus.utterances.size(); ++i) {
    const Utterance& a = corpus.utterances[i];
    const Utterance& b = loaded.utterances[i];
    CHECK(a.speaker == b.speaker);
    CHECK(a.tokens == b.tokens);
    CHECK(a.durations == b.durations);
    CHECK(a.pitch == b.pitch);
    REQUIRE(a.frames.shape() == b.frames.shape());
    // Exact decimal round trip, no drift allowed.
    CHECK(std::memcmp(a.frames.values().data(), b.frames.values().data(),
                      a.frames.numel() * sizeof(double)) == 0);
  }
  // Saving the loaded corpus reproduces the file byte for byte.
  const std::string path2 = "tmp_corpus_test2.jsonl";
  save_corpus(loaded, path2);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::string s1((std::istreambuf_iterator<char>(f1)),
                 std::istreambuf_iterator<char>());
  std::string s2((std::istreambuf_iterator<char>(f2)),
                 std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
  std::filesystem::remove(path);
  std::filesystem::remove(path2);
}

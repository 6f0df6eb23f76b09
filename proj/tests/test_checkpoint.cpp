#include <cstring>
#include <filesystem>

#include <doctest.h>

#include "adaptermix/checkpoint.hpp"
#include "adaptermix/errors.hpp"
#include "support/test_support.hpp"

using namespace adaptermix;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.n_encoder_layers = 1;
  c.n_decoder_layers = 2;
  c.d_model = 8;
  c.n_heads = 2;
  c.d_ffn = 8;
  c.vocab_size = 6;
  c.n_speakers = 3;
  c.mel_dim = 4;
  c.max_duration = 3;
  return c;
}

}  // namespace

TEST_CASE("checkpoint round trip") {
  BackboneModel model(small_config(), 5);
  SeedProvenance seeds{5, {17, 23}};

  SUBCASE("save, load, save is byte-stable") {
    const std::string once = checkpoint_to_string(model, seeds);
    SeedProvenance loaded_seeds;
    const BackboneModel loaded =
        checkpoint_from_string(once, &loaded_seeds);
    const std::string twice = checkpoint_to_string(loaded, loaded_seeds);
    CHECK(once == twice);
    CHECK(loaded_seeds.init_seed == 5);
    CHECK(loaded_seeds.train_seeds == std::vector<std::uint64_t>{17, 23});
  }
  SUBCASE("loaded model reproduces forward bit for bit") {
    const std::vector<std::size_t> tokens{1, 3, 2};
    const std::vector<std::size_t> durations{1, 2, 1};
    const std::vector<double> pitch{0.5, 0.0, -0.5};
    const BackboneModel loaded =
        checkpoint_from_string(checkpoint_to_string(model, seeds));
    const ForwardResult a = model.forward(tokens, 2, &durations, &pitch);
    const ForwardResult b = loaded.forward(tokens, 2, &durations, &pitch);
    CHECK(std::memcmp(a.frames.values().data(), b.frames.values().data(),
                      a.frames.numel() * sizeof(double)) == 0);
  }
  SUBCASE("adapters and trainable flags survive the trip") {
    AdaptationStrategy s;
    s.kind = StrategyKind::adapter_mix;
    s.decoder_r = 2;
    s.variance_r = 2;
    s.n_adapters = 2;
    model.insert_adapters(s, 7);
    apply_mask(model, build_trainable_mask(model, s, 1));
    const BackboneModel loaded =
        checkpoint_from_string(checkpoint_to_string(model, seeds));
    CHECK(loaded.adapters_inserted());
    CHECK(loaded.adapter_strategy()->decoder_r == 2);
    const auto a = model.parameters();
    const auto b = loaded.parameters();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].name == b[i].name);
      CHECK(a[i].tensor.requires_grad() == b[i].tensor.requires_grad());
    }
  }
  SUBCASE("file round trip") {
    const std::string path = "tmp_checkpoint_test.json";
    save_checkpoint(model, seeds, path);
    const BackboneModel loaded = load_checkpoint(path);
    CHECK(loaded.config().d_model == 8);
    std::filesystem::remove(path);
  }
}

TEST_CASE("checkpoint rejects malformed input") {
  BackboneModel model(small_config(), 5);
  const std::string good = checkpoint_to_string(model, {5, {}});

  SUBCASE("wrong format marker") {
    CHECK_THROWS_WITH_AS(checkpoint_from_string("{\"format\":\"nope\"}"),
                         doctest::Contains("format"), ConfigError);
  }
  SUBCASE("missing model section") {
    CHECK_THROWS_WITH_AS(
        checkpoint_from_string(
            "{\"format\":\"adaptermix-checkpoint\",\"version\":1}"),
        doctest::Contains("model"), ConfigError);
  }
  SUBCASE("shape mismatch names the parameter") {
    std::string tampered = good;
    const auto at = tampered.find("\"shape\":[6,8]");  // token embedding
    REQUIRE(at != std::string::npos);
    tampered.replace(at, 13, "\"shape\":[6,9]");
    CHECK_THROWS_AS(checkpoint_from_string(tampered), ShapeError);
  }
  SUBCASE("clone is independent storage") {
    const BackboneModel copy = clone_model(model);
    auto mine = model.parameters();
    auto theirs = copy.parameters();
    mine[0].tensor.values()[0] += 1.0;
    CHECK(theirs[0].tensor.values()[0] != mine[0].tensor.values()[0]);
  }
}

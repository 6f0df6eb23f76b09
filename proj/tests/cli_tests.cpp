/*
 * End-to-end tests of the adaptermix binary: every subcommand, exit codes,
 * byte-reproducibility, the freeze contract across checkpoint files, and
 * the committed golden report.
 */

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "adaptermix/checkpoint.hpp"
#include "adaptermix/sha256.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string required_env(const char* name) {
  const char* value = std::getenv(name);
  REQUIRE_MESSAGE(value != nullptr, "environment variable ", name,
                  " must point at the build/source");
  return value;
}

const std::string& cli() {
  static const std::string path = required_env("ADAPTERMIX_CLI");
  return path;
}

const std::string& source_dir() {
  static const std::string path = required_env("ADAPTERMIX_SOURCE_DIR");
  return path;
}

struct RunResult {
  int exit_code = -1;
  std::string stdout_text;
  std::string stderr_text;
};

RunResult run_cli(const std::string& args) {
  const std::string out = "cli_scratch/stdout.txt";
  const std::string err = "cli_scratch/stderr.txt";
  const std::string command =
      cli() + " " + args + " > " + out + " 2> " + err;
  const int status = std::system(command.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  auto slurp = [](const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  };
  r.stdout_text = slurp(out);
  r.stderr_text = slurp(err);
  return r;
}

std::string slurp_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE_MESSAGE(in.good(), "cannot read ", path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string config_path() {
  return source_dir() + "/configs/golden_small.json";
}

// One shared pipeline run (corpus + pretrain) for the file-based tests.
struct Pipeline {
  Pipeline() {
    fs::remove_all("cli_scratch");
    fs::create_directories("cli_scratch");
    REQUIRE(run_cli("gen-data --config " + config_path() +
                    " --out cli_scratch/corpus.jsonl")
                .exit_code == 0);
    REQUIRE(run_cli("pretrain --config " + config_path() +
                    " --corpus cli_scratch/corpus.jsonl"
                    " --out cli_scratch/pretrain.json"
                    " --history cli_scratch/history.jsonl")
                .exit_code == 0);
  }
};

Pipeline& pipeline() {
  static Pipeline p;
  return p;
}

}  // namespace

TEST_CASE("params prints the finetune fraction") {
  fs::create_directories("cli_scratch");
  const RunResult r = run_cli("params --config " + config_path() +
                              " --strategy finetune");
  CHECK(r.exit_code == 0);
  CHECK(r.stdout_text.find("100.00%") != std::string::npos);
}

TEST_CASE("gen-data is idempotent") {
  pipeline();
  REQUIRE(run_cli("gen-data --config " + config_path() +
                  " --out cli_scratch/corpus_again.jsonl")
              .exit_code == 0);
  CHECK(slurp_file("cli_scratch/corpus.jsonl") ==
        slurp_file("cli_scratch/corpus_again.jsonl"));
}

TEST_CASE("pretrain emits checkpoint and history") {
  pipeline();
  CHECK(fs::exists("cli_scratch/pretrain.json"));
  const std::string history = slurp_file("cli_scratch/history.jsonl");
  std::size_t lines = 0;
  for (char c : history) lines += c == '\n';
  CHECK(lines == 200);  // total_steps in the config
  const json first = json::parse(history.substr(0, history.find('\n')));
  CHECK(first.at("step") == 0);
  CHECK(first.contains("lr"));
  CHECK(first.contains("loss"));
}

TEST_CASE("adapt freezes the backbone, byte for byte") {
  pipeline();
  REQUIRE(run_cli("adapt --config " + config_path() +
                  " --corpus cli_scratch/corpus.jsonl"
                  " --checkpoint cli_scratch/pretrain.json"
                  " --budget-minutes 1"
                  " --out cli_scratch/adapted.json")
              .exit_code == 0);

  using namespace adaptermix;
  const BackboneModel before = load_checkpoint("cli_scratch/pretrain.json");
  const BackboneModel after = load_checkpoint("cli_scratch/adapted.json");
  auto before_params = before.parameters();
  std::size_t checked = 0;
  for (const ParamRef& p : after.parameters()) {
    if (p.tensor.requires_grad()) continue;  // trainable set
    for (const ParamRef& q : before_params) {
      if (q.name != p.name) continue;
      CHECK(sha256_hex(p.tensor.values()) == sha256_hex(q.tensor.values()));
      ++checked;
    }
  }
  CHECK(checked > 0);
  // Seed provenance grew by the adapt phase.
  SeedProvenance seeds;
  load_checkpoint("cli_scratch/adapted.json", &seeds);
  CHECK(seeds.train_seeds.size() == 2);
}

TEST_CASE("eval writes metrics") {
  pipeline();
  REQUIRE(run_cli("eval --config " + config_path() +
                  " --corpus cli_scratch/corpus.jsonl"
                  " --checkpoint cli_scratch/pretrain.json"
                  " --budget-minutes 1"
                  " --out cli_scratch/metrics.json")
              .exit_code == 0);
  const json metrics = json::parse(slurp_file("cli_scratch/metrics.json"));
  CHECK(metrics.contains("mean_mcd"));
  CHECK(metrics.contains("mean_cosine"));
  CHECK(metrics.contains("heldout_loss"));
  CHECK(metrics.at("heldout_loss").get<double>() > 0.0);
}

TEST_CASE("compare reproduces the committed golden report") {
  pipeline();
  REQUIRE(run_cli("compare --config " + config_path() +
                  " --corpus cli_scratch/corpus.jsonl"
                  " --checkpoint cli_scratch/pretrain.json"
                  " --out-dir cli_scratch/report")
              .exit_code == 0);
  CHECK(slurp_file("cli_scratch/report/report.jsonl") ==
        slurp_file(source_dir() + "/tests/golden/compare_report.jsonl"));
  CHECK(slurp_file("cli_scratch/report/report.txt") ==
        slurp_file(source_dir() + "/tests/golden/compare_report.txt"));

  // A second full run is byte-identical.
  REQUIRE(run_cli("compare --config " + config_path() +
                  " --corpus cli_scratch/corpus.jsonl"
                  " --checkpoint cli_scratch/pretrain.json"
                  " --out-dir cli_scratch/report2")
              .exit_code == 0);
  CHECK(slurp_file("cli_scratch/report/report.jsonl") ==
        slurp_file("cli_scratch/report2/report.jsonl"));
}

TEST_CASE("config errors exit 1 with a one-line diagnostic naming the field") {
  fs::create_directories("cli_scratch");
  std::ofstream bad("cli_scratch/bad.json");
  bad << "{\"model\": {\"n_encoder_layers\": 1}}\n";
  bad.close();
  const RunResult r = run_cli("params --config cli_scratch/bad.json");
  CHECK(r.exit_code == 1);
  CHECK(r.stderr_text.find("model.n_decoder_layers") != std::string::npos);
  std::size_t lines = 0;
  for (char c : r.stderr_text) lines += c == '\n';
  CHECK(lines == 1);
}

TEST_CASE("divergence exits with its own code") {
  pipeline();
  // Rewrite the config with an absurd learning rate.
  json cfg = json::parse(slurp_file(config_path()));
  cfg["pretrain"]["base_lr"] = 1e200;
  std::ofstream out("cli_scratch/diverge.json");
  out << cfg.dump() << "\n";
  out.close();
  const RunResult r = run_cli("pretrain --config cli_scratch/diverge.json"
                              " --corpus cli_scratch/corpus.jsonl"
                              " --out cli_scratch/diverged.json");
  CHECK(r.exit_code == 2);
  CHECK(r.stderr_text.find("diverged at step") != std::string::npos);
}

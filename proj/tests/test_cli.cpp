#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "recsim/errors.hpp"

using namespace recsim;
using namespace recsim::cli;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("recsim_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "recsim");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

// A tiny synthetic run that finishes in well under a second.
std::vector<std::string> small_run(const fs::path& out) {
  return {"--synthetic", "small", "--synthetic-users", "60", "--synthetic-items", "80", "--dim", "4",
          "--epochs", "2", "--out", out.string(), "--threads", "1"};
}

}  // namespace

TEST_CASE("config JSON round-trips") {
  RunConfig c;
  c.model.kind = "rnn";
  c.user.alpha_sweep = {-1, 0.5};
  c.user.choice = "alpha_preference";
  c.user.seed_user = 17;
  c.num_users = 12;
  const auto back = config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(back.user.seed_user == 17);
  CHECK(back.num_users == 12);
}

TEST_CASE("layering order is defaults, preset, file, flags") {
  const auto defaults = resolve_config(json(), json());
  CHECK(defaults.steps == 150);
  CHECK(defaults.model.lambda == 0.1);
  CHECK(defaults.threads >= 1);

  const auto preset = resolve_config(json(), json{{"preset", "seed-quartiles"}});
  CHECK(preset.split == "seed_quartile");
  CHECK(preset.user.seed == "random_single");
  CHECK(preset.popularity_mode == "percentile");

  const json file{{"preset", "seed-quartiles"}, {"steps", 40}, {"split", "none"}};
  const auto from_file = resolve_config(file, json());
  CHECK(from_file.steps == 40);
  CHECK(from_file.split == "none");
  CHECK(from_file.user.seed == "random_single");

  const auto flagged = resolve_config(file, json{{"steps", 7}});
  CHECK(flagged.steps == 7);
  CHECK(flagged.preset == "seed-quartiles");

  // The rnn default regularization applies only when lambda is left unset.
  CHECK(resolve_config(json(), json{{"model", {{"kind", "rnn"}}}}).model.lambda == 1e-4);
  CHECK(resolve_config(json{{"model", {{"lambda", 0.5}}}}, json{{"model", {{"kind", "rnn"}}}}).model.lambda == 0.5);
}

TEST_CASE("presets") {
  CHECK(preset_names().size() == 3);
  const auto sweep = resolve_config(json(), json{{"preset", "alpha-sweep"}});
  CHECK(sweep.user.choice == "alpha_preference");
  CHECK(sweep.user.alpha_sweep.size() == 10);
  const auto unbiased = resolve_config(json(), json{{"preset", "ml1m-unbiased"}});
  CHECK(unbiased.user.seed == "real_history");
  CHECK(unbiased.popularity_mode == "raw_count");
  CHECK_THROWS_AS(preset_patch("nope"), ConfigError);
}

TEST_CASE("invalid configs are rejected") {
  CHECK_THROWS_AS(resolve_config(json{{"stepz", 3}}, json()), ConfigError);
  CHECK_THROWS_AS(resolve_config(json{{"model", {{"dims", 3}}}}, json()), ConfigError);
  CHECK_THROWS_AS(resolve_config(json{{"steps", "many"}}, json()), ConfigError);
  CHECK_THROWS_AS(resolve_config(json{{"model", {{"epochs", 0}}}}, json()), ConfigError);
  CHECK_THROWS_AS(resolve_config(json{{"slate_size", 0}}, json()), ConfigError);
  CHECK_THROWS_AS(resolve_config(json{{"model", {{"kind", "svd"}}}}, json()), ConfigError);
  CHECK_THROWS_AS(resolve_config(json{{"user_model", {{"choice", {{"sweep", {1, 2}}}}}}}, json()), ConfigError);
  CHECK_THROWS_AS(resolve_config(json{{"user_model", {{"seed", {{"variant", "random_single"}, {"prefix", 3}}}}}},
                                 json()),
                  ConfigError);
  CHECK_THROWS_AS(resolve_config(json::array(), json()), ConfigError);
}

TEST_CASE("relative data paths resolve against the data root") {
  ::setenv(kDataRootEnv, "/srv/data", 1);
  CHECK(resolve_data_path("ml-1m/ratings.dat") == fs::path("/srv/data/ml-1m/ratings.dat"));
  CHECK(resolve_data_path("/abs/ratings.dat") == fs::path("/abs/ratings.dat"));
  ::unsetenv(kDataRootEnv);
  CHECK(resolve_data_path("ml-1m/ratings.dat") == fs::path("ml-1m/ratings.dat"));
}

TEST_CASE("exit codes") {
  const auto dir = fresh_dir("exit");
  CHECK(invoke({}).code == kExitConfig);
  CHECK(invoke({"frobnicate"}).code == kExitConfig);
  CHECK(invoke({"--help"}).code == kExitOk);

  auto missing = invoke({"train", "--data", (dir / "absent.dat").string(), "--out", dir.string()});
  CHECK(missing.code == kExitConfig);
  CHECK(missing.err.find("dataset file not found") != std::string::npos);

  auto args = small_run(dir);
  args.insert(args.begin(), "train");
  args.insert(args.end(), {"--epochs", "0"});
  CHECK(invoke(args).code == kExitConfig);

  CHECK(invoke({"simulate", "--model-file", (dir / "none.bin").string(), "--out", dir.string()}).code == kExitConfig);

  std::ofstream(dir / "bad.json") << "{ not json";
  CHECK(invoke({"stats", "--config", (dir / "bad.json").string()}).code == kExitConfig);

  std::ofstream(dir / "bad.dat") << "1::2::x::4\n";
  CHECK(invoke({"stats", "--data", (dir / "bad.dat").string(), "--out", dir.string()}).code == kExitRuntime);
}

TEST_CASE("simulate writes outputs and reproduces from its own config") {
  const auto dir = fresh_dir("simulate");
  auto args = small_run(dir / "a");
  args.insert(args.begin(), "simulate");
  args.insert(args.end(), {"--steps", "6", "--users", "15", "--master-seed", "3"});
  const auto first = invoke(args);
  REQUIRE(first.code == kExitOk);
  for (const char* f : {"config.json", "model.bin", "trajectories.jsonl", "trajectories.csv", "series.csv",
                        "summary.json"}) {
    CHECK(fs::exists(dir / "a" / f));
  }

  // Replaying the written config into another directory gives the same log.
  const auto again = invoke({"simulate", "--config", (dir / "a" / "config.json").string(), "--out",
                             (dir / "b").string()});
  REQUIRE(again.code == kExitOk);
  CHECK(slurp(dir / "a" / "trajectories.jsonl") == slurp(dir / "b" / "trajectories.jsonl"));

  // A saved snapshot can be reused without retraining.
  const auto reuse = invoke({"simulate", "--config", (dir / "a" / "config.json").string(), "--model-file",
                             (dir / "a" / "model.bin").string(), "--out", (dir / "c").string()});
  REQUIRE(reuse.code == kExitOk);
  CHECK(slurp(dir / "a" / "trajectories.jsonl") == slurp(dir / "c" / "trajectories.jsonl"));
}

TEST_CASE("partial failures map to exit code 1") {
  const auto dir = fresh_dir("partial");
  auto args = small_run(dir);
  args.insert(args.begin(), "simulate");
  // Chosen items are never offered again, so 80 items run out of
  // 10-item slates after about 70 steps.
  args.insert(args.end(), {"--steps", "90", "--users", "4", "--seed-strategy", "random_single"});
  const auto r = invoke(args);
  CHECK(r.code == kExitPartial);
  CHECK(fs::exists(dir / "failures.csv"));
}

TEST_CASE("alpha sweep writes one cohort per value") {
  const auto dir = fresh_dir("sweep");
  auto args = small_run(dir);
  args.insert(args.begin(), "simulate");
  args.insert(args.end(), {"--preset", "alpha-sweep", "--alphas", "-1", "1", "--steps", "4", "--users", "10"});
  REQUIRE(invoke(args).code == kExitOk);
  const auto sweep = slurp(dir / "sweep.csv");
  CHECK(sweep.rfind("alpha,count,", 0) == 0);
  CHECK(std::count(sweep.begin(), sweep.end(), '\n') == 3);
}

TEST_CASE("generate and stats") {
  const auto dir = fresh_dir("generate");
  REQUIRE(invoke({"generate", "--synthetic", "small", "--synthetic-users", "30", "--synthetic-items", "40",
                  (dir / "r.csv").string()})
              .code == kExitOk);
  const auto stats = invoke({"stats", "--data", (dir / "r.csv").string(), "--out", (dir / "s").string()});
  REQUIRE(stats.code == kExitOk);
  const auto j = json::parse(slurp(dir / "s" / "stats.json"));
  CHECK(j.at("num_users").get<std::size_t>() <= 30);
  CHECK(j.contains("mean_rating"));
}

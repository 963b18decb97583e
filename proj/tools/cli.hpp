#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "recsim/dataset.hpp"
#include "recsim/metrics.hpp"
#include "recsim/synthetic.hpp"

namespace recsim::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitPartial = 1;  // some trajectories failed
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

/// Relative dataset paths resolve against this directory when set.
inline constexpr const char* kDataRootEnv = "RECSIM_DATA_ROOT";

struct DatasetSpec {
  std::string path;  // empty selects the synthetic generator
  std::string format = "auto";
  std::string synthetic_profile = "ml1m";  // ml1m | small
  std::size_t synthetic_users = 500;       // small profile only
  std::size_t synthetic_items = 1000;      // small profile only
  std::uint64_t synthetic_seed = 7;
};

struct ModelSpec {
  std::string kind = "mf";  // mf | rnn
  std::string snapshot;     // when set, simulate loads instead of training
  std::size_t dim = 32;
  double lambda = 0.1;  // a config without it gets the kind's default
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  std::size_t hidden = 32;          // rnn
  double learning_rate = 0.01;      // rnn
  std::size_t max_length = 50;      // rnn
  std::size_t batch_size = 32;      // rnn
};

struct UserModelSpec {
  std::string choice = "uniform";
  double alpha = 0.0;
  std::vector<double> alpha_sweep;  // non-empty runs one cohort per value
  std::string feedback = "positive";
  int beta = 1;
  double rho0 = 1000.0;
  std::string seed = "real_history";
  std::optional<std::int64_t> seed_user;
  std::optional<std::size_t> seed_prefix;
};

struct RunConfig {
  std::string preset;
  DatasetSpec dataset;
  ModelSpec model;
  UserModelSpec user;
  std::size_t steps = 150;
  std::size_t slate_size = 10;
  std::optional<std::size_t> num_users;  // absent: every dataset user
  std::string popularity_mode = "raw_count";
  std::string split = "none";
  std::uint64_t master_seed = 0;
  std::size_t threads = 1;
  std::string out = "recsim-out";

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

nlohmann::json to_json(const RunConfig& config);
/// Unknown keys are rejected so typos do not silently fall back to defaults.
RunConfig config_from_json(const nlohmann::json& j);

std::vector<std::string_view> preset_names();
/// The preset as a JSON merge patch over the defaults.
nlohmann::json preset_patch(std::string_view name);

/// defaults < preset < file < flags. The preset comes from `flags` when given
/// there, otherwise from the file.
RunConfig resolve_config(const nlohmann::json& file, const nlohmann::json& flags);

std::filesystem::path resolve_data_path(const std::string& path);
Dataset load_configured_dataset(const DatasetSpec& spec);

// Each command writes config.json next to its outputs and logs progress to
// `log`. Return values are process exit codes.
int cmd_train(const RunConfig& config, std::ostream& log);
int cmd_simulate(const RunConfig& config, std::ostream& log);
int cmd_stats(const RunConfig& config, std::ostream& log);
int cmd_generate(const RunConfig& config, const std::filesystem::path& target, std::ostream& log);

/// Parses argv, dispatches, and maps exceptions to exit codes.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace recsim::cli

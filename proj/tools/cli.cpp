#include "cli.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "recsim/errors.hpp"
#include "recsim/mf_recommender.hpp"
#include "recsim/rnn_recommender.hpp"
#include "recsim/sim_engine.hpp"
#include "recsim/snapshot.hpp"
#include "recsim/user_models.hpp"

namespace recsim::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kMfLambda = 0.1;
constexpr double kRnnLambda = 1e-4;

std::string number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

void check_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) throw ConfigError("unknown config key '" + std::string(where) + "." + key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& dst, std::string_view where) {
  if (!j.contains(key) || j.at(key).is_null()) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + std::string(where) + "." + key + "' has the wrong type");
  }
}

template <typename T>
void read_optional(const json& j, const char* key, std::optional<T>& dst, std::string_view where) {
  if (!j.contains(key) || j.at(key).is_null()) {
    dst.reset();
    return;
  }
  T v{};
  read(j, key, v, where);
  dst = v;
}

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  return out;
}

void write_text(const fs::path& path, std::string_view text) {
  auto out = open_output(path);
  out << text;
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

fs::path prepare_out(const RunConfig& config) {
  fs::path dir(config.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory '" + dir.string() + "': " + ec.message());
  write_text(dir / "config.json", to_json(config).dump(2) + "\n");
  return dir;
}

json histogram_json(const Histogram& h) { return {{"edges", h.edges}, {"counts", h.counts}}; }

MfConfig mf_config(const ModelSpec& m) {
  return MfConfig{.dim = m.dim, .lambda = m.lambda, .epochs = m.epochs, .seed = m.seed};
}

RnnConfig rnn_config(const ModelSpec& m) {
  return RnnConfig{.hidden = m.hidden,
                   .dim = m.dim,
                   .lambda = m.lambda,
                   .learning_rate = m.learning_rate,
                   .epochs = m.epochs,
                   .max_length = m.max_length,
                   .batch_size = m.batch_size,
                   .seed = m.seed};
}

ModelSnapshot train_model(const RunConfig& config, const Dataset& dataset, std::ostream& log) {
  const auto& m = config.model;
  if (m.kind == "mf") {
    MfTrainingTrace trace;
    auto model = train_mf(dataset, mf_config(m), &trace);
    log << "trained mf: dim " << m.dim << ", lambda " << number(m.lambda) << ", " << m.epochs
        << " sweeps, final objective " << number(trace.objective.back()) << "\n";
    return model;
  }
  RnnTrainingTrace trace;
  auto model = train_rnn(dataset, rnn_config(m), &trace);
  log << "trained rnn: hidden " << m.hidden << ", dim " << m.dim << ", " << m.epochs
      << " epochs, training mse " << number(trace.initial_mse) << " -> "
      << number(trace.epoch_mse.empty() ? trace.initial_mse : trace.epoch_mse.back()) << "\n";
  return model;
}

UserModel make_user_model(const UserModelSpec& spec, double alpha,
                          const std::shared_ptr<const PopularityAttribute>& attribute) {
  UserModel user;
  switch (parse_choice_variant(spec.choice)) {
    case ChoiceVariant::lazy: user.choice = ChoiceModel::lazy(); break;
    case ChoiceVariant::uniform: user.choice = ChoiceModel::uniform(); break;
    case ChoiceVariant::ranked: user.choice = ChoiceModel::ranked(); break;
    case ChoiceVariant::alpha_preference:
      user.choice = ChoiceModel::alpha_preference(alpha, attribute);
      break;
  }
  if (parse_feedback_variant(spec.feedback) == FeedbackVariant::beta_preference) {
    user.feedback = FeedbackModel::beta_preference(spec.beta, spec.rho0);
  }
  return user;
}

SeedStrategy make_seed_strategy(const UserModelSpec& spec) {
  if (parse_seed_variant(spec.seed) == SeedVariant::random_single) return SeedStrategy::random_single();
  SeedStrategy s;
  s.variant = SeedVariant::real_history;
  if (spec.seed_user) s.user = *spec.seed_user;
  s.prefix = spec.seed_prefix;
  return s;
}

struct CohortOutcome {
  CohortSummary summary;
  std::size_t failures = 0;
};

CohortOutcome run_cohort(const RunConfig& config, const Recommender& recommender, const UserModel& user,
                         const PopularityAttribute& attribute, const Dataset& dataset,
                         const fs::path& dir, std::ostream& log) {
  BatchSettings settings;
  settings.seed = make_seed_strategy(config.user);
  settings.num_users = config.num_users.value_or(dataset.num_users());
  settings.steps = config.steps;
  settings.slate_size = config.slate_size;
  settings.master_seed = config.master_seed;
  settings.threads = config.threads;
  const auto result = simulate_batch(recommender, user, attribute, dataset, settings);

  fs::create_directories(dir);
  {
    auto out = open_output(dir / "trajectories.jsonl");
    write_trajectory_log(out, result.trajectories, attribute);
  }
  if (!result.failures.empty()) {
    auto out = open_output(dir / "failures.csv");
    out << "traj_id,step,message\n";
    for (const auto& f : result.failures) {
      std::string msg = f.message;
      std::replace(msg.begin(), msg.end(), '"', '\'');
      out << f.id << ',' << f.step << ",\"" << msg << "\"\n";
    }
    log << describe(user) << ": " << result.failures.size() << " of " << settings.num_users
        << " trajectories failed; first: trajectory " << result.failures.front().id << ", "
        << result.failures.front().message << "\n";
  }

  CohortOutcome outcome;
  outcome.failures = result.failures.size();
  if (result.trajectories.empty()) return outcome;

  std::vector<TrajectoryReport> reports;
  reports.reserve(result.trajectories.size());
  for (const auto& t : result.trajectories) reports.push_back(trajectory_report(t, attribute));
  outcome.summary = summarize_cohort(reports, parse_cohort_split(config.split), attribute.mode());
  outcome.summary.label = describe(user);
  write_text(dir / "trajectories.csv", emit_report(outcome.summary, reports, ReportFormat::trajectories_csv));
  write_text(dir / "series.csv", emit_report(outcome.summary, reports, ReportFormat::series_csv));
  write_text(dir / "summary.json", emit_report(outcome.summary, reports, ReportFormat::summary_json));

  const auto& s = outcome.summary;
  log << s.label << ": " << s.count << " trajectories, seed pop " << number(s.seed_popularity.mean)
      << ", first step " << number(s.first_step_popularity.mean) << ", mean " << number(s.mean_popularity.mean)
      << ", slope " << number(s.slope.mean) << ", positive slope " << number(s.percent_positive_slope)
      << "%\n";
  return outcome;
}

// Flags land in a JSON patch so they merge with the same rules as files.
template <typename T>
void flag(CLI::App* app, const std::string& name, json& flags, std::vector<std::string> path,
          const std::string& help) {
  app->add_option_function<T>(
      name,
      [&flags, path](const T& v) {
        json* node = &flags;
        for (const auto& key : path) node = &(*node)[key];
        *node = v;
      },
      help);
}

}  // namespace

void RunConfig::validate() const {
  parse_dataset_format(dataset.format);
  require(dataset.synthetic_profile == "ml1m" || dataset.synthetic_profile == "small",
          "dataset.synthetic.profile must be 'ml1m' or 'small'");
  require(dataset.synthetic_users >= 1 && dataset.synthetic_items >= 1,
          "dataset.synthetic needs at least one user and one item");

  require(model.kind == "mf" || model.kind == "rnn", "model.kind must be 'mf' or 'rnn', got '" + model.kind + "'");
  require(model.dim >= 1, "model.dim must be at least 1");
  require(model.epochs >= 1, "model.epochs must be at least 1");
  require(std::isfinite(model.lambda) && model.lambda >= 0.0, "model.lambda must be finite and non-negative");
  require(model.hidden >= 1, "model.hidden must be at least 1");
  require(std::isfinite(model.learning_rate) && model.learning_rate >= 0.0,
          "model.learning_rate must be finite and non-negative");
  require(model.max_length >= 2, "model.max_length must be at least 2");
  require(model.batch_size >= 1, "model.batch_size must be at least 1");

  const auto choice = parse_choice_variant(user.choice);
  require(std::isfinite(user.alpha), "user_model.choice.alpha must be finite");
  for (double a : user.alpha_sweep) require(std::isfinite(a), "user_model.choice.sweep values must be finite");
  require(user.alpha_sweep.empty() || choice == ChoiceVariant::alpha_preference,
          "user_model.choice.sweep needs the alpha_preference choice model");
  const auto feedback = parse_feedback_variant(user.feedback);
  require(user.beta == 1 || user.beta == -1, "user_model.feedback.beta must be 1 or -1");
  require(std::isfinite(user.rho0), "user_model.feedback.rho0 must be finite");
  const auto seed = parse_seed_variant(user.seed);
  require(seed == SeedVariant::real_history || (!user.seed_user && !user.seed_prefix),
          "user_model.seed.user_id and prefix need the real_history seed");
  require(!user.seed_prefix || *user.seed_prefix >= 1, "user_model.seed.prefix must be at least 1");

  require(steps >= 1, "steps must be at least 1");
  require(slate_size >= 1, "slate_size must be at least 1");
  require(!num_users || *num_users >= 1, "num_users must be at least 1");
  const auto mode = parse_popularity_mode(popularity_mode);
  require(!(mode == PopularityMode::percentile && feedback == FeedbackVariant::beta_preference &&
            std::abs(user.rho0) > 100.0),
          "user_model.feedback.rho0 is in percentile units here and must lie in [-100, 100]");
  parse_cohort_split(split);
  require(threads >= 1, "threads must be at least 1");
  require(!out.empty(), "out must name a directory");
}

json to_json(const RunConfig& c) {
  return {
      {"preset", c.preset},
      {"dataset",
       {{"path", c.dataset.path},
        {"format", c.dataset.format},
        {"synthetic",
         {{"profile", c.dataset.synthetic_profile},
          {"users", c.dataset.synthetic_users},
          {"items", c.dataset.synthetic_items},
          {"seed", c.dataset.synthetic_seed}}}}},
      {"model",
       {{"kind", c.model.kind},
        {"snapshot", c.model.snapshot},
        {"dim", c.model.dim},
        {"lambda", c.model.lambda},
        {"epochs", c.model.epochs},
        {"seed", c.model.seed},
        {"hidden", c.model.hidden},
        {"learning_rate", c.model.learning_rate},
        {"max_length", c.model.max_length},
        {"batch_size", c.model.batch_size}}},
      {"user_model",
       {{"choice", {{"variant", c.user.choice}, {"alpha", c.user.alpha}, {"sweep", c.user.alpha_sweep}}},
        {"feedback", {{"variant", c.user.feedback}, {"beta", c.user.beta}, {"rho0", c.user.rho0}}},
        {"seed",
         {{"variant", c.user.seed},
          {"user_id", optional_json(c.user.seed_user)},
          {"prefix", optional_json(c.user.seed_prefix)}}}}},
      {"steps", c.steps},
      {"slate_size", c.slate_size},
      {"num_users", optional_json(c.num_users)},
      {"popularity_mode", c.popularity_mode},
      {"split", c.split},
      {"master_seed", c.master_seed},
      {"threads", c.threads},
      {"out", c.out},
  };
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  check_keys(j, "config",
             {"preset", "dataset", "model", "user_model", "steps", "slate_size", "num_users",
              "popularity_mode", "split", "master_seed", "threads", "out"});
  read(j, "preset", c.preset, "config");
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    check_keys(d, "dataset", {"path", "format", "synthetic"});
    read(d, "path", c.dataset.path, "dataset");
    read(d, "format", c.dataset.format, "dataset");
    if (d.contains("synthetic")) {
      const auto& s = d.at("synthetic");
      check_keys(s, "dataset.synthetic", {"profile", "users", "items", "seed"});
      read(s, "profile", c.dataset.synthetic_profile, "dataset.synthetic");
      read(s, "users", c.dataset.synthetic_users, "dataset.synthetic");
      read(s, "items", c.dataset.synthetic_items, "dataset.synthetic");
      read(s, "seed", c.dataset.synthetic_seed, "dataset.synthetic");
    }
  }
  bool lambda_given = false;
  if (j.contains("model")) {
    const auto& m = j.at("model");
    check_keys(m, "model",
               {"kind", "snapshot", "dim", "lambda", "epochs", "seed", "hidden", "learning_rate",
                "max_length", "batch_size"});
    read(m, "kind", c.model.kind, "model");
    read(m, "snapshot", c.model.snapshot, "model");
    read(m, "dim", c.model.dim, "model");
    lambda_given = m.contains("lambda") && !m.at("lambda").is_null();
    read(m, "lambda", c.model.lambda, "model");
    read(m, "epochs", c.model.epochs, "model");
    read(m, "seed", c.model.seed, "model");
    read(m, "hidden", c.model.hidden, "model");
    read(m, "learning_rate", c.model.learning_rate, "model");
    read(m, "max_length", c.model.max_length, "model");
    read(m, "batch_size", c.model.batch_size, "model");
  }
  if (!lambda_given) c.model.lambda = c.model.kind == "rnn" ? kRnnLambda : kMfLambda;
  if (j.contains("user_model")) {
    const auto& u = j.at("user_model");
    check_keys(u, "user_model", {"choice", "feedback", "seed"});
    if (u.contains("choice")) {
      const auto& ch = u.at("choice");
      check_keys(ch, "user_model.choice", {"variant", "alpha", "sweep"});
      read(ch, "variant", c.user.choice, "user_model.choice");
      read(ch, "alpha", c.user.alpha, "user_model.choice");
      read(ch, "sweep", c.user.alpha_sweep, "user_model.choice");
    }
    if (u.contains("feedback")) {
      const auto& f = u.at("feedback");
      check_keys(f, "user_model.feedback", {"variant", "beta", "rho0"});
      read(f, "variant", c.user.feedback, "user_model.feedback");
      read(f, "beta", c.user.beta, "user_model.feedback");
      read(f, "rho0", c.user.rho0, "user_model.feedback");
    }
    if (u.contains("seed")) {
      const auto& s = u.at("seed");
      check_keys(s, "user_model.seed", {"variant", "user_id", "prefix"});
      read(s, "variant", c.user.seed, "user_model.seed");
      read_optional(s, "user_id", c.user.seed_user, "user_model.seed");
      read_optional(s, "prefix", c.user.seed_prefix, "user_model.seed");
    }
  }
  read(j, "steps", c.steps, "config");
  read(j, "slate_size", c.slate_size, "config");
  read_optional(j, "num_users", c.num_users, "config");
  read(j, "popularity_mode", c.popularity_mode, "config");
  read(j, "split", c.split, "config");
  read(j, "master_seed", c.master_seed, "config");
  read(j, "threads", c.threads, "config");
  read(j, "out", c.out, "config");
  return c;
}

std::vector<std::string_view> preset_names() { return {"ml1m-unbiased", "alpha-sweep", "seed-quartiles"}; }

json preset_patch(std::string_view name) {
  if (name == "ml1m-unbiased") {
    return json::parse(R"({
      "user_model": {"choice": {"variant": "uniform"}, "feedback": {"variant": "positive"},
                     "seed": {"variant": "real_history"}},
      "steps": 150, "slate_size": 10, "popularity_mode": "raw_count", "split": "none"})");
  }
  if (name == "alpha-sweep") {
    return json::parse(R"({
      "user_model": {"choice": {"variant": "alpha_preference",
                                "sweep": [-50, -10, -1, -0.1, -0.01, 0.001, 0.1, 1, 10, 50]},
                     "feedback": {"variant": "positive"}, "seed": {"variant": "random_single"}},
      "steps": 150, "slate_size": 10, "popularity_mode": "percentile", "split": "none"})");
  }
  if (name == "seed-quartiles") {
    return json::parse(R"({
      "user_model": {"choice": {"variant": "uniform"}, "feedback": {"variant": "positive"},
                     "seed": {"variant": "random_single"}},
      "steps": 150, "slate_size": 10, "popularity_mode": "percentile", "split": "seed_quartile"})");
  }
  std::string known;
  for (auto n : preset_names()) known += (known.empty() ? "" : ", ") + std::string(n);
  throw ConfigError("unknown preset '" + std::string(name) + "' (known: " + known + ")");
}

RunConfig resolve_config(const json& file, const json& flags) {
  json merged = to_json(RunConfig{});
  merged["model"].erase("lambda");
  merged["threads"] = std::max(1u, std::thread::hardware_concurrency());

  std::string preset;
  if (file.is_object() && file.contains("preset")) preset = file.at("preset").get<std::string>();
  if (flags.is_object() && flags.contains("preset")) preset = flags.at("preset").get<std::string>();
  if (!preset.empty()) merged.merge_patch(preset_patch(preset));
  if (!file.is_null()) {
    if (!file.is_object()) throw ConfigError("config file must hold a JSON object");
    merged.merge_patch(file);
  }
  if (!flags.is_null()) merged.merge_patch(flags);
  merged["preset"] = preset;

  auto config = config_from_json(merged);
  config.validate();
  return config;
}

fs::path resolve_data_path(const std::string& path) {
  fs::path p(path);
  if (p.is_relative()) {
    if (const char* root = std::getenv(kDataRootEnv); root != nullptr && *root != '\0') return fs::path(root) / p;
  }
  return p;
}

Dataset load_configured_dataset(const DatasetSpec& spec) {
  if (spec.path.empty()) {
    auto sc = spec.synthetic_profile == "ml1m"
                  ? SyntheticConfig::movielens_like(spec.synthetic_seed)
                  : SyntheticConfig::small(spec.synthetic_users, spec.synthetic_items, spec.synthetic_seed);
    return generate_synthetic(sc);
  }
  const auto path = resolve_data_path(spec.path);
  if (!fs::exists(path)) throw ConfigError("dataset file not found: '" + path.string() + "'");
  return load_dataset(path, parse_dataset_format(spec.format));
}

int cmd_train(const RunConfig& config, std::ostream& log) {
  const auto dataset = load_configured_dataset(config.dataset);
  log << "dataset: " << dataset.num_users() << " users, " << dataset.num_items() << " items, "
      << dataset.num_interactions() << " ratings\n";
  const auto dir = prepare_out(config);
  const auto model = train_model(config, dataset, log);
  save_model_file(dir / "model.bin", model);
  log << "wrote " << (dir / "model.bin").string() << "\n";
  return kExitOk;
}

int cmd_simulate(const RunConfig& config, std::ostream& log) {
  const auto dataset = load_configured_dataset(config.dataset);
  const auto dir = prepare_out(config);
  auto attribute = std::make_shared<const PopularityAttribute>(
      compute_popularity(dataset, parse_popularity_mode(config.popularity_mode)));

  std::unique_ptr<Recommender> recommender;
  if (!config.model.snapshot.empty()) {
    const auto path = resolve_data_path(config.model.snapshot);
    if (!fs::exists(path)) throw ConfigError("model snapshot not found: '" + path.string() + "'");
    recommender = make_recommender(load_model_file(path));
  } else {
    auto model = train_model(config, dataset, log);
    save_model_file(dir / "model.bin", model);
    recommender = make_recommender(std::move(model));
  }
  log << "recommender " << model_id(*recommender) << "\n";

  std::size_t failures = 0;
  if (config.user.alpha_sweep.empty()) {
    const auto user = make_user_model(config.user, config.user.alpha, attribute);
    failures = run_cohort(config, *recommender, user, *attribute, dataset, dir, log).failures;
  } else {
    auto sweep = open_output(dir / "sweep.csv");
    sweep << "alpha,count,seed_pop,first_step_pop,mean_pop,mean_pop_p5,mean_pop_p95,last_step_pop,slope,"
             "percent_positive_slope\n";
    for (double alpha : config.user.alpha_sweep) {
      const auto user = make_user_model(config.user, alpha, attribute);
      const auto outcome = run_cohort(config, *recommender, user, *attribute, dataset,
                                      dir / ("alpha_" + number(alpha)), log);
      failures += outcome.failures;
      const auto& s = outcome.summary;
      sweep << number(alpha) << ',' << s.count << ',' << number(s.seed_popularity.mean) << ','
            << number(s.first_step_popularity.mean) << ',' << number(s.mean_popularity.mean) << ','
            << number(s.mean_popularity.p5) << ',' << number(s.mean_popularity.p95) << ','
            << number(s.last_step_popularity.mean) << ',' << number(s.slope.mean) << ','
            << number(s.percent_positive_slope) << '\n';
    }
  }
  return failures == 0 ? kExitOk : kExitPartial;
}

int cmd_stats(const RunConfig& config, std::ostream& log) {
  const auto dataset = load_configured_dataset(config.dataset);
  const auto dir = prepare_out(config);
  const auto stats = dataset_stats(dataset);
  std::vector<double> rhos;
  rhos.reserve(stats.user_spearman.size());
  for (const auto& [user, rho] : stats.user_spearman) rhos.push_back(rho);
  json j = {
      {"num_users", stats.num_users},
      {"num_items", stats.num_items},
      {"num_interactions", stats.num_interactions},
      {"mean_rating", dataset.mean_rating()},
      {"mean_item_popularity", stats.mean_item_popularity},
      {"item_popularity", histogram_json(stats.item_popularity)},
      {"history_length", histogram_json(stats.history_length)},
      {"history_popularity", histogram_json(stats.history_popularity)},
      {"rating_popularity_correlation", histogram_json(stats.rating_popularity_correlation)},
      {"spearman_users", rhos.size()},
  };
  if (!rhos.empty()) {
    j["spearman_median"] = percentile(rhos, 0.5);
    j["spearman_percent_positive"] =
        100.0 * static_cast<double>(std::count_if(rhos.begin(), rhos.end(), [](double r) { return r > 0; })) /
        static_cast<double>(rhos.size());
  }
  write_text(dir / "stats.json", j.dump(2) + "\n");
  log << stats.num_users << " users, " << stats.num_items << " items, " << stats.num_interactions
      << " ratings, mean item popularity " << number(stats.mean_item_popularity) << "\n";
  if (!rhos.empty()) {
    log << "median per-user rating/popularity spearman " << number(j["spearman_median"].get<double>())
        << " over " << rhos.size() << " users\n";
  }
  log << "wrote " << (dir / "stats.json").string() << "\n";
  return kExitOk;
}

int cmd_generate(const RunConfig& config, const fs::path& target, std::ostream& log) {
  if (!config.dataset.path.empty()) throw ConfigError("generate writes a synthetic dataset; drop --data");
  const auto dataset = load_configured_dataset(config.dataset);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  auto out = open_output(target);
  if (target.extension() == ".csv") {
    write_csv(out, dataset);
  } else {
    write_movielens(out, dataset);
  }
  if (!out) throw Error("failed writing '" + target.string() + "'");
  log << "wrote " << dataset.num_interactions() << " ratings to " << target.string() << "\n";
  return kExitOk;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Closed-loop recommender simulation"};
  app.require_subcommand(1);
  json flags = json::object();
  std::string config_path;
  std::string generate_target;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run config; flags override it");
    flag<std::string>(sub, "--preset", flags, {"preset"}, "ml1m-unbiased | alpha-sweep | seed-quartiles");
    flag<std::string>(sub, "--out", flags, {"out"}, "output directory");
    flag<std::size_t>(sub, "--threads", flags, {"threads"}, "worker threads");
    flag<std::string>(sub, "--data", flags, {"dataset", "path"},
                      "ratings file; relative paths resolve against $RECSIM_DATA_ROOT");
    flag<std::string>(sub, "--data-format", flags, {"dataset", "format"}, "auto | movielens | csv");
    flag<std::string>(sub, "--synthetic", flags, {"dataset", "synthetic", "profile"},
                      "synthetic profile used without --data: ml1m | small");
    flag<std::size_t>(sub, "--synthetic-users", flags, {"dataset", "synthetic", "users"}, "small profile users");
    flag<std::size_t>(sub, "--synthetic-items", flags, {"dataset", "synthetic", "items"}, "small profile items");
    flag<std::uint64_t>(sub, "--synthetic-seed", flags, {"dataset", "synthetic", "seed"}, "generator seed");
  };
  auto model_flags = [&](CLI::App* sub) {
    flag<std::string>(sub, "--model", flags, {"model", "kind"}, "mf | rnn");
    flag<std::size_t>(sub, "--dim", flags, {"model", "dim"}, "embedding dimension");
    flag<double>(sub, "--lambda", flags, {"model", "lambda"}, "regularization strength");
    flag<std::size_t>(sub, "--epochs", flags, {"model", "epochs"}, "ALS sweeps or RNN epochs");
    flag<std::uint64_t>(sub, "--model-seed", flags, {"model", "seed"}, "initialization seed");
    flag<std::size_t>(sub, "--hidden", flags, {"model", "hidden"}, "RNN hidden size");
    flag<double>(sub, "--lr", flags, {"model", "learning_rate"}, "RNN learning rate");
    flag<std::size_t>(sub, "--max-length", flags, {"model", "max_length"}, "RNN sequence truncation");
    flag<std::size_t>(sub, "--batch-size", flags, {"model", "batch_size"}, "RNN users per batch");
  };

  auto* train = app.add_subcommand("train", "train a recommender and write model.bin");
  common(train);
  model_flags(train);

  auto* simulate = app.add_subcommand("simulate", "simulate user trajectories against a frozen recommender");
  common(simulate);
  model_flags(simulate);
  flag<std::string>(simulate, "--model-file", flags, {"model", "snapshot"}, "trained snapshot; trains when absent");
  flag<std::size_t>(simulate, "--steps", flags, {"steps"}, "simulated steps T");
  flag<std::size_t>(simulate, "--slate-size", flags, {"slate_size"}, "slate size k");
  flag<std::size_t>(simulate, "--users", flags, {"num_users"}, "trajectories; default one per dataset user");
  flag<std::string>(simulate, "--choice", flags, {"user_model", "choice", "variant"},
                    "lazy | uniform | ranked | alpha_preference");
  flag<double>(simulate, "--alpha", flags, {"user_model", "choice", "alpha"}, "alpha_preference strength");
  flag<std::vector<double>>(simulate, "--alphas", flags, {"user_model", "choice", "sweep"},
                            "run one cohort per alpha");
  flag<std::string>(simulate, "--feedback", flags, {"user_model", "feedback", "variant"},
                    "positive | beta_preference");
  flag<int>(simulate, "--beta", flags, {"user_model", "feedback", "beta"}, "+1 or -1");
  flag<double>(simulate, "--rho0", flags, {"user_model", "feedback", "rho0"}, "popularity threshold");
  flag<std::string>(simulate, "--seed-strategy", flags, {"user_model", "seed", "variant"},
                    "random_single | real_history");
  flag<std::int64_t>(simulate, "--seed-user", flags, {"user_model", "seed", "user_id"}, "seed every trajectory from this user");
  flag<std::size_t>(simulate, "--seed-prefix", flags, {"user_model", "seed", "prefix"}, "earliest n seed interactions");
  flag<std::string>(simulate, "--popularity", flags, {"popularity_mode"}, "raw_count | percentile");
  flag<std::string>(simulate, "--split", flags, {"split"}, "none | seed_quartile");
  flag<std::uint64_t>(simulate, "--master-seed", flags, {"master_seed"}, "seed of every trajectory stream");

  auto* stats = app.add_subcommand("stats", "dataset statistics and histograms");
  common(stats);

  auto* generate = app.add_subcommand("generate", "write a synthetic ratings file");
  common(generate);
  generate->add_option("target", generate_target, "output file; .csv selects CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    if (const auto subs = app.get_subcommands(); !subs.empty()) out << subs.front()->help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return e.get_exit_code() == 0 ? kExitOk : kExitConfig;
  }

  try {
    json file;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw ConfigError("cannot open config file '" + config_path + "'");
      try {
        file = json::parse(in);
      } catch (const json::parse_error& e) {
        throw ConfigError("config file '" + config_path + "' is not valid JSON: " + e.what());
      }
    }
    const auto config = resolve_config(file, flags);
    if (train->parsed()) return cmd_train(config, out);
    if (simulate->parsed()) return cmd_simulate(config, out);
    if (stats->parsed()) return cmd_stats(config, out);
    return cmd_generate(config, generate_target, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace recsim::cli

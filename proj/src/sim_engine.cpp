#include "recsim/sim_engine.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <istream>
#include <ostream>
#include <thread>
#include <variant>

#include <nlohmann/json.hpp>

namespace recsim {

using nlohmann::json;

namespace {

constexpr const char* kLogSchema = "recsim.trajectory_log";

void require_same_vocabulary(const Recommender& recommender, const PopularityAttribute& attribute) {
  const auto a = recommender.item_ids();
  const auto b = attribute.item_ids();
  if (!std::equal(a.begin(), a.end(), b.begin(), b.end())) {
    throw ConfigError("recommender and item attribute cover different item vocabularies (" +
                      std::to_string(a.size()) + " vs " + std::to_string(b.size()) + " items)");
  }
}

Trajectory run_one(const Recommender& recommender, const UserModel& user,
                   const PopularityAttribute& attribute, std::span<const SeedStep> seed,
                   std::size_t steps, std::size_t slate_size, Rng& rng, std::size_t id,
                   const std::string& model) {
  Trajectory traj;
  traj.id = id;
  traj.rng_key = rng.key();
  traj.model_id = model;
  traj.user_model = describe(user);

  const auto n = recommender.num_items();
  const auto ids = recommender.item_ids();
  std::vector<std::uint8_t> seen(n, 0);
  std::size_t seen_count = 0;
  auto session = recommender.start_session();

  try {
    if (seed.empty()) throw ModelError("seed trajectory is empty");
    for (const auto& s : seed) {
      const auto idx = recommender.index_of(s.item);
      if (!idx) throw ModelError("seed item " + std::to_string(s.item) + " unknown to the model");
      if (seen[*idx]) throw ModelError("seed repeats item " + std::to_string(s.item));
      seen[*idx] = 1;
      ++seen_count;
      session->observe(*idx, s.rating, s.scale);
      traj.seed.push_back({{}, s.item, s.rating, s.scale});
    }
  } catch (const Error& e) {
    throw SimulationError(0, false, e.what(), std::move(traj));
  }

  std::vector<ItemIndex> slate;
  for (std::size_t t = 1; t <= steps; ++t) {
    try {
      if (n - seen_count < slate_size) {
        throw SimulationError(t, true, CandidateShortfall(slate_size, n - seen_count).what(), traj);
      }
      slate = recommender.recommend(session->user_vector(), seen, slate_size);
      const auto chosen = slate[choose(user.choice, slate, rng)];
      const double rating = feedback(user.feedback, chosen, attribute);
      session->observe(chosen, rating, RatingScale::feedback);
      seen[chosen] = 1;
      ++seen_count;

      InteractionStep step;
      step.slate.reserve(slate.size());
      for (ItemIndex idx : slate) step.slate.push_back(ids[idx]);
      step.choice = ids[chosen];
      step.rating = rating;
      step.scale = RatingScale::feedback;
      traj.steps.push_back(std::move(step));
    } catch (const SimulationError&) {
      throw;
    } catch (const Error& e) {
      throw SimulationError(t, false, e.what(), std::move(traj));
    }
  }
  return traj;
}

std::string format_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", x);
  return buf;
}

std::string_view scale_name(RatingScale s) { return s == RatingScale::dataset ? "dataset" : "feedback"; }

}  // namespace

std::string describe(const UserModel& model) {
  std::string out = "choice=" + std::string(to_string(model.choice.variant()));
  if (model.choice.variant() == ChoiceVariant::alpha_preference) {
    out += "(alpha=" + format_number(model.choice.alpha()) + ")";
  }
  out += ";feedback=" + std::string(to_string(model.feedback.variant));
  if (model.feedback.variant == FeedbackVariant::beta_preference) {
    out += "(beta=" + std::to_string(model.feedback.beta) + ",rho0=" + format_number(model.feedback.rho0) + ")";
  }
  return out;
}

std::string model_id(const Recommender& recommender) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(recommender.parameter_hash()));
  return std::string(recommender.kind()) + ":" + buf;
}

Trajectory simulate(const Recommender& recommender, const UserModel& user,
                    const PopularityAttribute& attribute, std::span<const SeedStep> seed,
                    std::size_t steps, std::size_t slate_size, Rng rng, std::size_t id) {
  if (steps < 1) throw ConfigError("number of steps must be at least 1");
  if (slate_size < 1) throw ConfigError("slate size must be at least 1");
  require_same_vocabulary(recommender, attribute);
  user.feedback.validate();
  return run_one(recommender, user, attribute, seed, steps, slate_size, rng, id, model_id(recommender));
}

std::vector<UserId> select_seed_users(const Dataset& dataset, std::size_t count,
                                      std::uint64_t master_seed) {
  const auto users = dataset.users();
  if (count > users.size()) {
    throw ConfigError("requested " + std::to_string(count) + " real-history users but the dataset has " +
                      std::to_string(users.size()));
  }
  std::vector<UserId> pool(users.begin(), users.end());
  if (count == pool.size()) return pool;
  Rng rng = Rng::split(master_seed, ~std::uint64_t{0});
  for (std::size_t i = 0; i < count; ++i) {
    std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
  }
  pool.resize(count);
  std::sort(pool.begin(), pool.end());
  return pool;
}

BatchResult simulate_batch(const Recommender& recommender, const UserModel& user,
                           const PopularityAttribute& attribute, const Dataset& dataset,
                           const BatchSettings& settings) {
  if (settings.num_users < 1) throw ConfigError("number of users must be at least 1");
  if (settings.steps < 1) throw ConfigError("number of steps must be at least 1");
  if (settings.slate_size < 1) throw ConfigError("slate size must be at least 1");
  require_same_vocabulary(recommender, attribute);
  user.feedback.validate();

  std::vector<UserId> seed_users;
  if (settings.seed.variant == SeedVariant::real_history && !settings.seed.user) {
    seed_users = select_seed_users(dataset, settings.num_users, settings.master_seed);
  }
  const auto model = model_id(recommender);

  using Outcome = std::variant<Trajectory, TrajectoryFailure>;
  std::vector<Outcome> outcomes(settings.num_users);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < settings.num_users; i = next++) {
      Rng rng = Rng::split(settings.master_seed, i);
      std::optional<UserId> seed_user;
      try {
        SeedStrategy strategy = settings.seed;
        if (strategy.variant == SeedVariant::real_history) {
          if (!strategy.user) strategy.user = seed_users[i];
          seed_user = strategy.user;
        }
        const auto seed = make_seed(strategy, dataset, rng);
        auto traj = run_one(recommender, user, attribute, seed, settings.steps, settings.slate_size,
                            rng, i, model);
        traj.seed_user = seed_user;
        outcomes[i] = std::move(traj);
      } catch (const SimulationError& e) {
        Trajectory partial = e.partial();
        partial.seed_user = seed_user;
        outcomes[i] = TrajectoryFailure{i, e.step(), e.what(), std::move(partial)};
      } catch (const std::exception& e) {
        outcomes[i] = TrajectoryFailure{i, 0, e.what(), Trajectory{}};
      }
    }
  };

  const auto workers = std::clamp<std::size_t>(settings.threads, 1, settings.num_users);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  BatchResult result;
  for (auto& outcome : outcomes) {
    if (auto* traj = std::get_if<Trajectory>(&outcome)) {
      result.trajectories.push_back(std::move(*traj));
    } else {
      result.failures.push_back(std::move(std::get<TrajectoryFailure>(outcome)));
    }
  }
  return result;
}

void write_trajectory_log(std::ostream& out, std::span<const Trajectory> trajectories,
                          const PopularityAttribute& attribute) {
  out << json{{"schema", kLogSchema}, {"version", kTrajectoryLogVersion},
              {"attribute", to_string(attribute.mode())}}.dump()
      << '\n';
  auto write_step = [&](const Trajectory& traj, const InteractionStep& step, std::string_view phase,
                        std::size_t t) {
    json rec = {{"record", "step"},
                {"traj_id", traj.id},
                {"phase", phase},
                {"t", t},
                {"slate", step.slate},
                {"choice", step.choice},
                {"rating", step.rating},
                {"scale", scale_name(step.scale)},
                {"rho", attribute.value_of(step.choice)}};
    out << rec.dump() << '\n';
  };
  for (const auto& traj : trajectories) {
    json head = {{"record", "trajectory"},
                 {"traj_id", traj.id},
                 {"seed_user", traj.seed_user ? json(*traj.seed_user) : json(nullptr)},
                 {"rng_key", traj.rng_key},
                 {"model_id", traj.model_id},
                 {"user_model", traj.user_model},
                 {"seed_length", traj.seed.size()},
                 {"steps", traj.steps.size()}};
    out << head.dump() << '\n';
    for (std::size_t i = 0; i < traj.seed.size(); ++i) write_step(traj, traj.seed[i], "seed", i);
    for (std::size_t i = 0; i < traj.steps.size(); ++i) write_step(traj, traj.steps[i], "sim", i + 1);
  }
}

std::vector<Trajectory> read_trajectory_log(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<Trajectory> out;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(line_no, e.what());
    }
    try {
      if (!header) {
        if (rec.value("schema", "") != kLogSchema) throw ParseError(line_no, "not a trajectory log");
        if (rec.at("version").get<int>() != kTrajectoryLogVersion) {
          throw ParseError(line_no, "unsupported trajectory log version");
        }
        header = true;
        continue;
      }
      const auto kind = rec.at("record").get<std::string>();
      if (kind == "trajectory") {
        Trajectory traj;
        traj.id = rec.at("traj_id").get<std::size_t>();
        if (!rec.at("seed_user").is_null()) traj.seed_user = rec.at("seed_user").get<UserId>();
        traj.rng_key = rec.at("rng_key").get<std::uint64_t>();
        traj.model_id = rec.at("model_id").get<std::string>();
        traj.user_model = rec.at("user_model").get<std::string>();
        out.push_back(std::move(traj));
      } else if (kind == "step") {
        if (out.empty() || out.back().id != rec.at("traj_id").get<std::size_t>()) {
          throw ParseError(line_no, "step record without a preceding trajectory record");
        }
        InteractionStep step;
        step.slate = rec.at("slate").get<std::vector<ItemId>>();
        step.choice = rec.at("choice").get<ItemId>();
        step.rating = rec.at("rating").get<double>();
        step.scale = rec.at("scale").get<std::string>() == "dataset" ? RatingScale::dataset
                                                                     : RatingScale::feedback;
        auto& traj = out.back();
        (rec.at("phase").get<std::string>() == "seed" ? traj.seed : traj.steps).push_back(std::move(step));
      } else {
        throw ParseError(line_no, "unknown record type '" + kind + "'");
      }
    } catch (const json::exception& e) {
      throw ParseError(line_no, e.what());
    }
  }
  if (!header) throw ParseError(line_no, "missing trajectory log header");
  return out;
}

}  // namespace recsim

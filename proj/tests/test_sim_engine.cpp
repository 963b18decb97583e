#include <doctest.h>

#include <memory>
#include <sstream>
#include <unordered_set>

#include "recsim/errors.hpp"
#include "recsim/mf_recommender.hpp"
#include "recsim/rnn_recommender.hpp"
#include "recsim/sim_engine.hpp"
#include "support.hpp"

using namespace recsim;

namespace {

MfModel zero_mf(std::size_t items) {
  MfModel m;
  m.dim = 2;
  m.lambda = 0.1;
  m.global_mean = 3.0;
  for (std::size_t i = 0; i < items; ++i) m.item_ids.push_back(static_cast<ItemId>(i + 1));
  m.item_factors = RowMatrix::Zero(static_cast<Eigen::Index>(items), 2);
  return m;
}

PopularityAttribute flat_attribute(std::size_t items, double value = 1.0) {
  std::vector<ItemId> ids;
  for (std::size_t i = 0; i < items; ++i) ids.push_back(static_cast<ItemId>(i + 1));
  return PopularityAttribute(PopularityMode::raw_count, ids, std::vector<double>(items, value));
}

UserModel lazy_user() { return UserModel{ChoiceModel::lazy(), FeedbackModel::positive()}; }

const std::vector<SeedStep> kSeedOne{{1, 1.0, RatingScale::feedback}};

struct Fixture {
  Dataset data = testing::power_law_dataset();
  PopularityAttribute attribute = compute_popularity(data, PopularityMode::raw_count);
  MfRecommender mf{std::make_shared<const MfModel>(train_mf(data, {.dim = 8, .lambda = 0.1, .epochs = 4, .seed = 1}))};
  RnnRecommender rnn{std::make_shared<const RnnModel>(
      train_rnn(data, {.hidden = 8, .dim = 8, .lambda = 1e-4, .learning_rate = 0.01, .epochs = 1, .seed = 1}))};
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void check_invariants(const Trajectory& traj, std::size_t steps, std::size_t k) {
  REQUIRE(traj.steps.size() == steps);
  std::unordered_set<ItemId> seen;
  for (const auto& s : traj.seed) REQUIRE(seen.insert(s.choice).second);
  for (const auto& step : traj.steps) {
    CHECK(step.slate.size() == k);
    std::unordered_set<ItemId> distinct(step.slate.begin(), step.slate.end());
    CHECK(distinct.size() == k);
    for (ItemId item : step.slate) CHECK_FALSE(seen.contains(item));
    CHECK(distinct.contains(step.choice));
    CHECK(seen.insert(step.choice).second);
  }
}

}  // namespace

TEST_CASE("zero user vector with a lazy user takes the tie-break item") {
  const MfRecommender rec(std::make_shared<const MfModel>(zero_mf(6)));
  const auto traj = simulate(rec, lazy_user(), flat_attribute(6), kSeedOne, 1, 3, Rng(1));
  REQUIRE(traj.steps.size() == 1);
  CHECK(traj.steps[0].slate == std::vector<ItemId>{2, 3, 4});
  CHECK(traj.steps[0].choice == 2);
}

TEST_CASE("candidate exhaustion keeps the completed prefix") {
  const MfRecommender rec(std::make_shared<const MfModel>(zero_mf(5)));
  const auto attr = flat_attribute(5);

  SUBCASE("slates of one consume every remaining item, then fail") {
    const auto traj = simulate(rec, lazy_user(), attr, kSeedOne, 4, 1, Rng(1));
    std::vector<ItemId> chosen;
    for (const auto& s : traj.steps) chosen.push_back(s.choice);
    CHECK(chosen == std::vector<ItemId>{2, 3, 4, 5});
    try {
      simulate(rec, lazy_user(), attr, kSeedOne, 5, 1, Rng(1));
      FAIL("expected exhaustion");
    } catch (const SimulationError& e) {
      CHECK(e.candidates_exhausted());
      CHECK(e.step() == 5);
      CHECK(e.partial().steps.size() == 4);
    }
  }
  SUBCASE("slates of two run out at step four") {
    try {
      simulate(rec, lazy_user(), attr, kSeedOne, 4, 2, Rng(1));
      FAIL("expected exhaustion");
    } catch (const SimulationError& e) {
      CHECK(e.candidates_exhausted());
      CHECK(e.step() == 4);
      REQUIRE(e.partial().steps.size() == 3);
      CHECK(e.partial().steps[2].choice == 4);
    }
  }
}

TEST_CASE("model errors carry the step index") {
  const MfRecommender rec(std::make_shared<const MfModel>(zero_mf(5)));
  const std::vector<SeedStep> unknown{{42, 1.0, RatingScale::feedback}};
  try {
    simulate(rec, lazy_user(), flat_attribute(5), unknown, 2, 1, Rng(1));
    FAIL("expected a failure");
  } catch (const SimulationError& e) {
    CHECK(e.step() == 0);
    CHECK_FALSE(e.candidates_exhausted());
  }
  CHECK_THROWS_AS(simulate(rec, lazy_user(), flat_attribute(4), kSeedOne, 1, 1, Rng(1)), ConfigError);
}

TEST_CASE("simulation is deterministic") {
  const auto& f = fixture();
  const UserModel user{ChoiceModel::uniform(), FeedbackModel::positive()};
  Rng rng(9);
  const auto seed = make_seed(SeedStrategy::real_history(f.data.users()[3]), f.data, rng);
  const auto a = simulate(f.mf, user, f.attribute, seed, 20, 10, Rng::split(5, 1));
  const auto b = simulate(f.mf, user, f.attribute, seed, 20, 10, Rng::split(5, 1));
  CHECK(a == b);
  check_invariants(a, 20, 10);
}

TEST_CASE("invariants over a power-law batch") {
  const auto& f = fixture();
  const auto attr = std::make_shared<const PopularityAttribute>(f.attribute);
  const std::vector<UserModel> users{
      {ChoiceModel::uniform(), FeedbackModel::positive()},
      {ChoiceModel::ranked(), FeedbackModel::beta_preference(-1, 50)},
      {ChoiceModel::alpha_preference(5.0, attr), FeedbackModel::beta_preference(1, 50)},
  };
  for (const Recommender* rec : {static_cast<const Recommender*>(&f.mf), static_cast<const Recommender*>(&f.rnn)}) {
    const auto before = rec->parameter_hash();
    for (const auto& user : users) {
      BatchSettings s{.seed = testing::own_history(), .num_users = 500, .steps = 12,
                      .slate_size = 10, .master_seed = 3, .threads = 1};
      const auto serial = simulate_batch(*rec, user, f.attribute, f.data, s);
      REQUIRE(serial.complete());
      for (const auto& t : serial.trajectories) check_invariants(t, 12, 10);
      s.threads = 8;
      const auto parallel = simulate_batch(*rec, user, f.attribute, f.data, s);
      CHECK(parallel.trajectories == serial.trajectories);
    }
    CHECK(rec->parameter_hash() == before);
  }
}

TEST_CASE("batch of one equals a direct simulation") {
  const auto& f = fixture();
  const UserModel user{ChoiceModel::uniform(), FeedbackModel::positive()};
  const BatchSettings s{.seed = SeedStrategy::random_single(), .num_users = 1, .steps = 15, .slate_size = 5,
                        .master_seed = 77};
  const auto batch = simulate_batch(f.mf, user, f.attribute, f.data, s);
  REQUIRE(batch.trajectories.size() == 1);
  Rng rng = Rng::split(77, 0);
  const auto seed = make_seed(SeedStrategy::random_single(), f.data, rng);
  CHECK(batch.trajectories[0] == simulate(f.mf, user, f.attribute, seed, 15, 5, rng, 0));
}

TEST_CASE("real-history batches cover every user once") {
  const auto& f = fixture();
  const UserModel user{ChoiceModel::uniform(), FeedbackModel::positive()};
  const BatchSettings s{.seed = testing::own_history(), .num_users = f.data.num_users(),
                        .steps = 2, .slate_size = 3, .master_seed = 1};
  const auto batch = simulate_batch(f.mf, user, f.attribute, f.data, s);
  REQUIRE(batch.trajectories.size() == f.data.num_users());
  for (std::size_t i = 0; i < batch.trajectories.size(); ++i) {
    CHECK(batch.trajectories[i].seed_user == f.data.users()[i]);
    CHECK(batch.trajectories[i].seed.size() == f.data.history(i).size());
  }
  const auto sample = select_seed_users(f.data, 50, 4);
  CHECK(sample.size() == 50);
  CHECK(std::is_sorted(sample.begin(), sample.end()));
  CHECK(std::adjacent_find(sample.begin(), sample.end()) == sample.end());
  CHECK_THROWS_AS(select_seed_users(f.data, f.data.num_users() + 1, 4), ConfigError);
}

TEST_CASE("failed trajectories are collected, not fatal") {
  const MfRecommender rec(std::make_shared<const MfModel>(zero_mf(5)));
  std::vector<Interaction> recs;
  for (ItemId i = 1; i <= 5; ++i) recs.push_back({1, i, 3.0, i});
  const auto d = Dataset::from_interactions(recs);
  const BatchSettings s{.seed = SeedStrategy::random_single(), .num_users = 3, .steps = 4, .slate_size = 2};
  const auto batch = simulate_batch(rec, lazy_user(), flat_attribute(5), d, s);
  CHECK_FALSE(batch.complete());
  REQUIRE(batch.failures.size() == 3);
  CHECK(batch.failures[0].step == 4);
  CHECK(batch.failures[0].partial.steps.size() == 3);
}

TEST_CASE("feedback steers the user representation") {
  // Fully observed rank-1 ratings; every item has the same popularity, so
  // beta = +1 rewards every choice and beta = -1 punishes every choice.
  std::vector<Interaction> recs;
  for (int u = 0; u < 30; ++u) {
    for (int i = 0; i < 40; ++i) {
      const double a = -1.0 + 2.0 * u / 29.0, b = -1.0 + 2.0 * ((i * 7) % 40) / 39.0;
      recs.push_back({u + 1, i + 1, 3.0 + 1.5 * a * b, 1});
    }
  }
  const auto d = Dataset::from_interactions(recs);
  const MfRecommender rec(std::make_shared<const MfModel>(train_mf(d, {.dim = 2, .lambda = 0.1, .epochs = 10})));
  const auto attr = compute_popularity(d, PopularityMode::raw_count);
  const UserModel plus{ChoiceModel::uniform(), FeedbackModel::beta_preference(1, 10)};
  const UserModel minus{ChoiceModel::uniform(), FeedbackModel::beta_preference(-1, 10)};
  Rng rng(0);
  const auto seed = make_seed(SeedStrategy::real_history(5, 3), d, rng);
  const auto a = simulate(rec, plus, attr, seed, 10, 5, Rng(42));
  const auto b = simulate(rec, minus, attr, seed, 10, 5, Rng(42));
  std::vector<ItemId> ca, cb;
  for (const auto& s : a.steps) ca.push_back(s.choice);
  for (const auto& s : b.steps) cb.push_back(s.choice);
  CHECK(ca != cb);
}

TEST_CASE("trajectory log round-trips") {
  const auto& f = fixture();
  const UserModel user{ChoiceModel::ranked(), FeedbackModel::beta_preference(1, 40)};
  const BatchSettings s{.seed = testing::own_history(), .num_users = 7, .steps = 6,
                        .slate_size = 4, .master_seed = 5};
  const auto batch = simulate_batch(f.mf, user, f.attribute, f.data, s);
  std::stringstream log;
  write_trajectory_log(log, batch.trajectories, f.attribute);
  CHECK(read_trajectory_log(log) == batch.trajectories);

  std::istringstream bad("{\"schema\":\"other\",\"version\":1}\n");
  CHECK_THROWS_AS(read_trajectory_log(bad), ParseError);
  std::istringstream orphan(
      "{\"schema\":\"recsim.trajectory_log\",\"version\":1}\n{\"record\":\"step\",\"traj_id\":0}\n");
  CHECK_THROWS_AS(read_trajectory_log(orphan), ParseError);
}

TEST_CASE("user model descriptions") {
  CHECK(describe(lazy_user()) == "choice=lazy;feedback=positive");
  const UserModel u{ChoiceModel::uniform(), FeedbackModel::beta_preference(-1, 1000)};
  CHECK(describe(u) == "choice=uniform;feedback=beta_preference(beta=-1,rho0=1000)");
}

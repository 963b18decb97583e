#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "recsim/dataset.hpp"
#include "recsim/errors.hpp"
#include "recsim/recommender.hpp"
#include "recsim/rng.hpp"
#include "recsim/user_models.hpp"

namespace recsim {

/// One (slate, choice, rating) interaction. Seed steps carry an empty slate.
struct InteractionStep {
  std::vector<ItemId> slate;
  ItemId choice = 0;
  double rating = 0.0;
  RatingScale scale = RatingScale::feedback;

  friend bool operator==(const InteractionStep&, const InteractionStep&) = default;
};

struct Trajectory {
  std::size_t id = 0;
  std::optional<UserId> seed_user;
  std::vector<InteractionStep> seed;
  std::vector<InteractionStep> steps;
  std::uint64_t rng_key = 0;
  std::string model_id;
  std::string user_model;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// A trajectory stopped early. `step` is the 1-based step that failed (0 for
/// seeding); `partial()` holds every completed step.
class SimulationError : public Error {
 public:
  SimulationError(std::size_t step, bool exhausted, const std::string& what, Trajectory partial)
      : Error("step " + std::to_string(step) + ": " + what),
        step_(step),
        exhausted_(exhausted),
        partial_(std::move(partial)) {}

  std::size_t step() const noexcept { return step_; }
  bool candidates_exhausted() const noexcept { return exhausted_; }
  const Trajectory& partial() const noexcept { return partial_; }

 private:
  std::size_t step_;
  bool exhausted_;
  Trajectory partial_;
};

std::string describe(const UserModel& model);
/// "<kind>:<parameter hash in hex>".
std::string model_id(const Recommender& recommender);

/// Runs the closed loop for `steps` steps with slates of `slate_size`. The
/// recommender only sees items never chosen in the seed or earlier steps.
/// `attribute` must share the recommender's vocabulary.
Trajectory simulate(const Recommender& recommender, const UserModel& user,
                    const PopularityAttribute& attribute, std::span<const SeedStep> seed,
                    std::size_t steps, std::size_t slate_size, Rng rng, std::size_t id = 0);

struct BatchSettings {
  SeedStrategy seed;
  std::size_t num_users = 1;
  std::size_t steps = 150;
  std::size_t slate_size = 10;
  std::uint64_t master_seed = 0;
  std::size_t threads = 1;
};

struct TrajectoryFailure {
  std::size_t id = 0;
  std::size_t step = 0;
  std::string message;
  Trajectory partial;
};

struct BatchResult {
  std::vector<Trajectory> trajectories;  // completed, ascending id
  std::vector<TrajectoryFailure> failures;

  bool complete() const noexcept { return failures.empty(); }
};

/// Seed users for a real-history batch: all users when `count` equals the
/// user count, otherwise a sample drawn from `master_seed`, ascending.
std::vector<UserId> select_seed_users(const Dataset& dataset, std::size_t count,
                                      std::uint64_t master_seed);

/// Trajectory i draws everything from Rng::split(master_seed, i), so the
/// result does not depend on the number of threads.
BatchResult simulate_batch(const Recommender& recommender, const UserModel& user,
                           const PopularityAttribute& attribute, const Dataset& dataset,
                           const BatchSettings& settings);

inline constexpr int kTrajectoryLogVersion = 1;

/// JSON lines: a schema header, then per trajectory one "trajectory" record
/// followed by one "step" record per seed and simulated step.
void write_trajectory_log(std::ostream& out, std::span<const Trajectory> trajectories,
                          const PopularityAttribute& attribute);
std::vector<Trajectory> read_trajectory_log(std::istream& in);

}  // namespace recsim

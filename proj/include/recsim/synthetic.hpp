#pragma once

#include <cstddef>
#include <cstdint>

#include "recsim/dataset.hpp"

namespace recsim {

/// Generator for MovieLens-shaped rating logs: Zipf item popularity,
/// Pareto history lengths, latent tastes, and item quality that rises with
/// popularity.
struct SyntheticConfig {
  std::size_t num_users = 500;
  std::size_t num_items = 800;
  double popularity_exponent = 1.0;   // Zipf exponent of item draw weights
  double popularity_offset = 10.0;    // flattens the head of the Zipf curve
  std::size_t min_history = 20;
  std::size_t max_history = 400;
  double history_exponent = 1.15;     // Pareto tail index of history lengths
  std::size_t latent_dim = 8;
  double taste_strength = 1.0;        // how much tastes steer item selection
  double quality_spread = 0.45;       // stddev of item quality offsets
  double quality_popularity_corr = 0.6;
  double taste_rating_scale = 0.6;
  double noise = 0.7;
  double base_rating = 3.6;
  std::uint64_t seed = 1;

  /// Roughly the shape of MovieLens 1M: 6040 users, 3952 items, ~1M ratings.
  static SyntheticConfig movielens_like(std::uint64_t seed = 1);
  /// Small power-law dataset for fast tests.
  static SyntheticConfig small(std::size_t users, std::size_t items, std::uint64_t seed = 1);
};

Dataset generate_synthetic(const SyntheticConfig& config);

}  // namespace recsim

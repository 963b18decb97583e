#include "recsim/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "recsim/errors.hpp"
#include "recsim/rng.hpp"

namespace recsim {

namespace {

double normal(Rng& rng) {
  // Box-Muller; one draw per call keeps the stream layout simple.
  double u1 = rng.uniform();
  while (u1 <= 0.0) u1 = rng.uniform();
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace

SyntheticConfig SyntheticConfig::movielens_like(std::uint64_t seed) {
  SyntheticConfig c;
  c.num_users = 6040;
  c.num_items = 3952;
  c.popularity_exponent = 1.2;
  c.popularity_offset = 15.0;
  c.base_rating = 3.0;
  c.min_history = 20;
  c.max_history = 2314;
  c.history_exponent = 0.82;
  c.seed = seed;
  return c;
}

SyntheticConfig SyntheticConfig::small(std::size_t users, std::size_t items, std::uint64_t seed) {
  SyntheticConfig c;
  c.num_users = users;
  c.num_items = items;
  c.max_history = std::max<std::size_t>(c.min_history, items / 3);
  c.seed = seed;
  return c;
}

Dataset generate_synthetic(const SyntheticConfig& c) {
  if (c.num_users == 0 || c.num_items == 0) throw ConfigError("synthetic dataset needs users and items");
  if (c.min_history > c.num_items) throw ConfigError("min_history exceeds the number of items");
  Rng rng(c.seed);
  const auto dim = std::max<std::size_t>(c.latent_dim, 1);
  const double taste_norm = 1.0 / std::sqrt(static_cast<double>(dim));

  // Popularity rank is a random permutation of item ids.
  std::vector<std::size_t> rank(c.num_items);
  std::iota(rank.begin(), rank.end(), 0);
  for (std::size_t i = rank.size(); i > 1; --i) std::swap(rank[i - 1], rank[rng.below(i)]);

  std::vector<double> log_weight(c.num_items);
  for (std::size_t j = 0; j < c.num_items; ++j) {
    log_weight[j] = -c.popularity_exponent * std::log(static_cast<double>(rank[j]) + c.popularity_offset);
  }
  const double lw_mean = std::accumulate(log_weight.begin(), log_weight.end(), 0.0) /
                         static_cast<double>(c.num_items);
  double lw_var = 0.0;
  for (double lw : log_weight) lw_var += (lw - lw_mean) * (lw - lw_mean);
  const double lw_sd = std::sqrt(lw_var / static_cast<double>(c.num_items)) + 1e-12;

  std::vector<double> item_factors(c.num_items * dim);
  std::vector<double> quality(c.num_items);
  const double rho = std::clamp(c.quality_popularity_corr, -1.0, 1.0);
  for (std::size_t j = 0; j < c.num_items; ++j) {
    for (std::size_t f = 0; f < dim; ++f) item_factors[j * dim + f] = normal(rng) * taste_norm;
    const double z = (log_weight[j] - lw_mean) / lw_sd;
    quality[j] = c.quality_spread * (rho * z + std::sqrt(1.0 - rho * rho) * normal(rng));
  }

  std::vector<Interaction> records;
  std::vector<double> user_factor(dim);
  std::vector<std::pair<double, std::size_t>> keys(c.num_items);
  const std::int64_t epoch = 956703932;
  for (std::size_t u = 0; u < c.num_users; ++u) {
    for (auto& f : user_factor) f = normal(rng) * taste_norm;
    double draw = rng.uniform();
    while (draw <= 0.0) draw = rng.uniform();
    auto length = static_cast<std::size_t>(
        static_cast<double>(c.min_history) * std::pow(draw, -1.0 / c.history_exponent));
    length = std::clamp(length, c.min_history, std::min(c.max_history, c.num_items));

    // Weighted sampling without replacement via exponential race keys.
    for (std::size_t j = 0; j < c.num_items; ++j) {
      double affinity = 0.0;
      for (std::size_t f = 0; f < dim; ++f) affinity += user_factor[f] * item_factors[j * dim + f];
      double e = rng.uniform();
      while (e <= 0.0) e = rng.uniform();
      const double log_w = log_weight[j] + c.taste_strength * affinity * std::sqrt(static_cast<double>(dim));
      keys[j] = {std::log(-std::log(e)) - log_w, j};
    }
    std::nth_element(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(length - 1), keys.end());
    std::sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(length));
    // Consumption order is independent of draw order.
    for (std::size_t n = length; n > 1; --n) std::swap(keys[n - 1], keys[rng.below(n)]);

    std::int64_t t = epoch + static_cast<std::int64_t>(rng.below(90'000'000));
    for (std::size_t n = 0; n < length; ++n) {
      const auto j = keys[n].second;
      double affinity = 0.0;
      for (std::size_t f = 0; f < dim; ++f) affinity += user_factor[f] * item_factors[j * dim + f];
      const double latent = c.base_rating + quality[j] +
                            c.taste_rating_scale * affinity * std::sqrt(static_cast<double>(dim)) +
                            c.noise * normal(rng);
      Interaction rec;
      rec.user = static_cast<UserId>(u + 1);
      rec.item = static_cast<ItemId>(j + 1);
      rec.rating = std::clamp(std::round(latent), 1.0, 5.0);
      t += 1 + static_cast<std::int64_t>(rng.below(3600));
      rec.timestamp = t;
      records.push_back(rec);
    }
  }
  return Dataset::from_interactions(std::move(records));
}

}  // namespace recsim

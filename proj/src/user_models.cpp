#include "recsim/user_models.hpp"

#include <algorithm>
#include <cmath>

#include "recsim/errors.hpp"

namespace recsim {

std::string_view to_string(ChoiceVariant v) {
  switch (v) {
    case ChoiceVariant::lazy: return "lazy";
    case ChoiceVariant::uniform: return "uniform";
    case ChoiceVariant::ranked: return "ranked";
    case ChoiceVariant::alpha_preference: return "alpha_preference";
  }
  return "unknown";
}

std::string_view to_string(FeedbackVariant v) {
  return v == FeedbackVariant::positive ? "positive" : "beta_preference";
}

std::string_view to_string(SeedVariant v) {
  return v == SeedVariant::random_single ? "random_single" : "real_history";
}

ChoiceVariant parse_choice_variant(std::string_view name) {
  if (name == "lazy") return ChoiceVariant::lazy;
  if (name == "uniform") return ChoiceVariant::uniform;
  if (name == "ranked") return ChoiceVariant::ranked;
  if (name == "alpha_preference" || name == "alpha") return ChoiceVariant::alpha_preference;
  throw ConfigError("unknown choice model '" + std::string(name) +
                    "' (expected lazy, uniform, ranked or alpha_preference)");
}

FeedbackVariant parse_feedback_variant(std::string_view name) {
  if (name == "positive") return FeedbackVariant::positive;
  if (name == "beta_preference" || name == "beta") return FeedbackVariant::beta_preference;
  throw ConfigError("unknown feedback model '" + std::string(name) +
                    "' (expected positive or beta_preference)");
}

SeedVariant parse_seed_variant(std::string_view name) {
  if (name == "random_single" || name == "random") return SeedVariant::random_single;
  if (name == "real_history" || name == "real") return SeedVariant::real_history;
  throw ConfigError("unknown seed strategy '" + std::string(name) +
                    "' (expected random_single or real_history)");
}

ChoiceModel ChoiceModel::lazy() { return {ChoiceVariant::lazy, 0.0, nullptr}; }
ChoiceModel ChoiceModel::uniform() { return {ChoiceVariant::uniform, 0.0, nullptr}; }
ChoiceModel ChoiceModel::ranked() { return {ChoiceVariant::ranked, 0.0, nullptr}; }

ChoiceModel ChoiceModel::alpha_preference(double alpha,
                                          std::shared_ptr<const PopularityAttribute> attribute) {
  if (!std::isfinite(alpha)) throw ConfigError("alpha must be finite");
  if (!attribute) throw ConfigError("alpha_preference needs an item attribute");
  return {ChoiceVariant::alpha_preference, alpha, std::move(attribute)};
}

std::vector<double> ChoiceModel::probabilities(std::span<const ItemIndex> slate) const {
  if (slate.empty()) throw ModelError("cannot choose from an empty slate");
  const std::size_t k = slate.size();
  std::vector<double> p(k, 0.0);
  switch (variant_) {
    case ChoiceVariant::lazy:
      p[0] = 1.0;
      return p;
    case ChoiceVariant::uniform:
      std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(k));
      return p;
    case ChoiceVariant::ranked:
      for (std::size_t r = 0; r < k; ++r) p[r] = 1.0 / std::log(static_cast<double>(r) + 2.0);
      break;
    case ChoiceVariant::alpha_preference: {
      for (std::size_t r = 0; r < k; ++r) p[r] = alpha_ * attribute_->normalized(slate[r]);
      const double top = *std::max_element(p.begin(), p.end());
      for (auto& x : p) x = std::exp(x - top);
      break;
    }
  }
  double total = 0.0;
  for (double x : p) total += x;
  for (auto& x : p) x /= total;
  return p;
}

std::size_t choose(const ChoiceModel& model, std::span<const ItemIndex> slate, Rng& rng) {
  const auto p = model.probabilities(slate);
  // Exactly one uniform per choice, whatever the variant.
  const double u = rng.uniform();
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    cumulative += p[i];
    last_positive = i;
    if (u < cumulative) return i;
  }
  return last_positive;
}

FeedbackModel FeedbackModel::beta_preference(int beta, double rho0) {
  FeedbackModel f{FeedbackVariant::beta_preference, beta, rho0};
  f.validate();
  return f;
}

void FeedbackModel::validate() const {
  if (beta != 1 && beta != -1) throw ConfigError("beta must be +1 or -1");
  if (!std::isfinite(rho0)) throw ConfigError("rho0 must be finite");
}

double feedback(const FeedbackModel& model, ItemIndex item, const PopularityAttribute& attribute) {
  if (model.variant == FeedbackVariant::positive) return 1.0;
  if (item >= attribute.size()) throw ModelError("item has no attribute value");
  return attribute[item] >= model.rho0 ? model.beta : -model.beta;
}

SeedStrategy SeedStrategy::real_history(UserId user, std::optional<std::size_t> prefix) {
  return {SeedVariant::real_history, user, prefix};
}

std::vector<SeedStep> make_seed(const SeedStrategy& strategy, const Dataset& dataset, Rng& rng) {
  if (dataset.empty()) throw DatasetError("cannot seed from an empty dataset");
  std::vector<SeedStep> seed;
  if (strategy.variant == SeedVariant::random_single) {
    const auto idx = static_cast<ItemIndex>(rng.below(dataset.num_items()));
    seed.push_back({dataset.item_id(idx), 1.0, RatingScale::feedback});
    return seed;
  }
  if (!strategy.user) throw ConfigError("real_history seed needs a user id");
  const auto u = dataset.user_index(*strategy.user);
  if (!u) throw DatasetError("seed user " + std::to_string(*strategy.user) + " is not in the dataset");
  auto hist = dataset.history(*u);
  if (strategy.prefix) {
    if (*strategy.prefix == 0) throw ConfigError("seed prefix must be at least 1");
    hist = hist.first(std::min(*strategy.prefix, hist.size()));
  }
  for (const auto& rec : hist) seed.push_back({rec.item, rec.rating, RatingScale::dataset});
  return seed;
}

}  // namespace recsim

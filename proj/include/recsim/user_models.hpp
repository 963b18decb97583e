#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "recsim/dataset.hpp"
#include "recsim/rng.hpp"
#include "recsim/types.hpp"

namespace recsim {

enum class ChoiceVariant { lazy, uniform, ranked, alpha_preference };
enum class FeedbackVariant { positive, beta_preference };
enum class SeedVariant { random_single, real_history };

std::string_view to_string(ChoiceVariant v);
std::string_view to_string(FeedbackVariant v);
std::string_view to_string(SeedVariant v);
ChoiceVariant parse_choice_variant(std::string_view name);
FeedbackVariant parse_feedback_variant(std::string_view name);
SeedVariant parse_seed_variant(std::string_view name);

/// How a test user picks one item from a slate.
class ChoiceModel {
 public:
  static ChoiceModel lazy();
  static ChoiceModel uniform();
  static ChoiceModel ranked();
  /// Softmax over alpha * normalized attribute.
  static ChoiceModel alpha_preference(double alpha,
                                      std::shared_ptr<const PopularityAttribute> attribute);

  ChoiceVariant variant() const noexcept { return variant_; }
  double alpha() const noexcept { return alpha_; }
  const PopularityAttribute* attribute() const noexcept { return attribute_.get(); }

  /// Selection probability of each slate position; sums to one.
  std::vector<double> probabilities(std::span<const ItemIndex> slate) const;

 private:
  ChoiceModel(ChoiceVariant v, double alpha, std::shared_ptr<const PopularityAttribute> attribute)
      : variant_(v), alpha_(alpha), attribute_(std::move(attribute)) {}

  ChoiceVariant variant_;
  double alpha_;
  std::shared_ptr<const PopularityAttribute> attribute_;
};

/// Draws a slate position. Throws ModelError on an empty slate.
std::size_t choose(const ChoiceModel& model, std::span<const ItemIndex> slate, Rng& rng);

/// How a test user rates a chosen item: always +1, or beta when the item's
/// attribute is at least rho0 and -beta otherwise.
struct FeedbackModel {
  FeedbackVariant variant = FeedbackVariant::positive;
  int beta = 1;
  double rho0 = 0.0;

  static FeedbackModel positive() { return {}; }
  static FeedbackModel beta_preference(int beta, double rho0);
  void validate() const;
};

double feedback(const FeedbackModel& model, ItemIndex item, const PopularityAttribute& attribute);

struct UserModel {
  ChoiceModel choice = ChoiceModel::uniform();
  FeedbackModel feedback;
};

struct SeedStrategy {
  SeedVariant variant = SeedVariant::random_single;
  std::optional<UserId> user;           // real_history
  std::optional<std::size_t> prefix;    // real_history: keep the n earliest

  static SeedStrategy random_single() { return {}; }
  static SeedStrategy real_history(UserId user, std::optional<std::size_t> prefix = std::nullopt);
};

/// One seed interaction. `slate` is empty for seeds (no slate was shown).
struct SeedStep {
  ItemId item = 0;
  double rating = 0.0;
  RatingScale scale = RatingScale::feedback;
};

/// random_single: one uniformly drawn item rated +1 on the feedback scale.
/// real_history: the user's dataset interactions in timestamp order.
std::vector<SeedStep> make_seed(const SeedStrategy& strategy, const Dataset& dataset, Rng& rng);

}  // namespace recsim

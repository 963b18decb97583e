#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <unordered_set>
#include <vector>

#include "recsim/dataset.hpp"
#include "recsim/recommender.hpp"
#include "recsim/types.hpp"

namespace recsim {

struct MfConfig {
  std::size_t dim = 32;
  double lambda = 0.1;
  std::size_t epochs = 10;  // ALS sweeps
  std::uint64_t seed = 0;   // initializes Q only
};

/// Matrix factorization snapshot. Rows of `item_factors` follow `item_ids`
/// (ascending); `user_factors` is kept only when the model came from training.
struct MfModel {
  std::size_t dim = 0;
  double lambda = 0.0;
  double global_mean = 0.0;
  std::vector<ItemId> item_ids;
  RowMatrix item_factors;
  std::vector<UserId> user_ids;
  RowMatrix user_factors;

  std::optional<ItemIndex> index_of(ItemId item) const;
  /// Throws ModelError when shapes disagree or an entry is not finite.
  void validate() const;

  friend bool operator==(const MfModel&, const MfModel&);
};

struct MfTrainingTrace {
  std::vector<double> objective;  // after each sweep
};

/// Alternating least squares on mean-centered ratings with squared Frobenius
/// regularization. Each sweep solves every user row, then every item row.
MfModel train_mf(const Dataset& dataset, const MfConfig& config, MfTrainingTrace* trace = nullptr);

/// Sum of squared centered residuals plus lambda * (|P|^2 + |Q|^2).
double mf_objective(const MfModel& model, const Dataset& dataset);

struct RatedItem {
  ItemId item = 0;
  double rating = 0.0;  // dataset scale; centered internally
};

/// Accumulates the regularized normal equations of a fold-in one rated item
/// at a time, in the order given.
class FoldInSolver {
 public:
  explicit FoldInSolver(const MfModel& model);

  void add(ItemIndex item, double centered_rating);
  std::size_t size() const noexcept { return count_; }
  /// Minimum-norm solution when lambda is zero and the system is singular.
  Vector solve() const;

 private:
  const MfModel* model_;
  Matrix gram_;
  Vector rhs_;
  std::size_t count_ = 0;
};

/// argmin_p sum (p.q_v - (r_v - global_mean))^2 + lambda |p|^2.
Vector fold_in(const MfModel& model, std::span<const RatedItem> seen);

std::vector<ItemId> recommend_mf(const MfModel& model, const Vector& user,
                                 const std::unordered_set<ItemId>& excluded, std::size_t k);

class MfRecommender final : public Recommender {
 public:
  explicit MfRecommender(std::shared_ptr<const MfModel> model);

  std::string_view kind() const override { return "mf"; }
  std::span<const ItemId> item_ids() const override { return model_->item_ids; }
  const RowMatrix& item_embeddings() const override { return model_->item_factors; }
  std::unique_ptr<UserSession> start_session() const override;
  std::uint64_t parameter_hash() const override;

  const MfModel& model() const noexcept { return *model_; }

 private:
  std::shared_ptr<const MfModel> model_;
};

}  // namespace recsim

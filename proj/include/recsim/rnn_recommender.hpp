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

struct RnnConfig {
  std::size_t hidden = 32;
  std::size_t dim = 32;
  double lambda = 1e-4;
  double learning_rate = 0.01;
  std::size_t epochs = 10;
  std::size_t max_length = 50;  // most recent interactions kept per user
  std::size_t batch_size = 32;  // users per mini-batch
  std::uint64_t seed = 0;
};

/// Single-layer tanh recurrence over item embeddings with a linear readout:
///   h_t = tanh(W_in q_{c_t} + W_rec h_{t-1} + b),  h_0 = 0
///   p   = W_out h_T
struct RnnModel {
  std::size_t hidden = 0;
  std::size_t dim = 0;
  double lambda = 0.0;
  double global_mean = 0.0;
  std::vector<ItemId> item_ids;
  RowMatrix item_embeddings;  // items x dim
  Matrix input_weights;       // hidden x dim
  Matrix recurrent_weights;   // hidden x hidden
  Vector bias;                // hidden
  Matrix output_weights;      // dim x hidden

  std::optional<ItemIndex> index_of(ItemId item) const;
  void validate() const;

  /// One recurrence step from `state` after consuming `item`.
  Vector step(const Vector& state, ItemIndex item) const;
  Vector readout(const Vector& state) const { return output_weights * state; }

  /// Randomly initialized model over `item_ids`.
  static RnnModel initialize(std::vector<ItemId> item_ids, std::size_t hidden, std::size_t dim,
                             std::uint64_t seed);

  friend bool operator==(const RnnModel&, const RnnModel&);
};

/// One training sequence: items in consumption order with their centered
/// ratings. Position t >= 1 is predicted from items [0, t).
struct RnnSequence {
  std::vector<ItemIndex> items;
  std::vector<double> targets;
};

/// Gradient with the same layout as the model parameters.
struct RnnGradient {
  RowMatrix item_embeddings;
  Matrix input_weights;
  Matrix recurrent_weights;
  Vector bias;
  Matrix output_weights;
};

/// Per-user sequences of the `max_length` most recent interactions; users
/// with fewer than two interactions are skipped.
std::vector<RnnSequence> rnn_sequences(const Dataset& dataset, const RnnModel& model,
                                       std::size_t max_length);

/// Mean squared prediction error over every predicted position plus
/// lambda * |theta, Q|^2. Fills `gradient` with the exact derivative when
/// given.
double rnn_loss(const RnnModel& model, std::span<const RnnSequence> sequences,
                RnnGradient* gradient = nullptr);

/// Mean squared prediction error only.
double rnn_mse(const RnnModel& model, std::span<const RnnSequence> sequences);

struct RnnTrainingTrace {
  std::vector<double> epoch_mse;  // training-set MSE after each epoch
  double initial_mse = 0.0;
};

RnnModel train_rnn(const Dataset& dataset, const RnnConfig& config,
                   RnnTrainingTrace* trace = nullptr);

Vector rnn_forward(const RnnModel& model, std::span<const ItemId> sequence);

std::vector<ItemId> recommend_rnn(const RnnModel& model, std::span<const ItemId> trajectory,
                                  const std::unordered_set<ItemId>& excluded, std::size_t k);

class RnnRecommender final : public Recommender {
 public:
  explicit RnnRecommender(std::shared_ptr<const RnnModel> model);

  std::string_view kind() const override { return "rnn"; }
  std::span<const ItemId> item_ids() const override { return model_->item_ids; }
  const RowMatrix& item_embeddings() const override { return model_->item_embeddings; }
  /// Ratings are ignored; only the choice sequence drives the state.
  std::unique_ptr<UserSession> start_session() const override;
  std::uint64_t parameter_hash() const override;

  const RnnModel& model() const noexcept { return *model_; }

 private:
  std::shared_ptr<const RnnModel> model_;
};

}  // namespace recsim

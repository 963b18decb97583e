#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "recsim/types.hpp"

namespace recsim {

/// Indices of the `k` highest scores among entries whose `excluded` flag is
/// zero, best first. Equal scores are ordered by ascending index.
/// Throws CandidateShortfall if fewer than `k` entries are eligible.
std::vector<ItemIndex> top_k(std::span<const double> scores,
                             std::span<const std::uint8_t> excluded, std::size_t k);

/// Incremental user state. Each observed step refines the user vector; the
/// model parameters behind it never change.
class UserSession {
 public:
  virtual ~UserSession() = default;
  virtual void observe(ItemIndex item, double rating, RatingScale scale) = 0;
  /// Throws ModelError before the first observation.
  virtual Vector user_vector() const = 0;
};

/// A frozen recommender scoring items by the inner product of a user vector
/// with item embeddings.
class Recommender {
 public:
  virtual ~Recommender() = default;

  virtual std::string_view kind() const = 0;
  /// Ascending item ids; row i of `item_embeddings()` belongs to item_ids()[i].
  virtual std::span<const ItemId> item_ids() const = 0;
  virtual const RowMatrix& item_embeddings() const = 0;
  virtual std::unique_ptr<UserSession> start_session() const = 0;
  /// Hash over every parameter; used to prove the model stays frozen.
  virtual std::uint64_t parameter_hash() const = 0;

  std::size_t num_items() const { return item_ids().size(); }
  std::optional<ItemIndex> index_of(ItemId item) const;

  Vector scores(const Vector& user) const;
  std::vector<ItemIndex> recommend(const Vector& user, std::span<const std::uint8_t> excluded,
                                   std::size_t k) const;
  std::vector<ItemId> recommend(const Vector& user, const std::unordered_set<ItemId>& excluded,
                                std::size_t k) const;
};

/// FNV-1a over raw bytes, chainable through `seed`.
std::uint64_t hash_bytes(const void* data, std::size_t size,
                         std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace recsim

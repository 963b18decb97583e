#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "recsim/types.hpp"

namespace recsim {

struct Interaction {
  UserId user = 0;
  ItemId item = 0;
  double rating = 0.0;
  std::int64_t timestamp = 0;

  friend bool operator==(const Interaction&, const Interaction&) = default;
};

/// Immutable interaction log. Users and items are kept in ascending id order
/// and interactions are grouped per user in (timestamp, item) order.
class Dataset {
 public:
  Dataset() = default;

  /// Validates and indexes raw interactions. Repeated (user, item) pairs keep
  /// the record with the latest timestamp (first seen wins on a tie).
  static Dataset from_interactions(std::vector<Interaction> raw);

  std::size_t num_users() const noexcept { return users_.size(); }
  std::size_t num_items() const noexcept { return items_.size(); }
  std::size_t num_interactions() const noexcept { return interactions_.size(); }
  bool empty() const noexcept { return interactions_.empty(); }

  std::span<const UserId> users() const noexcept { return users_; }
  std::span<const ItemId> items() const noexcept { return items_; }
  std::span<const Interaction> interactions() const noexcept { return interactions_; }

  std::optional<std::size_t> user_index(UserId user) const;
  std::optional<ItemIndex> item_index(ItemId item) const;
  ItemId item_id(ItemIndex index) const { return items_.at(index); }

  /// Timestamp-ordered history of the user at `user_index`.
  std::span<const Interaction> history(std::size_t user_index) const;
  /// Item indices parallel to `history(user_index)`.
  std::span<const ItemIndex> history_items(std::size_t user_index) const;

  /// Interaction count per item, by item index.
  std::span<const std::int64_t> popularity() const noexcept { return popularity_; }
  std::int64_t popularity_of(ItemId item) const;

  double mean_rating() const noexcept { return mean_rating_; }

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.interactions_ == b.interactions_;
  }

 private:
  std::vector<UserId> users_;
  std::vector<ItemId> items_;
  std::vector<Interaction> interactions_;
  std::vector<ItemIndex> interaction_items_;
  std::vector<std::size_t> user_offsets_;
  std::vector<std::int64_t> popularity_;
  double mean_rating_ = 0.0;
};

enum class DatasetFormat { automatic, movielens, csv };

DatasetFormat parse_dataset_format(std::string_view name);

/// `UserID::MovieID::Rating::Timestamp` records, one per line.
Dataset parse_movielens(std::istream& in);
/// Header `user_id,item_id,rating,timestamp`, then one record per line.
Dataset parse_csv(std::istream& in);
/// Sniffs the CSV header when `format` is automatic.
Dataset parse_dataset(std::istream& in, DatasetFormat format = DatasetFormat::automatic);
Dataset load_dataset(const std::filesystem::path& path,
                     DatasetFormat format = DatasetFormat::automatic);

void write_movielens(std::ostream& out, const Dataset& dataset);
void write_csv(std::ostream& out, const Dataset& dataset);

enum class PopularityMode { raw_count, percentile };

std::string_view to_string(PopularityMode mode);
PopularityMode parse_popularity_mode(std::string_view name);

/// Per-item attribute rho(v): the raw consumption count, or the percentage of
/// the vocabulary with a strictly smaller count.
class PopularityAttribute {
 public:
  PopularityAttribute() = default;
  /// `item_ids` ascending; `values[i]` belongs to `item_ids[i]`.
  PopularityAttribute(PopularityMode mode, std::vector<ItemId> item_ids, std::vector<double> values);

  PopularityMode mode() const noexcept { return mode_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<const ItemId> item_ids() const noexcept { return item_ids_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](ItemIndex item) const { return values_[item]; }
  double at(ItemIndex item) const { return values_.at(item); }

  /// Value rescaled to [0, 1]: percentile / 100, or count / max count.
  double normalized(ItemIndex item) const { return values_.at(item) * scale_; }
  /// Throws DatasetError for an item outside the vocabulary.
  double value_of(ItemId item) const;

 private:
  PopularityMode mode_ = PopularityMode::raw_count;
  std::vector<ItemId> item_ids_;
  std::vector<double> values_;
  double scale_ = 1.0;
};

PopularityAttribute compute_popularity(const Dataset& dataset, PopularityMode mode);

struct Histogram {
  std::vector<double> edges;  // size = counts.size() + 1
  std::vector<std::size_t> counts;
};

struct DatasetSummary {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  std::size_t num_interactions = 0;
  double mean_item_popularity = 0.0;

  Histogram item_popularity;   // log2-spaced bins over counts
  Histogram history_length;    // log2-spaced bins over per-user lengths
  Histogram history_popularity;
  Histogram rating_popularity_correlation;  // 20 bins over [-1, 1]

  std::vector<double> user_mean_popularity;  // by user index
  /// Spearman rho per user; users with fewer than three ratings, or with a
  /// constant rating or popularity column, are left out.
  std::vector<std::pair<UserId, double>> user_spearman;
};

inline constexpr std::size_t kMinSpearmanHistory = 3;

DatasetSummary dataset_stats(const Dataset& dataset);

/// Spearman rank correlation with average ranks for ties. Returns nullopt
/// when either column is constant or fewer than two points are given.
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);

}  // namespace recsim

#pragma once

#include <cstdint>

#include <Eigen/Dense>

namespace recsim {

using UserId = std::int64_t;
using ItemId = std::int64_t;

/// Dense position of an item in a sorted vocabulary. Ascending index order
/// is ascending item-id order.
using ItemIndex = std::uint32_t;

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
/// One embedding per row.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Ratings from the dataset live on the 1..5 scale; simulated feedback is +-1.
enum class RatingScale : std::uint8_t { dataset, feedback };

}  // namespace recsim

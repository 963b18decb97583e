#include "recsim/recommender.hpp"

#include <algorithm>
#include <queue>

#include "recsim/errors.hpp"

namespace recsim {

std::vector<ItemIndex> top_k(std::span<const double> scores,
                             std::span<const std::uint8_t> excluded, std::size_t k) {
  if (excluded.size() != scores.size()) {
    throw ModelError("exclusion mask has " + std::to_string(excluded.size()) +
                     " entries for " + std::to_string(scores.size()) + " items");
  }
  const auto available = static_cast<std::size_t>(
      std::count(excluded.begin(), excluded.end(), std::uint8_t{0}));
  if (available < k) throw CandidateShortfall(k, available);

  // `better(a, b)`: a ranks ahead of b.
  const auto better = [&](ItemIndex a, ItemIndex b) {
    return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
  };
  // Max-heap under `better` keeps the worst retained item on top.
  std::priority_queue<ItemIndex, std::vector<ItemIndex>, decltype(better)> heap(better);
  for (std::size_t i = 0; i < scores.size() && k > 0; ++i) {
    if (excluded[i]) continue;
    const auto idx = static_cast<ItemIndex>(i);
    if (heap.size() < k) {
      heap.push(idx);
    } else if (better(idx, heap.top())) {
      heap.pop();
      heap.push(idx);
    }
  }
  std::vector<ItemIndex> slate(heap.size());
  for (auto it = slate.rbegin(); it != slate.rend(); ++it) {
    *it = heap.top();
    heap.pop();
  }
  return slate;
}

std::optional<ItemIndex> Recommender::index_of(ItemId item) const {
  const auto ids = item_ids();
  auto it = std::lower_bound(ids.begin(), ids.end(), item);
  if (it == ids.end() || *it != item) return std::nullopt;
  return static_cast<ItemIndex>(it - ids.begin());
}

Vector Recommender::scores(const Vector& user) const {
  const auto& q = item_embeddings();
  if (user.size() != q.cols()) {
    throw ModelError("user vector has dimension " + std::to_string(user.size()) +
                     ", model expects " + std::to_string(q.cols()));
  }
  return q * user;
}

std::vector<ItemIndex> Recommender::recommend(const Vector& user,
                                              std::span<const std::uint8_t> excluded,
                                              std::size_t k) const {
  const Vector s = scores(user);
  return top_k(std::span<const double>(s.data(), static_cast<std::size_t>(s.size())), excluded, k);
}

std::vector<ItemId> Recommender::recommend(const Vector& user,
                                           const std::unordered_set<ItemId>& excluded,
                                           std::size_t k) const {
  std::vector<std::uint8_t> mask(num_items(), 0);
  for (ItemId item : excluded) {
    if (auto idx = index_of(item)) mask[*idx] = 1;
  }
  const auto ids = item_ids();
  std::vector<ItemId> slate;
  for (ItemIndex idx : recommend(user, mask, k)) slate.push_back(ids[idx]);
  return slate;
}

std::uint64_t hash_bytes(const void* data, std::size_t size, std::uint64_t seed) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace recsim

#include "recsim/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>

#include "recsim/errors.hpp"

namespace recsim {

namespace {

constexpr double kMinRating = 1.0;
constexpr double kMaxRating = 5.0;
constexpr std::string_view kCsvHeader = "user_id,item_id,rating,timestamp";

template <typename T>
T parse_number(std::string_view field, std::size_t line, std::string_view name) {
  while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
  while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
  T value{};
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc{} || ptr != end || field.empty()) {
    throw ParseError(line, "invalid " + std::string(name) + " '" + std::string(field) + "'");
  }
  return value;
}

std::vector<std::string_view> split(std::string_view text, std::string_view delimiter) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(delimiter, start);
    if (pos == std::string_view::npos) {
      parts.push_back(text.substr(start));
      return parts;
    }
    parts.push_back(text.substr(start, pos - start));
    start = pos + delimiter.size();
  }
}

Interaction parse_record(std::string_view line, std::size_t line_no, std::string_view delimiter) {
  const auto fields = split(line, delimiter);
  if (fields.size() != 4) {
    throw ParseError(line_no, "expected 4 fields separated by '" + std::string(delimiter) +
                                  "', found " + std::to_string(fields.size()));
  }
  Interaction rec;
  rec.user = parse_number<UserId>(fields[0], line_no, "user id");
  rec.item = parse_number<ItemId>(fields[1], line_no, "item id");
  rec.rating = parse_number<double>(fields[2], line_no, "rating");
  rec.timestamp = parse_number<std::int64_t>(fields[3], line_no, "timestamp");
  if (!(rec.rating >= kMinRating && rec.rating <= kMaxRating)) {
    throw ParseError(line_no, "rating " + std::string(fields[2]) + " outside [1, 5]");
  }
  return rec;
}

std::string_view trim_line(std::string& line) {
  std::string_view view(line);
  while (!view.empty() && (view.back() == '\r' || view.back() == '\n')) view.remove_suffix(1);
  return view;
}

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t'; });
}

Dataset parse_lines(std::istream& in, std::string_view delimiter, bool header) {
  std::vector<Interaction> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto view = trim_line(line);
    if (header && line_no == 1) {
      if (view != kCsvHeader) {
        throw ParseError(line_no, "expected header '" + std::string(kCsvHeader) + "'");
      }
      continue;
    }
    if (is_blank(view)) continue;
    records.push_back(parse_record(view, line_no, delimiter));
  }
  if (records.empty()) throw DatasetError("empty dataset: no interaction records");
  return Dataset::from_interactions(std::move(records));
}

void write_number(std::ostream& out, double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  out.write(buf, ptr - buf);
}

Histogram log2_histogram(std::span<const double> values) {
  Histogram h;
  double max_value = 1.0;
  for (double v : values) max_value = std::max(max_value, v);
  const auto bins = static_cast<std::size_t>(std::floor(std::log2(max_value))) + 1;
  for (std::size_t i = 0; i <= bins; ++i) h.edges.push_back(std::ldexp(1.0, static_cast<int>(i)));
  h.edges.front() = 0.0;
  h.counts.assign(bins, 0);
  for (double v : values) {
    std::size_t bin = v < 2.0 ? 0 : static_cast<std::size_t>(std::floor(std::log2(v)));
    ++h.counts[std::min(bin, bins - 1)];
  }
  return h;
}

Histogram linear_histogram(std::span<const double> values, double lo, double hi, std::size_t bins) {
  Histogram h;
  for (std::size_t i = 0; i <= bins; ++i) {
    h.edges.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins));
  }
  h.counts.assign(bins, 0);
  for (double v : values) {
    auto bin = static_cast<std::ptrdiff_t>(std::floor((v - lo) / (hi - lo) * static_cast<double>(bins)));
    bin = std::clamp<std::ptrdiff_t>(bin, 0, static_cast<std::ptrdiff_t>(bins) - 1);
    ++h.counts[static_cast<std::size_t>(bin)];
  }
  return h;
}

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t m = i; m <= j; ++m) ranks[order[m]] = rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

Dataset Dataset::from_interactions(std::vector<Interaction> raw) {
  if (raw.empty()) throw DatasetError("empty dataset: no interaction records");
  for (const auto& rec : raw) {
    if (!std::isfinite(rec.rating)) {
      throw DatasetError("non-finite rating for user " + std::to_string(rec.user) +
                         ", item " + std::to_string(rec.item));
    }
  }

  // Latest timestamp wins; stable sort keeps the first record on ties.
  std::stable_sort(raw.begin(), raw.end(), [](const Interaction& a, const Interaction& b) {
    return std::tie(a.user, a.item) < std::tie(b.user, b.item);
  });
  std::vector<Interaction> unique;
  unique.reserve(raw.size());
  for (const auto& rec : raw) {
    if (!unique.empty() && unique.back().user == rec.user && unique.back().item == rec.item) {
      if (rec.timestamp > unique.back().timestamp) unique.back() = rec;
    } else {
      unique.push_back(rec);
    }
  }
  std::sort(unique.begin(), unique.end(), [](const Interaction& a, const Interaction& b) {
    return std::tie(a.user, a.timestamp, a.item) < std::tie(b.user, b.timestamp, b.item);
  });

  Dataset d;
  d.interactions_ = std::move(unique);
  for (const auto& rec : d.interactions_) {
    if (d.users_.empty() || d.users_.back() != rec.user) d.users_.push_back(rec.user);
    d.items_.push_back(rec.item);
  }
  std::sort(d.items_.begin(), d.items_.end());
  d.items_.erase(std::unique(d.items_.begin(), d.items_.end()), d.items_.end());

  d.popularity_.assign(d.items_.size(), 0);
  d.interaction_items_.reserve(d.interactions_.size());
  double rating_sum = 0.0;
  for (std::size_t i = 0; i < d.interactions_.size(); ++i) {
    const auto& rec = d.interactions_[i];
    if (i == 0 || d.interactions_[i - 1].user != rec.user) d.user_offsets_.push_back(i);
    const auto idx = static_cast<ItemIndex>(
        std::lower_bound(d.items_.begin(), d.items_.end(), rec.item) - d.items_.begin());
    d.interaction_items_.push_back(idx);
    ++d.popularity_[idx];
    rating_sum += rec.rating;
  }
  d.user_offsets_.push_back(d.interactions_.size());
  d.mean_rating_ = rating_sum / static_cast<double>(d.interactions_.size());
  return d;
}

std::optional<std::size_t> Dataset::user_index(UserId user) const {
  auto it = std::lower_bound(users_.begin(), users_.end(), user);
  if (it == users_.end() || *it != user) return std::nullopt;
  return static_cast<std::size_t>(it - users_.begin());
}

std::optional<ItemIndex> Dataset::item_index(ItemId item) const {
  auto it = std::lower_bound(items_.begin(), items_.end(), item);
  if (it == items_.end() || *it != item) return std::nullopt;
  return static_cast<ItemIndex>(it - items_.begin());
}

std::span<const Interaction> Dataset::history(std::size_t user_index) const {
  const auto begin = user_offsets_.at(user_index);
  const auto end = user_offsets_.at(user_index + 1);
  return std::span<const Interaction>(interactions_).subspan(begin, end - begin);
}

std::span<const ItemIndex> Dataset::history_items(std::size_t user_index) const {
  const auto begin = user_offsets_.at(user_index);
  const auto end = user_offsets_.at(user_index + 1);
  return std::span<const ItemIndex>(interaction_items_).subspan(begin, end - begin);
}

std::int64_t Dataset::popularity_of(ItemId item) const {
  const auto idx = item_index(item);
  if (!idx) throw DatasetError("unknown item " + std::to_string(item));
  return popularity_[*idx];
}

DatasetFormat parse_dataset_format(std::string_view name) {
  if (name == "auto" || name.empty()) return DatasetFormat::automatic;
  if (name == "movielens" || name == "dat") return DatasetFormat::movielens;
  if (name == "csv") return DatasetFormat::csv;
  throw ConfigError("unknown dataset format '" + std::string(name) +
                    "' (expected auto, movielens or csv)");
}

Dataset parse_movielens(std::istream& in) { return parse_lines(in, "::", false); }

Dataset parse_csv(std::istream& in) { return parse_lines(in, ",", true); }

Dataset parse_dataset(std::istream& in, DatasetFormat format) {
  if (format == DatasetFormat::automatic) {
    std::string first;
    const auto start = in.tellg();
    std::getline(in, first);
    in.clear();
    in.seekg(start);
    format = trim_line(first) == kCsvHeader ? DatasetFormat::csv : DatasetFormat::movielens;
  }
  return format == DatasetFormat::csv ? parse_csv(in) : parse_movielens(in);
}

Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open dataset file '" + path.string() + "'");
  if (format == DatasetFormat::automatic && path.extension() == ".csv") format = DatasetFormat::csv;
  return parse_dataset(in, format);
}

void write_movielens(std::ostream& out, const Dataset& dataset) {
  for (const auto& rec : dataset.interactions()) {
    out << rec.user << "::" << rec.item << "::";
    write_number(out, rec.rating);
    out << "::" << rec.timestamp << '\n';
  }
}

void write_csv(std::ostream& out, const Dataset& dataset) {
  out << kCsvHeader << '\n';
  for (const auto& rec : dataset.interactions()) {
    out << rec.user << ',' << rec.item << ',';
    write_number(out, rec.rating);
    out << ',' << rec.timestamp << '\n';
  }
}

std::string_view to_string(PopularityMode mode) {
  return mode == PopularityMode::percentile ? "percentile" : "raw_count";
}

PopularityMode parse_popularity_mode(std::string_view name) {
  if (name == "raw_count" || name == "raw" || name == "count") return PopularityMode::raw_count;
  if (name == "percentile") return PopularityMode::percentile;
  throw ConfigError("unknown popularity mode '" + std::string(name) +
                    "' (expected raw_count or percentile)");
}

PopularityAttribute::PopularityAttribute(PopularityMode mode, std::vector<ItemId> item_ids,
                                         std::vector<double> values)
    : mode_(mode), item_ids_(std::move(item_ids)), values_(std::move(values)) {
  if (item_ids_.size() != values_.size()) {
    throw DatasetError("attribute table has " + std::to_string(values_.size()) + " values for " +
                       std::to_string(item_ids_.size()) + " items");
  }
  if (mode_ == PopularityMode::percentile) {
    scale_ = 0.01;
  } else {
    double max_value = 0.0;
    for (double v : values_) max_value = std::max(max_value, v);
    scale_ = max_value > 0.0 ? 1.0 / max_value : 1.0;
  }
}

double PopularityAttribute::value_of(ItemId item) const {
  auto it = std::lower_bound(item_ids_.begin(), item_ids_.end(), item);
  if (it == item_ids_.end() || *it != item) {
    throw DatasetError("item " + std::to_string(item) + " has no attribute value");
  }
  return values_[static_cast<std::size_t>(it - item_ids_.begin())];
}

PopularityAttribute compute_popularity(const Dataset& dataset, PopularityMode mode) {
  if (dataset.empty()) throw DatasetError("popularity of an empty dataset");
  const auto counts = dataset.popularity();
  std::vector<double> values(counts.size());
  if (mode == PopularityMode::raw_count) {
    std::transform(counts.begin(), counts.end(), values.begin(),
                   [](std::int64_t c) { return static_cast<double>(c); });
  } else {
    std::vector<std::int64_t> sorted(counts.begin(), counts.end());
    std::sort(sorted.begin(), sorted.end());
    const auto n = static_cast<double>(sorted.size());
    for (std::size_t i = 0; i < counts.size(); ++i) {
      const auto smaller = std::lower_bound(sorted.begin(), sorted.end(), counts[i]) - sorted.begin();
      values[i] = 100.0 * static_cast<double>(smaller) / n;
    }
  }
  return PopularityAttribute(mode, {dataset.items().begin(), dataset.items().end()},
                             std::move(values));
}

std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) return std::nullopt;
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

DatasetSummary dataset_stats(const Dataset& dataset) {
  if (dataset.empty()) throw DatasetError("statistics of an empty dataset");
  DatasetSummary s;
  s.num_users = dataset.num_users();
  s.num_items = dataset.num_items();
  s.num_interactions = dataset.num_interactions();

  const auto pop = dataset.popularity();
  std::vector<double> counts(pop.begin(), pop.end());
  s.mean_item_popularity =
      std::accumulate(counts.begin(), counts.end(), 0.0) / static_cast<double>(counts.size());
  s.item_popularity = log2_histogram(counts);

  std::vector<double> lengths;
  std::vector<double> correlations;
  for (std::size_t u = 0; u < dataset.num_users(); ++u) {
    const auto hist = dataset.history(u);
    const auto items = dataset.history_items(u);
    lengths.push_back(static_cast<double>(hist.size()));
    std::vector<double> ratings, pops;
    for (std::size_t i = 0; i < hist.size(); ++i) {
      ratings.push_back(hist[i].rating);
      pops.push_back(counts[items[i]]);
    }
    s.user_mean_popularity.push_back(std::accumulate(pops.begin(), pops.end(), 0.0) /
                                     static_cast<double>(pops.size()));
    if (hist.size() < kMinSpearmanHistory) continue;
    if (auto rho = spearman(ratings, pops)) {
      s.user_spearman.emplace_back(dataset.users()[u], *rho);
      correlations.push_back(*rho);
    }
  }
  s.history_length = log2_histogram(lengths);
  s.history_popularity = log2_histogram(s.user_mean_popularity);
  s.rating_popularity_correlation = linear_histogram(correlations, -1.0, 1.0, 20);
  return s;
}

}  // namespace recsim

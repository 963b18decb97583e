#include <doctest.h>

#include <sstream>

#include "recsim/dataset.hpp"
#include "recsim/errors.hpp"
#include "support.hpp"

using namespace recsim;
using recsim::testing::make_dataset;

namespace {

Dataset parse(const std::string& text, DatasetFormat format = DatasetFormat::automatic) {
  std::istringstream in(text);
  return parse_dataset(in, format);
}

}  // namespace

TEST_CASE("single movielens line") {
  const auto d = parse("1::10::5::978300760\n");
  CHECK(d.num_users() == 1);
  CHECK(d.num_items() == 1);
  CHECK(d.num_interactions() == 1);
  CHECK(d.popularity_of(10) == 1);
  CHECK(d.interactions()[0] == Interaction{1, 10, 5.0, 978300760});
}

TEST_CASE("duplicate pairs keep the latest timestamp") {
  const auto d = parse("1::10::2::5\n1::10::4::9\n1::11::3::7\n");
  REQUIRE(d.num_interactions() == 2);
  const auto hist = d.history(0);
  CHECK(hist[0] == Interaction{1, 11, 3.0, 7});
  CHECK(hist[1] == Interaction{1, 10, 4.0, 9});

  SUBCASE("equal timestamps keep the first record") {
    const auto tie = parse("1::10::2::5\n1::10::4::5\n");
    CHECK(tie.interactions()[0].rating == 2.0);
  }
}

TEST_CASE("malformed input reports the line") {
  try {
    parse("1::10::5::1\n\n2::x::3::4\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(parse("1::10::5\n"), ParseError);
  CHECK_THROWS_AS(parse("1::10::6::1\n"), ParseError);
  CHECK_THROWS_AS(parse("1::10::0.5::1\n"), ParseError);
  CHECK_THROWS_AS(parse(""), DatasetError);
  CHECK_THROWS_AS(parse("\n\n"), DatasetError);
}

TEST_CASE("csv variant") {
  const auto d = parse("user_id,item_id,rating,timestamp\n3,7,4,100\n3,8,2,50\n");
  CHECK(d.num_interactions() == 2);
  CHECK(d.history(0)[0].item == 8);
  CHECK_THROWS_AS(parse("3,7,4,100\n", DatasetFormat::csv), ParseError);
}

TEST_CASE("parse, serialize, parse round-trips") {
  const auto d = testing::power_law_dataset(11);
  std::ostringstream dat, csv;
  write_movielens(dat, d);
  write_csv(csv, d);
  CHECK(parse(dat.str()) == d);
  CHECK(parse(csv.str()) == d);

  const auto fractional = make_dataset({{1, 2, 3.5, 1}, {2, 2, 1.25, 2}});
  std::ostringstream out;
  write_movielens(out, fractional);
  CHECK(parse(out.str()) == fractional);
}

TEST_CASE("percentile popularity") {
  // counts a:1, b:2, c:3
  const auto d = make_dataset({{1, 1, 5, 1}, {2, 2, 5, 1}, {3, 2, 5, 1}, {1, 3, 5, 2}, {2, 3, 5, 2}, {3, 3, 5, 2}});
  const auto pct = compute_popularity(d, PopularityMode::percentile);
  CHECK(pct.value_of(1) == 0.0);
  CHECK(pct.value_of(2) == doctest::Approx(100.0 / 3.0));
  CHECK(pct.value_of(3) == doctest::Approx(200.0 / 3.0));
  const auto raw = compute_popularity(d, PopularityMode::raw_count);
  CHECK(raw.value_of(3) == 3.0);
  CHECK(raw.normalized(*d.item_index(3)) == 1.0);
  CHECK_THROWS_AS(raw.value_of(99), DatasetError);

  const auto tie = make_dataset({{1, 1, 5, 1}, {2, 1, 5, 1}, {1, 2, 5, 1}, {2, 2, 5, 1}});
  const auto tp = compute_popularity(tie, PopularityMode::percentile);
  CHECK(tp.values()[0] == 0.0);
  CHECK(tp.values()[1] == 0.0);
}

TEST_CASE("popularity invariants on a power-law dataset") {
  const auto d = testing::power_law_dataset();
  const auto pop = d.popularity();
  std::int64_t total = 0;
  for (auto c : pop) total += c;
  CHECK(total == static_cast<std::int64_t>(d.num_interactions()));

  const auto pct = compute_popularity(d, PopularityMode::percentile);
  for (std::size_t a = 0; a < pop.size(); a += 7) {
    for (std::size_t b = 0; b < pop.size(); b += 5) {
      if (pop[a] < pop[b]) CHECK(pct[a] < pct[b]);
      if (pop[a] == pop[b]) CHECK(pct[a] == pct[b]);
    }
  }
  for (double v : pct.values()) CHECK((v >= 0.0 && v <= 100.0));
}

TEST_CASE("spearman") {
  const std::vector<double> pop{10, 5, 1};
  const std::vector<double> rating{5, 3, 1};
  CHECK(*spearman(pop, rating) == doctest::Approx(1.0));
  const std::vector<double> flat{4, 4, 4};
  CHECK_FALSE(spearman(pop, flat).has_value());
  // average ranks for ties: x ranks (1.5, 1.5, 3), y ranks (1, 2, 3)
  const std::vector<double> x{1, 1, 2};
  const std::vector<double> y{1, 2, 3};
  CHECK(*spearman(x, y) == doctest::Approx(0.8660254037844386));
}

TEST_CASE("dataset stats") {
  // user 1: items with popularity 10, 5, 1 rated 5, 3, 1; user 2 has two ratings.
  std::vector<Interaction> recs;
  std::int64_t t = 0;
  auto add = [&](UserId u, ItemId i, double r) { recs.push_back({u, i, r, ++t}); };
  add(1, 100, 5);
  add(1, 200, 3);
  add(1, 300, 1);
  for (UserId u = 10; u < 19; ++u) add(u, 100, 4);
  for (UserId u = 10; u < 14; ++u) add(u, 200, 4);
  add(2, 100, 2);
  add(2, 200, 5);
  const auto d = Dataset::from_interactions(recs);
  REQUIRE(d.popularity_of(100) == 11);
  const auto s = dataset_stats(d);
  CHECK(s.num_users == d.num_users());
  REQUIRE(s.user_spearman.size() == 1);
  CHECK(s.user_spearman[0].first == 1);
  CHECK(s.user_spearman[0].second == doctest::Approx(1.0));

  std::size_t counted = 0;
  for (auto c : s.history_length.counts) counted += c;
  CHECK(counted == d.num_users());
  counted = 0;
  for (auto c : s.item_popularity.counts) counted += c;
  CHECK(counted == d.num_items());
  CHECK(s.rating_popularity_correlation.counts.size() == 20);
  CHECK(s.rating_popularity_correlation.counts.back() == 1);

  CHECK_THROWS_AS(dataset_stats(Dataset{}), DatasetError);
}

TEST_CASE("power-law shape of the synthetic stand-in") {
  const auto s = dataset_stats(testing::power_law_dataset());
  // Right skew: the first log bins hold more items than the last.
  const auto& c = s.item_popularity.counts;
  REQUIRE(c.size() >= 3);
  CHECK(s.mean_item_popularity > 0.0);
  std::size_t head = c[c.size() - 1] + c[c.size() - 2];
  std::size_t body = 0;
  for (std::size_t i = 0; i + 2 < c.size(); ++i) body += c[i];
  CHECK(body > head);
}

#include <doctest.h>

#include <map>
#include <random>
#include <sstream>

#include "mobility/ingest.hpp"
#include "support.hpp"

using namespace mobility;

namespace {
ParseResult parse(const std::string& text, CheckInSchema schema = CheckInSchema::foursquare_tsv()) {
  std::istringstream in(text);
  return parse_checkins(in, schema);
}
}  // namespace

TEST_CASE("table-style row parses with tz-adjusted local time") {
  const auto r = parse("1541\t4f0fd5a8e4b0e2fbd6d83d41\t4bf58dd8d48988d10c951735\tCosmetics Shop\t35.71\t139.62\t540\t"
                       "Tue Apr 03 18:17:18 +0000 2012\n");
  REQUIRE(r.checkins.size() == 1);
  const auto& c = r.checkins[0];
  CHECK(c.user_id == 1541);
  CHECK(c.venue_category_name == "Cosmetics Shop");
  CHECK(c.lat == doctest::Approx(35.71));
  CHECK(c.local_time - c.utc_time == 540 * 60);
  CHECK(format_iso8601(c.local_time) == "2012-04-04T03:17:18");
  CHECK(hour_of_day(c.local_time) == 3);
}

TEST_CASE("empty source yields nothing") {
  const auto r = parse("");
  CHECK(r.checkins.empty());
  CHECK(r.errors.empty());
}

TEST_CASE("comma files, quoted fields, header detection and column mapping") {
  const std::string text =
      "lat,lon,user,venue,catid,catname,tz,utc\n"
      "40.7,-74.0,7,v1,c1,\"Food, Drink\",-240,2012-04-03T18:00:00Z\n";
  const auto schema = CheckInSchema::from_column_names("lat,lon,user,venue,catid,catname,tz,utc", ',');
  const auto r = parse(text, schema);
  REQUIRE(r.checkins.size() == 1);
  CHECK(r.checkins[0].user_id == 7);
  CHECK(r.checkins[0].venue_category_name == "Food, Drink");
  CHECK(hour_of_day(r.checkins[0].local_time) == 14);
}

TEST_CASE("malformed rows are collected with line numbers; too many abort") {
  std::string good;
  for (int i = 0; i < 200; ++i) good += "1\tv\tc\tBar\t40.7\t-74.0\t0\tTue Apr 03 18:17:18 +0000 2012\n";
  const auto r = parse(good + "1\tv\tc\tBar\t95.0\t-74.0\t0\tTue Apr 03 18:17:18 +0000 2012\n");
  CHECK(r.checkins.size() == 200);
  REQUIRE(r.errors.size() == 1);
  CHECK(r.errors[0].line == 201);
  CHECK_THROWS_AS(parse(good + "garbage\nmore garbage\nx\ty\n"), ParseError);
}

TEST_CASE("timestamps: both formats accepted, others rejected") {
  CHECK(parse_timestamp("Tue Apr 03 18:17:18 +0000 2012").value() == 1333477038);
  CHECK(parse_timestamp("2012-04-03T18:17:18Z").value() == 1333477038);
  CHECK(parse_timestamp("2012-04-03 18:17:18").value() == 1333477038);
  CHECK_FALSE(parse_timestamp("03/04/2012 18:17").has_value());
  CHECK_FALSE(parse_timestamp("2012-13-03T18:17:18").has_value());
}

TEST_CASE("parse, serialize, parse is the identity on well-formed rows") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> lat(-89.0, 89.0), lon(-179.0, 179.0);
  std::vector<CheckIn> original;
  for (int i = 0; i < 200; ++i) {
    CheckIn c = test::checkin(static_cast<UserId>(rng() % 50), "venue" + std::to_string(rng() % 30), lat(rng), lon(rng),
                              1333324800 + static_cast<EpochSeconds>(rng() % 10'000'000), "Cat " + std::to_string(i % 7));
    c.tz_offset_min = static_cast<int>(rng() % 1441) - 720;
    c.local_time = c.utc_time + c.tz_offset_min * 60;
    original.push_back(c);
  }
  for (const auto& schema : {CheckInSchema::foursquare_tsv(), CheckInSchema::foursquare_csv()}) {
    std::string text;
    for (const auto& c : original) text += format_checkin_row(c, schema) + "\n";
    const auto r = parse(text, schema);
    CHECK(r.checkins == original);
  }
}

TEST_CASE("trajectories: one per user, sorted, stable on ties") {
  std::vector<CheckIn> cs{test::checkin(1541, "a", 1, 1, 100), test::checkin(868, "b", 1, 1, 50),
                          test::checkin(114, "c", 1, 1, 70)};
  auto ts = build_trajectories(cs);
  REQUIRE(ts.size() == 3);
  CHECK(ts[0].user_id == 1541);
  for (const auto& t : ts) CHECK(t.points.size() == 1);

  cs = {test::checkin(5, "late", 1, 1, 200), test::checkin(5, "early", 1, 1, 100), test::checkin(5, "tie", 1, 1, 200)};
  ts = build_trajectories(cs);
  REQUIRE(ts.size() == 1);
  CHECK(ts[0].points[0].venue_id == "early");
  CHECK(ts[0].points[1].venue_id == "late");
  CHECK(ts[0].points[2].venue_id == "tie");
}

TEST_CASE("repeat check-in ratio") {
  Trajectory t;
  t.user_id = 1;
  for (const char* v : {"a", "a", "a", "b", "b", "c", "c", "c", "d", "a"}) t.points.push_back(test::checkin(1, v, 0, 0, 0));
  CHECK(compute_rcr(t) == doctest::Approx(0.6));
  std::mt19937_64 rng(1);
  for (int i = 0; i < 10; ++i) {
    std::shuffle(t.points.begin(), t.points.end(), rng);
    CHECK(compute_rcr(t) == doctest::Approx(0.6));
  }
  Trajectory distinct;
  for (int i = 0; i < 5; ++i) distinct.points.push_back(test::checkin(1, "v" + std::to_string(i), 0, 0, 0));
  CHECK(compute_rcr(distinct) == 0.0);
  CHECK_THROWS_AS(compute_rcr(Trajectory{}), DomainError);
}

TEST_CASE("dataset stats: single check-in histogram") {
  const auto ts = build_trajectories({test::checkin(1, "a", 0, 0, test::kMonday + 9 * 3600)});
  const auto s = dataset_stats(ts);
  for (int h = 0; h < 24; ++h) CHECK(s.hourly_histogram[h] == (h == 9 ? 1u : 0u));
  CHECK(s.weekday_histogram[0] == 1);
}

TEST_CASE("dataset stats agree with a brute-force group-by") {
  std::mt19937_64 rng(11);
  std::vector<CheckIn> cs;
  for (int i = 0; i < 10'000; ++i)
    cs.push_back(test::checkin(static_cast<UserId>(rng() % 40), "v" + std::to_string(rng() % 300), 0, 0,
                               test::kMonday + static_cast<EpochSeconds>(rng() % 5'000'000),
                               "C" + std::to_string(rng() % 25)));
  const auto s = dataset_stats(build_trajectories(cs));

  std::map<std::string, std::size_t> by_cat;
  std::array<std::size_t, 24> hours{};
  std::array<std::size_t, 7> days{};
  for (const auto& c : cs) {
    ++by_cat[c.venue_category_name];
    ++hours[static_cast<std::size_t>((c.local_time % 86400) / 3600)];
    ++days[static_cast<std::size_t>(((c.local_time / 86400) + 3) % 7)];
  }
  CHECK(s.total_checkins == cs.size());
  CHECK(s.user_count == 40);
  CHECK(s.hourly_histogram == hours);
  CHECK(s.weekday_histogram == days);
  std::size_t sum = 0;
  for (std::size_t i = 0; i < s.top_categories.size(); ++i) {
    CHECK(s.top_categories[i].second == by_cat.at(s.top_categories[i].first));
    if (i) CHECK(s.top_categories[i - 1].second >= s.top_categories[i].second);
    sum += s.top_categories[i].second;
  }
  CHECK(sum <= s.total_checkins);
  for (const auto& [u, r] : s.per_user_rcr) {
    CHECK(r >= 0.0);
    CHECK(r < 1.0);
  }
  const auto j = stats_to_json(s, 10);
  CHECK(j["top_categories"].size() == 10);
}

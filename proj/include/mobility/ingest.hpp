#pragma once

#include <array>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mobility/geo.hpp"
#include "mobility/util.hpp"

namespace mobility {

using UserId = std::int64_t;
// Seconds since 1970-01-01T00:00:00. Local timestamps use the same scale
// shifted by the row's timezone offset.
using EpochSeconds = std::int64_t;

inline constexpr EpochSeconds kSecondsPerDay = 86'400;

// Day number (days since epoch) of a timestamp, floor semantics.
constexpr std::int64_t day_number(EpochSeconds t) {
  return (t >= 0 ? t : t - (kSecondsPerDay - 1)) / kSecondsPerDay;
}
constexpr int hour_of_day(EpochSeconds t) {
  return static_cast<int>((t - day_number(t) * kSecondsPerDay) / 3600);
}
// 0 = Monday ... 6 = Sunday. 1970-01-01 was a Thursday.
constexpr int day_of_week(EpochSeconds t) {
  const std::int64_t d = day_number(t);
  return static_cast<int>(((d + 3) % 7 + 7) % 7);
}

struct CheckIn {
  UserId user_id = 0;
  std::string venue_id;
  std::string venue_category_id;
  std::string venue_category_name;
  double lat = 0.0;
  double lon = 0.0;
  int tz_offset_min = 0;
  EpochSeconds utc_time = 0;
  EpochSeconds local_time = 0;

  LatLon position() const { return {lat, lon}; }
  friend bool operator==(const CheckIn&, const CheckIn&) = default;
};

struct Trajectory {
  UserId user_id = 0;
  std::vector<CheckIn> points;
};

// Column layout of an input file. `columns[f]` is the zero-based column that
// holds field f.
struct CheckInSchema {
  enum Field { User, Venue, CategoryId, CategoryName, Lat, Lon, TzOffset, UtcTime, kFieldCount };
  enum class Header { Auto, Present, Absent };

  char delimiter = '\t';
  std::array<int, kFieldCount> columns{0, 1, 2, 3, 4, 5, 6, 7};
  Header header = Header::Auto;

  static CheckInSchema foursquare_tsv() { return {}; }
  static CheckInSchema foursquare_csv() {
    CheckInSchema s;
    s.delimiter = ',';
    return s;
  }
  // Parses "user,venue,catid,catname,lat,lon,tz,utc" in any order.
  static CheckInSchema from_column_names(std::string_view names, char delimiter);
};

struct RowError {
  std::size_t line = 0;
  std::string message;
};

struct ParseResult {
  std::vector<CheckIn> checkins;
  std::vector<RowError> errors;
  std::size_t data_rows = 0;
};

// Fraction of malformed rows beyond which parsing fails as a whole.
inline constexpr double kMaxMalformedFraction = 0.01;

// Accepts "Tue Apr 03 18:17:18 +0000 2012" and ISO-8601
// ("2012-04-03T18:17:18Z", optional fraction and +hh:mm offset). Returns UTC.
std::optional<EpochSeconds> parse_timestamp(std::string_view text);
std::string format_foursquare_time(EpochSeconds utc);
std::string format_iso8601(EpochSeconds t);

// Malformed rows are collected with their line numbers; throws ParseError when
// more than kMaxMalformedFraction of the data rows are malformed.
ParseResult parse_checkins(std::istream& source, const CheckInSchema& schema);
ParseResult parse_checkins_file(const std::string& path, const CheckInSchema& schema);

std::string format_checkin_row(const CheckIn& c, const CheckInSchema& schema);

// One trajectory per user in order of first appearance; points stably sorted
// by local time.
std::vector<Trajectory> build_trajectories(const std::vector<CheckIn>& checkins);

// (total - unique venues) / total.
double compute_rcr(const Trajectory& t);

struct DatasetStats {
  std::size_t total_checkins = 0;
  std::size_t user_count = 0;
  std::array<std::size_t, 24> hourly_histogram{};
  std::array<std::size_t, 7> weekday_histogram{};
  std::vector<std::pair<std::string, std::size_t>> top_categories;
  std::map<UserId, double> per_user_rcr;
};

DatasetStats dataset_stats(const std::vector<Trajectory>& trajectories);

// `top_n` limits the category list in the output (0 = all).
Json stats_to_json(const DatasetStats& stats, std::size_t top_n = 10);

}  // namespace mobility

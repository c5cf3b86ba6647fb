#include "mobility/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <unordered_map>
#include <unordered_set>
#include <variant>

namespace mobility {

namespace {

constexpr std::array<std::string_view, 12> kMonths{"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                                   "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
constexpr std::array<std::string_view, 7> kWeekdays{"Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"};

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  T value{};
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc() || ptr != end || s.empty()) return std::nullopt;
  return value;
}

std::optional<EpochSeconds> civil_to_epoch(int y, int mo, int d, int h, int mi, int s) {
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h < 0 || h > 23 || mi < 0 || mi > 59 || s < 0 || s > 60) return std::nullopt;
  const auto days_since = sys_days{ymd}.time_since_epoch().count();
  return static_cast<EpochSeconds>(days_since) * kSecondsPerDay + h * 3600 + mi * 60 + s;
}

struct Clock {
  int h = 0, m = 0, s = 0;
};

std::optional<Clock> parse_clock(std::string_view t) {
  auto parts = split(t, ':');
  if (parts.size() != 3) return std::nullopt;
  auto h = parse_number<int>(parts[0]);
  auto m = parse_number<int>(parts[1]);
  auto sec_text = parts[2];
  if (auto dot = sec_text.find('.'); dot != std::string_view::npos) sec_text = sec_text.substr(0, dot);
  auto s = parse_number<int>(sec_text);
  if (!h || !m || !s) return std::nullopt;
  return Clock{*h, *m, *s};
}

// "+0000" or "+09:00" -> seconds east of UTC.
std::optional<int> parse_zone(std::string_view z) {
  if (z == "Z") return 0;
  if (z.size() < 3 || (z[0] != '+' && z[0] != '-')) return std::nullopt;
  const int sign = z[0] == '-' ? -1 : 1;
  std::string digits;
  for (char c : z.substr(1))
    if (c != ':') digits.push_back(c);
  if (digits.size() != 4 && digits.size() != 2) return std::nullopt;
  auto hh = parse_number<int>(std::string_view(digits).substr(0, 2));
  auto mm = digits.size() == 4 ? parse_number<int>(std::string_view(digits).substr(2, 2)) : std::optional<int>(0);
  if (!hh || !mm) return std::nullopt;
  return sign * (*hh * 3600 + *mm * 60);
}

std::optional<EpochSeconds> parse_foursquare_time(std::string_view text) {
  std::vector<std::string_view> tok;
  for (auto part : split(text, ' '))
    if (!part.empty()) tok.push_back(part);
  if (tok.size() != 6) return std::nullopt;
  if (std::find(kWeekdays.begin(), kWeekdays.end(), tok[0]) == kWeekdays.end()) return std::nullopt;
  auto mon = std::find(kMonths.begin(), kMonths.end(), tok[1]);
  if (mon == kMonths.end()) return std::nullopt;
  auto day = parse_number<int>(tok[2]);
  auto clock = parse_clock(tok[3]);
  auto zone = parse_zone(tok[4]);
  auto yr = parse_number<int>(tok[5]);
  if (!day || !clock || !zone || !yr) return std::nullopt;
  auto t = civil_to_epoch(*yr, static_cast<int>(mon - kMonths.begin()) + 1, *day, clock->h, clock->m, clock->s);
  if (!t) return std::nullopt;
  return *t - *zone;
}

std::optional<EpochSeconds> parse_iso_time(std::string_view text) {
  if (text.size() < 19 || text[4] != '-' || text[7] != '-' || (text[10] != 'T' && text[10] != ' '))
    return std::nullopt;
  auto y = parse_number<int>(text.substr(0, 4));
  auto mo = parse_number<int>(text.substr(5, 2));
  auto d = parse_number<int>(text.substr(8, 2));
  auto clock = parse_clock(text.substr(11, 8));
  if (!y || !mo || !d || !clock) return std::nullopt;
  std::string_view rest = text.substr(19);
  if (!rest.empty() && rest.front() == '.') {
    std::size_t i = 1;
    while (i < rest.size() && rest[i] >= '0' && rest[i] <= '9') ++i;
    if (i == 1) return std::nullopt;
    rest.remove_prefix(i);
  }
  int zone = 0;
  if (!rest.empty()) {
    auto z = parse_zone(rest);
    if (!z) return std::nullopt;
    zone = *z;
  }
  auto t = civil_to_epoch(*y, *mo, *d, clock->h, clock->m, clock->s);
  if (!t) return std::nullopt;
  return *t - zone;
}

// Splits one row; honours double quotes when the delimiter is a comma.
std::vector<std::string> split_row(std::string_view line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (delim == ',' && c == '"') {
      if (quoted && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else {
        quoted = !quoted;
      }
    } else if (c == delim && !quoted) {
      out.push_back(std::string(trim(cur)));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(std::string(trim(cur)));
  return out;
}

std::variant<CheckIn, std::string> parse_row(std::string_view line, const CheckInSchema& schema) {
  const auto fields = split_row(line, schema.delimiter);
  const int needed = *std::max_element(schema.columns.begin(), schema.columns.end()) + 1;
  if (static_cast<int>(fields.size()) < needed)
    return "expected " + std::to_string(needed) + " columns, found " + std::to_string(fields.size());
  auto field = [&](CheckInSchema::Field f) -> std::string_view { return fields[schema.columns[f]]; };

  CheckIn c;
  auto user = parse_number<std::int64_t>(field(CheckInSchema::User));
  if (!user) return "bad user id";
  c.user_id = *user;
  c.venue_id = std::string(field(CheckInSchema::Venue));
  if (c.venue_id.empty()) return "empty venue id";
  c.venue_category_id = std::string(field(CheckInSchema::CategoryId));
  c.venue_category_name = std::string(field(CheckInSchema::CategoryName));
  if (c.venue_category_name.empty()) return "empty category name";
  auto lat = parse_number<double>(field(CheckInSchema::Lat));
  auto lon = parse_number<double>(field(CheckInSchema::Lon));
  if (!lat || *lat < -90.0 || *lat > 90.0) return "latitude out of range";
  if (!lon || *lon < -180.0 || *lon > 180.0) return "longitude out of range";
  c.lat = *lat;
  c.lon = *lon;
  auto tz = parse_number<int>(field(CheckInSchema::TzOffset));
  if (!tz) return "bad timezone offset";
  c.tz_offset_min = *tz;
  auto utc = parse_timestamp(field(CheckInSchema::UtcTime));
  if (!utc) return "unrecognised timestamp";
  c.utc_time = *utc;
  c.local_time = c.utc_time + static_cast<EpochSeconds>(c.tz_offset_min) * 60;
  return c;
}

}  // namespace

CheckInSchema CheckInSchema::from_column_names(std::string_view names, char delimiter) {
  static const std::unordered_map<std::string_view, Field> kNames{
      {"user", User},   {"venue", Venue}, {"catid", CategoryId}, {"catname", CategoryName},
      {"lat", Lat},     {"lon", Lon},     {"tz", TzOffset},      {"utc", UtcTime}};
  CheckInSchema s;
  s.delimiter = delimiter;
  s.columns.fill(-1);
  const auto parts = split(names, ',');
  for (std::size_t i = 0; i < parts.size(); ++i) {
    auto name = trim(parts[i]);
    if (name.empty() || name == "-") continue;
    auto it = kNames.find(name);
    if (it == kNames.end()) throw ConfigError("unknown column name '" + std::string(name) + "'");
    if (s.columns[it->second] != -1) throw ConfigError("duplicate column '" + std::string(name) + "'");
    s.columns[it->second] = static_cast<int>(i);
  }
  for (int col : s.columns)
    if (col < 0) throw ConfigError("column mapping must name all eight fields");
  return s;
}

std::optional<EpochSeconds> parse_timestamp(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  if (text[0] >= '0' && text[0] <= '9') return parse_iso_time(text);
  return parse_foursquare_time(text);
}

std::string format_foursquare_time(EpochSeconds utc) {
  using namespace std::chrono;
  const auto d = day_number(utc);
  const year_month_day ymd{sys_days{days{d}}};
  const EpochSeconds sod = utc - d * kSecondsPerDay;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s %s %02u %02d:%02d:%02d +0000 %d",
                std::string(kWeekdays[day_of_week(utc)]).c_str(),
                std::string(kMonths[static_cast<unsigned>(ymd.month()) - 1]).c_str(),
                static_cast<unsigned>(ymd.day()), static_cast<int>(sod / 3600),
                static_cast<int>(sod / 60 % 60), static_cast<int>(sod % 60), static_cast<int>(ymd.year()));
  return buf;
}

std::string format_iso8601(EpochSeconds t) {
  using namespace std::chrono;
  const auto d = day_number(t);
  const year_month_day ymd{sys_days{days{d}}};
  const EpochSeconds sod = t - d * kSecondsPerDay;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(sod / 3600), static_cast<int>(sod / 60 % 60), static_cast<int>(sod % 60));
  return buf;
}

ParseResult parse_checkins(std::istream& source, const CheckInSchema& schema) {
  ParseResult result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(source, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto parsed = parse_row(line, schema);
    if (line_no == 1 && schema.header != CheckInSchema::Header::Absent) {
      // A header row is recognised by a non-numeric user column.
      if (schema.header == CheckInSchema::Header::Present || std::holds_alternative<std::string>(parsed)) {
        const auto fields = split_row(line, schema.delimiter);
        const auto user_col = static_cast<std::size_t>(schema.columns[CheckInSchema::User]);
        if (schema.header == CheckInSchema::Header::Present ||
            (user_col < fields.size() && !parse_number<std::int64_t>(fields[user_col])))
          continue;
      }
    }
    ++result.data_rows;
    if (auto* c = std::get_if<CheckIn>(&parsed)) {
      result.checkins.push_back(std::move(*c));
    } else {
      result.errors.push_back({line_no, std::get<std::string>(parsed)});
    }
  }
  if (result.data_rows > 0 &&
      static_cast<double>(result.errors.size()) > kMaxMalformedFraction * static_cast<double>(result.data_rows)) {
    const auto& first = result.errors.front();
    throw ParseError(std::to_string(result.errors.size()) + " of " + std::to_string(result.data_rows) +
                     " rows malformed (first at line " + std::to_string(first.line) + ": " + first.message + ")");
  }
  return result;
}

ParseResult parse_checkins_file(const std::string& path, const CheckInSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  return parse_checkins(in, schema);
}

std::string format_checkin_row(const CheckIn& c, const CheckInSchema& schema) {
  std::array<std::string, CheckInSchema::kFieldCount> by_field;
  char num[40];
  by_field[CheckInSchema::User] = std::to_string(c.user_id);
  by_field[CheckInSchema::Venue] = c.venue_id;
  by_field[CheckInSchema::CategoryId] = c.venue_category_id;
  by_field[CheckInSchema::CategoryName] = c.venue_category_name;
  std::snprintf(num, sizeof num, "%.17g", c.lat);
  by_field[CheckInSchema::Lat] = num;
  std::snprintf(num, sizeof num, "%.17g", c.lon);
  by_field[CheckInSchema::Lon] = num;
  by_field[CheckInSchema::TzOffset] = std::to_string(c.tz_offset_min);
  by_field[CheckInSchema::UtcTime] = format_foursquare_time(c.utc_time);

  const int width = *std::max_element(schema.columns.begin(), schema.columns.end()) + 1;
  std::vector<std::string> cols(static_cast<std::size_t>(width));
  for (int f = 0; f < CheckInSchema::kFieldCount; ++f) cols[schema.columns[f]] = by_field[f];
  std::string row;
  for (int i = 0; i < width; ++i) {
    if (i) row.push_back(schema.delimiter);
    const auto& v = cols[i];
    if (schema.delimiter == ',' && v.find_first_of(",\"") != std::string::npos) {
      row.push_back('"');
      for (char ch : v) {
        if (ch == '"') row.push_back('"');
        row.push_back(ch);
      }
      row.push_back('"');
    } else {
      row += v;
    }
  }
  return row;
}

std::vector<Trajectory> build_trajectories(const std::vector<CheckIn>& checkins) {
  std::vector<Trajectory> out;
  std::unordered_map<UserId, std::size_t> index;
  for (const auto& c : checkins) {
    auto [it, inserted] = index.try_emplace(c.user_id, out.size());
    if (inserted) out.push_back(Trajectory{c.user_id, {}});
    out[it->second].points.push_back(c);
  }
  for (auto& t : out)
    std::stable_sort(t.points.begin(), t.points.end(),
                     [](const CheckIn& a, const CheckIn& b) { return a.local_time < b.local_time; });
  return out;
}

double compute_rcr(const Trajectory& t) {
  if (t.points.empty()) throw DomainError("RCR of an empty trajectory is undefined");
  std::unordered_set<std::string_view> venues;
  for (const auto& p : t.points) venues.insert(p.venue_id);
  const auto total = static_cast<double>(t.points.size());
  return (total - static_cast<double>(venues.size())) / total;
}

DatasetStats dataset_stats(const std::vector<Trajectory>& trajectories) {
  DatasetStats s;
  std::unordered_map<std::string, std::size_t> categories;
  for (const auto& t : trajectories) {
    if (t.points.empty()) continue;
    ++s.user_count;
    s.per_user_rcr[t.user_id] = compute_rcr(t);
    for (const auto& p : t.points) {
      ++s.total_checkins;
      ++s.hourly_histogram[hour_of_day(p.local_time)];
      ++s.weekday_histogram[day_of_week(p.local_time)];
      ++categories[p.venue_category_name];
    }
  }
  s.top_categories.assign(categories.begin(), categories.end());
  std::sort(s.top_categories.begin(), s.top_categories.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  return s;
}

Json stats_to_json(const DatasetStats& stats, std::size_t top_n) {
  Json j;
  j["total_checkins"] = stats.total_checkins;
  j["user_count"] = stats.user_count;
  j["hourly_histogram"] = stats.hourly_histogram;
  j["weekday_histogram"] = stats.weekday_histogram;
  Json cats = Json::array();
  const std::size_t n = top_n == 0 ? stats.top_categories.size() : std::min(top_n, stats.top_categories.size());
  for (std::size_t i = 0; i < n; ++i)
    cats.push_back({{"name", stats.top_categories[i].first}, {"count", stats.top_categories[i].second}});
  j["top_categories"] = cats;

  double mean = 0.0;
  std::array<std::size_t, 10> rcr_hist{};
  for (const auto& [user, r] : stats.per_user_rcr) {
    mean += r;
    ++rcr_hist[std::min<std::size_t>(9, static_cast<std::size_t>(r * 10.0))];
  }
  if (!stats.per_user_rcr.empty()) mean /= static_cast<double>(stats.per_user_rcr.size());
  j["mean_rcr"] = mean;
  j["rcr_histogram"] = rcr_hist;
  Json per_user = Json::object();
  for (const auto& [user, r] : stats.per_user_rcr) per_user[std::to_string(user)] = r;
  j["per_user_rcr"] = per_user;
  return j;
}

}  // namespace mobility

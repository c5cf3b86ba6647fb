#include "mobility/features.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <sstream>
#include <unordered_map>

namespace mobility {

std::int64_t earliest_local_day(const std::vector<CheckIn>& checkins) {
  if (checkins.empty()) throw DomainError("no check-ins to anchor day 0");
  EpochSeconds first = std::numeric_limits<EpochSeconds>::max();
  for (const auto& c : checkins) first = std::min(first, c.local_time);
  return day_number(first);
}

EnrichResult enrich(const Trajectory& t, const GridSpec& spec, std::int64_t epoch_day0) {
  EnrichResult result;
  result.trajectory.user_id = t.user_id;
  auto& out = result.trajectory.points;
  out.reserve(t.points.size());
  for (const auto& c : t.points) {
    const auto cell = cell_of(c.position(), spec);
    if (!cell) {
      ++result.dropped_out_of_bbox;
      continue;
    }
    EnrichedPoint p;
    p.user_id = c.user_id;
    p.cell = *cell;
    p.lat = c.lat;
    p.lon = c.lon;
    p.local_time = c.local_time;
    p.day_index = static_cast<int>(day_number(c.local_time) - epoch_day0);
    p.day_of_week = day_of_week(c.local_time);
    p.local_hour = hour_of_day(c.local_time);
    p.segment = time_segment(p.local_hour);
    if (!out.empty()) {
      const auto& prev = out.back();
      p.travel_distance_m = haversine_m(prev.position(), p.position());
      p.duration_min = static_cast<double>(p.local_time - prev.local_time) / 60.0;
    }
    p.venue_id = c.venue_id;
    p.category_id = c.venue_category_id;
    p.category_name = c.venue_category_name;
    out.push_back(std::move(p));
  }
  return result;
}

std::size_t SplitDataset::train_points() const {
  std::size_t n = 0;
  for (const auto& u : users) n += u.train.size();
  return n;
}

std::size_t SplitDataset::test_points() const {
  std::size_t n = 0;
  for (const auto& u : users) n += u.test.size();
  return n;
}

SplitDataset temporal_split(const std::vector<EnrichedTrajectory>& trajectories, SplitConfig config) {
  if (config.train_days < 1 || config.test_days < 1) throw ConfigError("split windows must be at least one day");
  SplitDataset ds;
  ds.t_split = config.train_days;
  ds.test_days = config.test_days;
  const int end = config.train_days + config.test_days;
  for (const auto& t : trajectories) {
    UserSplit u;
    u.user_id = t.user_id;
    for (const auto& p : t.points) {
      if (p.day_index < 0 || p.day_index >= end) {
        ++ds.out_of_window;
      } else if (p.day_index < config.train_days) {
        u.train.push_back(p);
      } else {
        u.test.push_back(p);
      }
    }
    u.flagged = u.train.empty() || u.test.empty();
    ds.users.push_back(std::move(u));
  }
  return ds;
}

namespace {
constexpr const char* kEnrichedHeader =
    "#user_id\tlocal_time\tday_index\tday_of_week\tlocal_hour\ttime_segment\tcell_row\tcell_col\tcell_flat\t"
    "lat\tlon\ttravel_distance_m\tduration_min\tvenue_id\tcategory_id\tcategory_name";
}

void write_enriched(std::ostream& out, const std::vector<EnrichedTrajectory>& trajectories) {
  out << kEnrichedHeader << '\n';
  char buf[512];
  for (const auto& t : trajectories) {
    for (const auto& p : t.points) {
      std::snprintf(buf, sizeof buf, "%lld\t%lld\t%d\t%d\t%d\t%s\t%d\t%d\t%d\t%.17g\t%.17g\t%.17g\t%.17g\t",
                    static_cast<long long>(p.user_id), static_cast<long long>(p.local_time), p.day_index,
                    p.day_of_week, p.local_hour, p.segment == TimeSegment::Rush ? "rush" : "offpeak", p.cell.row,
                    p.cell.col, p.cell.flat, p.lat, p.lon, p.travel_distance_m, p.duration_min);
      out << buf << p.venue_id << '\t' << p.category_id << '\t' << p.category_name << '\n';
    }
  }
}

std::vector<EnrichedTrajectory> read_enriched(std::istream& in, const GridSpec& spec) {
  std::vector<EnrichedTrajectory> out;
  std::unordered_map<UserId, std::size_t> index;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto f = split(line, '\t');
    if (f.size() != 16) throw ParseError("enriched line " + std::to_string(line_no) + ": expected 16 columns");
    EnrichedPoint p;
    try {
      p.user_id = std::stoll(std::string(f[0]));
      p.local_time = std::stoll(std::string(f[1]));
      p.day_index = std::stoi(std::string(f[2]));
      p.day_of_week = std::stoi(std::string(f[3]));
      p.local_hour = std::stoi(std::string(f[4]));
      p.segment = f[5] == "rush" ? TimeSegment::Rush : TimeSegment::OffPeak;
      const int row = std::stoi(std::string(f[6]));
      const int col = std::stoi(std::string(f[7]));
      if (row < 0 || row >= spec.rows || col < 0 || col >= spec.cols) throw ParseError("cell outside grid");
      p.cell = spec.cell(row, col);
      p.lat = std::stod(std::string(f[9]));
      p.lon = std::stod(std::string(f[10]));
      p.travel_distance_m = std::stod(std::string(f[11]));
      p.duration_min = std::stod(std::string(f[12]));
    } catch (const std::exception& e) {
      throw ParseError("enriched line " + std::to_string(line_no) + ": " + e.what());
    }
    p.venue_id = std::string(f[13]);
    p.category_id = std::string(f[14]);
    p.category_name = std::string(f[15]);
    auto [it, inserted] = index.try_emplace(p.user_id, out.size());
    if (inserted) out.push_back(EnrichedTrajectory{p.user_id, {}});
    out[it->second].points.push_back(std::move(p));
  }
  return out;
}

}  // namespace mobility

#include "mobility/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <sstream>

#include "mobility/util.hpp"

namespace mobility {

namespace {

constexpr std::array<const char*, 10> kCategories{
    "Bar", "Home (private)", "Office", "Subway", "Gym / Fitness Center",
    "Coffee Shop", "Train Station", "Food & Drink Shop", "Park", "Japanese Restaurant"};

struct Venue {
  std::string id;
  double lat = 0.0;
  double lon = 0.0;
  int category = 0;
};

}  // namespace

std::vector<CheckIn> synthesize_checkins(const SynthConfig& c) {
  if (c.users < 1 || c.days < 1 || c.neighborhoods < 1 || c.venues_per_user < 1 || c.visits_per_day < 1)
    throw ConfigError("synthetic generator needs positive sizes");
  std::mt19937_64 rng(c.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<std::pair<double, double>> hoods;
  for (int h = 0; h < c.neighborhoods; ++h) {
    const double angle = 2.0 * M_PI * h / c.neighborhoods;
    hoods.emplace_back(c.center_lat + c.spread_deg * std::sin(angle), c.center_lon + c.spread_deg * std::cos(angle));
  }

  std::vector<std::vector<Venue>> venues(static_cast<std::size_t>(c.users));
  std::vector<int> hood_of(static_cast<std::size_t>(c.users));
  // itinerary[user][dow] = (hour, venue) pairs in hour order
  std::vector<std::array<std::vector<std::pair<int, int>>, 7>> itinerary(static_cast<std::size_t>(c.users));
  for (int u = 0; u < c.users; ++u) {
    const int h = u % c.neighborhoods;
    hood_of[static_cast<std::size_t>(u)] = h;
    for (int v = 0; v < c.venues_per_user; ++v) {
      Venue venue;
      venue.id = "v" + std::to_string(u) + "_" + std::to_string(v);
      venue.lat = hoods[static_cast<std::size_t>(h)].first + c.venue_jitter_deg * (2.0 * unit(rng) - 1.0);
      venue.lon = hoods[static_cast<std::size_t>(h)].second + c.venue_jitter_deg * (2.0 * unit(rng) - 1.0);
      venue.category = static_cast<int>(rng() % kCategories.size());
      venues[static_cast<std::size_t>(u)].push_back(venue);
    }
    for (int d = 0; d < 7; ++d) {
      std::vector<int> hours(24);
      for (int i = 0; i < 24; ++i) hours[static_cast<std::size_t>(i)] = i;
      std::shuffle(hours.begin() + 7, hours.begin() + 23, rng);
      std::vector<int> picked(hours.begin() + 7, hours.begin() + 7 + std::min(c.visits_per_day, 16));
      std::sort(picked.begin(), picked.end());
      for (int hr : picked)
        itinerary[static_cast<std::size_t>(u)][static_cast<std::size_t>(d)].emplace_back(
            hr, static_cast<int>(rng() % static_cast<std::uint64_t>(c.venues_per_user)));
    }
  }

  std::vector<CheckIn> out;
  const EpochSeconds offset = static_cast<EpochSeconds>(c.tz_offset_min) * 60;
  for (int day = 0; day < c.days; ++day) {
    for (int u = 0; u < c.users; ++u) {
      const EpochSeconds local_midnight = day_number(c.start_utc + offset) * kSecondsPerDay + day * kSecondsPerDay;
      const int dow = day_of_week(local_midnight);
      std::vector<std::pair<EpochSeconds, const Venue*>> visits;
      for (const auto& [hour, v] : itinerary[static_cast<std::size_t>(u)][static_cast<std::size_t>(dow)]) {
        if (unit(rng) < c.skip_probability) continue;
        const EpochSeconds minute = static_cast<EpochSeconds>(rng() % 50);
        visits.emplace_back(local_midnight + hour * 3600 + minute * 60, &venues[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)]);
      }
      if (unit(rng) < c.noise_probability) {
        // a visit to another user's venue in the same neighborhood
        const int other = hood_of[static_cast<std::size_t>(u)] + c.neighborhoods * static_cast<int>(rng() % static_cast<std::uint64_t>(std::max(1, c.users / c.neighborhoods)));
        const auto& pool = venues[static_cast<std::size_t>(std::min(other, c.users - 1))];
        const EpochSeconds t = local_midnight + static_cast<EpochSeconds>(7 * 3600 + rng() % (15 * 3600));
        visits.emplace_back(t, &pool[rng() % pool.size()]);
      }
      std::sort(visits.begin(), visits.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
      for (const auto& [local, venue] : visits) {
        CheckIn ci;
        ci.user_id = u + 1;
        ci.venue_id = venue->id;
        ci.venue_category_id = "cat" + std::to_string(venue->category);
        ci.venue_category_name = kCategories[static_cast<std::size_t>(venue->category)];
        ci.lat = venue->lat;
        ci.lon = venue->lon;
        ci.tz_offset_min = c.tz_offset_min;
        ci.local_time = local;
        ci.utc_time = local - offset;
        out.push_back(std::move(ci));
      }
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const CheckIn& a, const CheckIn& b) { return a.utc_time < b.utc_time; });
  return out;
}

std::string synthesize_tsv(const SynthConfig& config) {
  std::ostringstream out;
  const auto schema = CheckInSchema::foursquare_tsv();
  for (const auto& c : synthesize_checkins(config)) out << format_checkin_row(c, schema) << '\n';
  return out.str();
}

}  // namespace mobility

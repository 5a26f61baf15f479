#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "ranklab/errors.hpp"

namespace ranklab {

// ---------------------------------------------------------------------------
// Calendar values

/// Calendar date, stored as days since 1970-01-01.
struct Date {
  std::int32_t days = 0;
  auto operator<=>(const Date&) const = default;
};

/// UTC instant with one-second resolution.
struct Timestamp {
  std::int64_t seconds = 0;
  auto operator<=>(const Timestamp&) const = default;
};

inline Date make_date(int y, unsigned m, unsigned d) {
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{m}, day{d}};
  if (!ymd.ok()) throw ValidationError("invalid calendar date");
  return Date{static_cast<std::int32_t>(sys_days{ymd}.time_since_epoch().count())};
}

inline Date parse_date(std::string_view text) {
  int y = 0;
  unsigned m = 0, d = 0;
  const std::string s(text);
  if (std::sscanf(s.c_str(), "%4d-%2u-%2u", &y, &m, &d) != 3 || s.size() != 10)
    throw ValidationError("malformed ISO-8601 date: '" + s + "'");
  return make_date(y, m, d);
}

inline std::string format_date(Date date) {
  using namespace std::chrono;
  const year_month_day ymd{sys_days{days{date.days}}};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

/// Accepts "YYYY-MM-DDTHH:MM:SSZ" (the Z is optional).
inline Timestamp parse_timestamp(std::string_view text) {
  const std::string s(text);
  int y = 0;
  unsigned mo = 0, d = 0, h = 0, mi = 0, se = 0;
  if (std::sscanf(s.c_str(), "%4d-%2u-%2uT%2u:%2u:%2u", &y, &mo, &d, &h, &mi, &se) != 6 || s.size() < 19 ||
      (s.size() == 20 && s[19] != 'Z') || s.size() > 20 || h > 23 || mi > 59 || se > 60)
    throw ValidationError("malformed ISO-8601 timestamp: '" + s + "'");
  return Timestamp{static_cast<std::int64_t>(make_date(y, mo, d).days) * 86400 + h * 3600 + mi * 60 + se};
}

inline std::string format_timestamp(Timestamp ts) {
  const auto day = static_cast<std::int32_t>(ts.seconds >= 0 ? ts.seconds / 86400 : (ts.seconds - 86399) / 86400);
  const auto rem = ts.seconds - static_cast<std::int64_t>(day) * 86400;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%sT%02d:%02d:%02dZ", format_date(Date{day}).c_str(), static_cast<int>(rem / 3600),
                static_cast<int>(rem / 60 % 60), static_cast<int>(rem % 60));
  return buf;
}

// ---------------------------------------------------------------------------
// Categorical attributes

inline constexpr std::size_t kAmenityCount = 10;
inline constexpr std::array<std::string_view, kAmenityCount> kAmenityNames = {
    "ac", "balcony", "dishwasher", "doorman", "elevator", "exterior_view", "heating", "smoker_friendly", "tv", "terrace"};

enum class Amenity : std::uint8_t {
  ac,
  balcony,
  dishwasher,
  doorman,
  elevator,
  exterior_view,
  heating,
  smoker_friendly,
  tv,
  terrace
};

inline constexpr std::size_t kDistrictCount = 6;
inline constexpr std::array<std::string_view, kDistrictCount> kDistrictNames = {
    "sarria_gracia", "ciutat_vella_sant_marti", "eixample", "north", "sants_les_corts", "greater_barcelona"};

enum class District : std::uint8_t { sarria_gracia, ciutat_vella_sant_marti, eixample, north, sants_les_corts, greater_barcelona };

enum class Gender : std::uint8_t { female, male };
enum class OccupationPref : std::uint8_t { no_students, students_only };

inline District parse_district(std::string_view name) {
  for (std::size_t i = 0; i < kDistrictCount; ++i)
    if (kDistrictNames[i] == name) return static_cast<District>(i);
  throw ValidationError("unknown district '" + std::string(name) + "'");
}

inline std::string_view district_name(District d) { return kDistrictNames[static_cast<std::size_t>(d)]; }

inline std::size_t amenity_index(std::string_view name) {
  for (std::size_t i = 0; i < kAmenityCount; ++i)
    if (kAmenityNames[i] == name) return i;
  throw ValidationError("unknown amenity '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Entities

struct UserProfile {
  std::string user_id;
  int age = 30;
  bool female = false;
  bool student = false;
  bool worker = false;
};

struct Listing {
  std::string room_id;
  double price = 0.0;
  std::optional<int> n_tenants;
  Date first_published;
  bool registered_landlord = false;
  std::array<bool, kAmenityCount> amenities{};
  District district = District::greater_barcelona;
  std::optional<int> pref_min_age;
  std::optional<int> pref_max_age;
  std::optional<Gender> pref_gender;
  std::optional<OccupationPref> pref_occupation;

  bool has(Amenity a) const { return amenities[static_cast<std::size_t>(a)]; }
};

struct SearchResultSlot {
  std::string room_id;
  int position = 1;
  bool clicked = false;
  bool requested = false;
};

struct SearchLog {
  std::string search_id;
  std::string user_id;
  Timestamp timestamp;
  std::vector<SearchResultSlot> slots;

  std::size_t n_clicked() const {
    return static_cast<std::size_t>(std::count_if(slots.begin(), slots.end(), [](auto& s) { return s.clicked; }));
  }
  std::size_t n_requested() const {
    return static_cast<std::size_t>(std::count_if(slots.begin(), slots.end(), [](auto& s) { return s.requested; }));
  }
};

/// Right-tail caps applied when covariates are derived.
struct WinsorCaps {
  double days_since_published = std::numeric_limits<double>::infinity();
  double price = std::numeric_limits<double>::infinity();
};

struct DatasetMeta {
  double winsor_percentile = 99.0;
  WinsorCaps caps;
  int page_capacity = 20;
  District baseline_district = District::greater_barcelona;
  std::optional<std::uint64_t> seed;
  /// Generator settings and true parameters, when the data are synthetic.
  nlohmann::json generator = nlohmann::json::object();
};

/// Users, listings and searches plus id lookups. Treated as immutable once
/// `reindex()` has run.
struct Dataset {
  std::vector<UserProfile> users;
  std::vector<Listing> listings;
  std::vector<SearchLog> searches;
  DatasetMeta meta;

  void reindex() {
    user_index_.clear();
    room_index_.clear();
    user_index_.reserve(users.size());
    room_index_.reserve(listings.size());
    for (std::size_t i = 0; i < users.size(); ++i) user_index_.emplace(users[i].user_id, i);
    for (std::size_t i = 0; i < listings.size(); ++i) room_index_.emplace(listings[i].room_id, i);
  }

  std::optional<std::size_t> find_user(const std::string& id) const {
    auto it = user_index_.find(id);
    return it == user_index_.end() ? std::nullopt : std::optional(it->second);
  }
  std::optional<std::size_t> find_room(const std::string& id) const {
    auto it = room_index_.find(id);
    return it == room_index_.end() ? std::nullopt : std::optional(it->second);
  }

  const UserProfile& user(const std::string& id) const {
    auto i = find_user(id);
    if (!i) throw ValidationError("unknown user_id '" + id + "'");
    return users[*i];
  }
  const Listing& listing(const std::string& id) const {
    auto i = find_room(id);
    if (!i) throw ValidationError("unknown room_id '" + id + "'");
    return listings[*i];
  }

 private:
  std::unordered_map<std::string, std::size_t> user_index_;
  std::unordered_map<std::string, std::size_t> room_index_;
};

// ---------------------------------------------------------------------------
// Validation

enum class ViolationKind {
  duplicate_user_id,
  duplicate_room_id,
  duplicate_search_id,
  age_out_of_bounds,
  pref_age_order,
  negative_price,
  negative_tenants,
  dangling_user,
  dangling_room,
  empty_search,
  page_capacity_exceeded,
  duplicate_position,
  position_gap,
  request_without_click,
};

inline std::string_view violation_label(ViolationKind k) {
  switch (k) {
    case ViolationKind::duplicate_user_id: return "duplicate user id";
    case ViolationKind::duplicate_room_id: return "duplicate room id";
    case ViolationKind::duplicate_search_id: return "duplicate search id";
    case ViolationKind::age_out_of_bounds: return "age out of bounds";
    case ViolationKind::pref_age_order: return "preferred min age above max age";
    case ViolationKind::negative_price: return "negative price";
    case ViolationKind::negative_tenants: return "negative number of tenants";
    case ViolationKind::dangling_user: return "dangling user reference";
    case ViolationKind::dangling_room: return "dangling room reference";
    case ViolationKind::empty_search: return "empty search";
    case ViolationKind::page_capacity_exceeded: return "page capacity exceeded";
    case ViolationKind::duplicate_position: return "duplicate position";
    case ViolationKind::position_gap: return "positions do not form 1..n";
    case ViolationKind::request_without_click: return "request without click";
  }
  return "unknown";
}

struct Violation {
  ViolationKind kind;
  std::string entity;  // id of the offending user, listing or search
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool valid() const { return violations.empty(); }
  std::size_t count(ViolationKind k) const {
    return static_cast<std::size_t>(
        std::count_if(violations.begin(), violations.end(), [k](const Violation& v) { return v.kind == k; }));
  }
};

inline constexpr int kMinAge = 16;
inline constexpr int kMaxAge = 99;

/// Collects every structural violation; never throws on bad data.
inline ValidationReport validate_dataset(const Dataset& data) {
  ValidationReport report;
  auto add = [&](ViolationKind k, const std::string& id, std::string detail = {}) {
    report.violations.push_back({k, id, std::move(detail)});
  };

  std::set<std::string> user_ids, room_ids, search_ids;
  for (const auto& u : data.users) {
    if (!user_ids.insert(u.user_id).second) add(ViolationKind::duplicate_user_id, u.user_id);
    if (u.age < kMinAge || u.age > kMaxAge) add(ViolationKind::age_out_of_bounds, u.user_id, std::to_string(u.age));
  }
  for (const auto& l : data.listings) {
    if (!room_ids.insert(l.room_id).second) add(ViolationKind::duplicate_room_id, l.room_id);
    if (l.pref_min_age && l.pref_max_age && *l.pref_min_age > *l.pref_max_age)
      add(ViolationKind::pref_age_order, l.room_id);
    if (!(l.price >= 0.0)) add(ViolationKind::negative_price, l.room_id);
    if (l.n_tenants && *l.n_tenants < 0) add(ViolationKind::negative_tenants, l.room_id);
  }
  for (const auto& s : data.searches) {
    if (!search_ids.insert(s.search_id).second) add(ViolationKind::duplicate_search_id, s.search_id);
    if (!user_ids.count(s.user_id)) add(ViolationKind::dangling_user, s.search_id, s.user_id);
    if (s.slots.empty()) add(ViolationKind::empty_search, s.search_id);
    if (static_cast<int>(s.slots.size()) > data.meta.page_capacity)
      add(ViolationKind::page_capacity_exceeded, s.search_id, std::to_string(s.slots.size()));

    std::vector<int> positions;
    positions.reserve(s.slots.size());
    for (const auto& slot : s.slots) {
      if (!room_ids.count(slot.room_id)) add(ViolationKind::dangling_room, s.search_id, slot.room_id);
      if (slot.requested && !slot.clicked) add(ViolationKind::request_without_click, s.search_id, slot.room_id);
      positions.push_back(slot.position);
    }
    std::sort(positions.begin(), positions.end());
    bool duplicate = std::adjacent_find(positions.begin(), positions.end()) != positions.end();
    if (duplicate) add(ViolationKind::duplicate_position, s.search_id);
    if (!duplicate) {
      for (std::size_t i = 0; i < positions.size(); ++i) {
        if (positions[i] != static_cast<int>(i) + 1) {
          add(ViolationKind::position_gap, s.search_id);
          break;
        }
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Derived covariates

inline constexpr std::size_t kX1Size = 8;   // price, missing tenants, tenants, 5 district dummies
inline constexpr std::size_t kX2Size = 14;  // days, 3 match dummies, 10 amenities

namespace x2 {
inline constexpr std::size_t days = 0;
inline constexpr std::size_t gender_match = 1;
inline constexpr std::size_t age_match = 2;
inline constexpr std::size_t occupation_match = 3;
inline constexpr std::size_t first_amenity = 4;
}  // namespace x2

struct CovariateSpec {
  WinsorCaps caps;
  District baseline = District::greater_barcelona;

  static CovariateSpec from(const DatasetMeta& meta) { return {meta.caps, meta.baseline_district}; }
};

/// The five non-baseline districts, in declaration order.
inline std::array<District, kDistrictCount - 1> dummy_districts(District baseline) {
  std::array<District, kDistrictCount - 1> out{};
  std::size_t k = 0;
  for (std::size_t i = 0; i < kDistrictCount; ++i)
    if (static_cast<District>(i) != baseline) out[k++] = static_cast<District>(i);
  return out;
}

inline std::array<std::string, kX1Size> x1_names(District baseline = District::greater_barcelona) {
  std::array<std::string, kX1Size> names{"price", "missing_n_tenants", "n_tenants"};
  auto ds = dummy_districts(baseline);
  for (std::size_t i = 0; i < ds.size(); ++i) names[3 + i] = "district_" + std::string(district_name(ds[i]));
  return names;
}

inline std::array<std::string, kX2Size> x2_names() {
  std::array<std::string, kX2Size> names{"days_since_published", "gender_match", "age_match", "occupation_match"};
  for (std::size_t i = 0; i < kAmenityCount; ++i) names[x2::first_amenity + i] = std::string(kAmenityNames[i]);
  return names;
}

struct DerivedCovariates {
  std::array<double, kX1Size> x1{};
  std::array<double, kX2Size> x2{};
  int position = 1;
};

// An absent landlord preference counts as a match.
inline bool gender_match(const UserProfile& u, const Listing& l) {
  if (!l.pref_gender) return true;
  return (*l.pref_gender == Gender::female) == u.female;
}

inline bool age_match(const UserProfile& u, const Listing& l) {
  if (l.pref_min_age && u.age < *l.pref_min_age) return false;
  if (l.pref_max_age && u.age > *l.pref_max_age) return false;
  return true;
}

inline bool occupation_match(const UserProfile& u, const Listing& l) {
  if (!l.pref_occupation) return true;
  return *l.pref_occupation == OccupationPref::no_students ? !u.student : u.student;
}

/// Whole days between publication (midnight UTC) and the search instant.
inline std::int64_t days_since_published(const Listing& l, Timestamp search_time) {
  const std::int64_t elapsed = search_time.seconds - static_cast<std::int64_t>(l.first_published.days) * 86400;
  return elapsed >= 0 ? elapsed / 86400 : -((-elapsed + 86399) / 86400);
}

inline DerivedCovariates derive_covariates(const UserProfile& user, const Listing& listing, Timestamp search_time,
                                           int position, const CovariateSpec& spec = {}) {
  const auto days = days_since_published(listing, search_time);
  if (days < 0)
    throw ValidationError("room '" + listing.room_id + "' published after search time (inconsistent timestamps)");

  DerivedCovariates c;
  c.position = position;
  c.x1[0] = std::min(listing.price, spec.caps.price);
  c.x1[1] = listing.n_tenants ? 0.0 : 1.0;
  c.x1[2] = listing.n_tenants ? static_cast<double>(*listing.n_tenants) : 0.0;
  const auto ds = dummy_districts(spec.baseline);
  for (std::size_t i = 0; i < ds.size(); ++i) c.x1[3 + i] = listing.district == ds[i] ? 1.0 : 0.0;

  c.x2[x2::days] = std::min(static_cast<double>(days), spec.caps.days_since_published);
  c.x2[x2::gender_match] = gender_match(user, listing) ? 1.0 : 0.0;
  c.x2[x2::age_match] = age_match(user, listing) ? 1.0 : 0.0;
  c.x2[x2::occupation_match] = occupation_match(user, listing) ? 1.0 : 0.0;
  for (std::size_t a = 0; a < kAmenityCount; ++a) c.x2[x2::first_amenity + a] = listing.amenities[a] ? 1.0 : 0.0;
  return c;
}

/// Linear-interpolation percentile (p in [0, 100]) of an unsorted sample.
inline double percentile(std::vector<double> values, double p) {
  if (values.empty()) return std::numeric_limits<double>::infinity();
  std::sort(values.begin(), values.end());
  const double rank = std::clamp(p, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (rank - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

/// Right-tail caps at the given percentile over all search results.
inline WinsorCaps compute_winsor_caps(const Dataset& data, double pct) {
  std::vector<double> prices, days;
  for (const auto& s : data.searches) {
    for (const auto& slot : s.slots) {
      const auto& l = data.listing(slot.room_id);
      prices.push_back(l.price);
      days.push_back(static_cast<double>(std::max<std::int64_t>(0, days_since_published(l, s.timestamp))));
    }
  }
  WinsorCaps caps;
  caps.price = percentile(std::move(prices), pct);
  caps.days_since_published = percentile(std::move(days), pct);
  return caps;
}

}  // namespace ranklab

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>
#include <string_view>
#include <type_traits>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ranklab/config.hpp"
#include "ranklab/domain.hpp"
#include "ranklab/layout.hpp"
#include "ranklab/parallel.hpp"
#include "ranklab/rng.hpp"

namespace ranklab::synth {

/// A planted user type: its own request preferences and filter habits.
struct Segment {
  double share = 1.0;
  std::vector<double> request_params;  // request layout
  std::vector<double> filter_probs;    // per filter characteristic; sum <= 1
};

struct MarketConfig {
  std::size_t n_users = 1000;
  std::size_t n_rooms = 5000;
  double searches_per_user_mean = 50.0;
  double results_per_search_mean = 11.93;
  int page_capacity = 20;

  double age_mean = 29.44;
  double age_sd = 6.0;
  double p_female = 0.514;
  double p_student = 0.3461;
  double p_worker = 0.8103;

  double price_mean = 400.591;
  double price_sd = 102.643;
  double p_missing_tenants = 0.132;
  double tenants_mean = 1.898;
  double p_registered = 0.5;
  std::array<double, kAmenityCount> amenity_freq{0.241, 0.417, 0.187, 0.142, 0.653,
                                                 0.492, 0.470, 0.278, 0.614, 0.214};
  std::array<double, kDistrictCount> district_weights{0.130, 0.198, 0.263, 0.124, 0.160, 0.125};
  double p_age_pref = 0.8027;
  double pref_min_age_mean = 20.57;
  double pref_max_age_mean = 36.06;
  double p_pref_female = 0.2313;
  double p_pref_male = 0.0407;
  double p_pref_no_students = 0.227;
  double p_pref_students_only = 0.0268;
  District baseline_district = District::greater_barcelona;

  Date window_start = make_date(2018, 1, 1);
  int window_days = 790;
  int prepublish_days = 365;
  int user_active_days = 30;

  int recency_tier_recent = 7;   // days; top tier
  int recency_tier_fresh = 30;   // days; middle tier
  int tiebreak_epoch_days = 0;   // 0: one epoch for the whole window

  double click_rate_target = 0.043;
  double request_given_click_target = 0.095;
  double winsor_percentile = 99.0;

  std::vector<double> true_request_params = default_request_params();
  std::vector<double> true_click_params = default_click_params();
  std::vector<Segment> segments;  // empty: one segment using true_request_params

  std::uint64_t seed = 1;

  static std::vector<double> default_request_params() {
    std::vector<double> b(layout::kRequestDim, 0.0);
    b[layout::req::price] = -0.001;
    b[layout::req::gender_match] = 0.5;
    b[layout::req::first_amenity + static_cast<std::size_t>(Amenity::balcony)] = 0.1;
    return b;
  }

  static std::vector<double> default_click_params() {
    std::vector<double> b(layout::kClickDim, 0.0);
    b[layout::clk::position] = -0.07;
    b[layout::clk::position_sq] = 0.001;
    b[layout::clk::u_hat] = 0.3;
    return b;
  }

  /// Segments actually used by the generator.
  std::vector<Segment> effective_segments() const {
    if (!segments.empty()) return segments;
    return {Segment{1.0, true_request_params, std::vector<double>(layout::kFilterCount, 0.0)}};
  }

  void validate() const {
    auto fail = [](const std::string& what) { throw ValidationError("invalid market config: " + what); };
    auto unit = [&](double v, const std::string& name) {
      if (!(v >= 0.0 && v <= 1.0)) fail(name + " must lie in [0,1]");
    };
    if (n_users == 0 || n_rooms == 0) fail("n_users and n_rooms must be positive");
    if (!(searches_per_user_mean >= 1.0)) fail("searches_per_user_mean must be >= 1");
    if (page_capacity < 1) fail("page_capacity must be >= 1");
    if (!(results_per_search_mean >= 1.0 && results_per_search_mean <= page_capacity))
      fail("results_per_search_mean must lie in [1, page_capacity]");
    for (auto [v, n] : std::initializer_list<std::pair<double, const char*>>{{p_female, "p_female"}, {p_student, "p_student"}, {p_worker, "p_worker"},
                        {p_missing_tenants, "p_missing_tenants"}, {p_registered, "p_registered"},
                        {p_age_pref, "p_age_pref"}, {p_pref_female, "p_pref_female"}, {p_pref_male, "p_pref_male"},
                        {p_pref_no_students, "p_pref_no_students"},
                        {p_pref_students_only, "p_pref_students_only"}})
      unit(v, n);
    for (std::size_t a = 0; a < kAmenityCount; ++a) unit(amenity_freq[a], "amenity_freq." + std::string(kAmenityNames[a]));
    if (p_pref_female + p_pref_male > 1.0) fail("gender preference frequencies sum above 1");
    if (p_pref_no_students + p_pref_students_only > 1.0) fail("occupation preference frequencies sum above 1");
    double dw = 0.0;
    for (double w : district_weights) {
      if (!(w >= 0.0)) fail("district weights must be non-negative");
      dw += w;
    }
    if (!(dw > 0.0)) fail("district weights sum to zero");
    if (!(click_rate_target > 0.0 && click_rate_target < 1.0)) fail("click_rate_target must lie in (0,1)");
    if (!(request_given_click_target > 0.0 && request_given_click_target < 1.0))
      fail("request_given_click_target must lie in (0,1)");
    if (!(price_sd >= 0.0) || !(age_sd >= 0.0)) fail("standard deviations must be non-negative");
    if (window_days < 1 || user_active_days < 1 || user_active_days > window_days)
      fail("need 1 <= user_active_days <= window_days");
    if (true_request_params.size() != layout::kRequestDim) fail("true request params have wrong length");
    if (true_click_params.size() != layout::kClickDim) fail("true click params have wrong length");
    double share = 0.0;
    for (const auto& s : segments) {
      if (!(s.share > 0.0)) fail("segment shares must be positive");
      share += s.share;
      if (s.request_params.size() != layout::kRequestDim) fail("segment request params have wrong length");
      if (s.filter_probs.size() != layout::kFilterCount) fail("segment filter probabilities have wrong length");
      double total = 0.0;
      for (double p : s.filter_probs) {
        unit(p, "segment filter probability");
        total += p;
      }
      if (total > 1.0 + 1e-12) fail("segment filter probabilities sum above 1");
    }
  }

  /// Calls f(key, field) for every scalar setting; drives config I/O.
  template <typename F>
  void visit(F&& f) {
    f("n_users", n_users);
    f("n_rooms", n_rooms);
    f("searches_per_user_mean", searches_per_user_mean);
    f("results_per_search_mean", results_per_search_mean);
    f("page_capacity", page_capacity);
    f("age_mean", age_mean);
    f("age_sd", age_sd);
    f("p_female", p_female);
    f("p_student", p_student);
    f("p_worker", p_worker);
    f("price_mean", price_mean);
    f("price_sd", price_sd);
    f("p_missing_tenants", p_missing_tenants);
    f("tenants_mean", tenants_mean);
    f("p_registered", p_registered);
    for (std::size_t a = 0; a < kAmenityCount; ++a) f("amenity_freq." + std::string(kAmenityNames[a]), amenity_freq[a]);
    for (std::size_t d = 0; d < kDistrictCount; ++d)
      f("district_weight." + std::string(kDistrictNames[d]), district_weights[d]);
    f("p_age_pref", p_age_pref);
    f("pref_min_age_mean", pref_min_age_mean);
    f("pref_max_age_mean", pref_max_age_mean);
    f("p_pref_female", p_pref_female);
    f("p_pref_male", p_pref_male);
    f("p_pref_no_students", p_pref_no_students);
    f("p_pref_students_only", p_pref_students_only);
    f("window_days", window_days);
    f("prepublish_days", prepublish_days);
    f("user_active_days", user_active_days);
    f("recency_tier_recent_days", recency_tier_recent);
    f("recency_tier_fresh_days", recency_tier_fresh);
    f("tiebreak_epoch_days", tiebreak_epoch_days);
    f("click_rate_target", click_rate_target);
    f("request_given_click_target", request_given_click_target);
    f("winsor_percentile", winsor_percentile);
    f("seed", seed);
    const auto rn = layout::request_names(baseline_district);
    for (std::size_t j = 0; j < rn.size(); ++j) f("request." + rn[j], true_request_params[j]);
    const auto cn = layout::click_names();
    for (std::size_t j = 0; j < cn.size(); ++j) f("click." + cn[j], true_click_params[j]);
  }

  static MarketConfig from_config(const KeyValueConfig& cfg) {
    MarketConfig mc;
    if (cfg.has("district_baseline")) mc.baseline_district = parse_district(cfg.get_string("district_baseline", ""));
    if (cfg.has("window_start")) mc.window_start = parse_date(cfg.get_string("window_start", ""));
    std::vector<std::string> known{"district_baseline", "window_start", "segments"};
    mc.visit([&](const std::string& key, auto& field) {
      known.push_back(key);
      using T = std::decay_t<decltype(field)>;
      if constexpr (std::is_floating_point_v<T>) {
        field = cfg.get_double(key, field);
      } else {
        const auto v = cfg.get_int(key, static_cast<long long>(field));
        if (v < 0 && std::is_unsigned_v<T>) throw UsageError("config key '" + key + "' must be non-negative");
        field = static_cast<T>(v);
      }
    });
    const auto n_segments = cfg.get_int("segments", 0);
    const auto rn = layout::request_names(mc.baseline_district);
    const auto fn = layout::filter_names(mc.baseline_district);
    for (long long s = 0; s < n_segments; ++s) {
      const std::string prefix = "segment." + std::to_string(s) + ".";
      Segment seg;
      seg.share = cfg.get_double(prefix + "share", 1.0);
      known.push_back(prefix + "share");
      seg.request_params = mc.true_request_params;
      for (std::size_t j = 0; j < rn.size(); ++j) {
        known.push_back(prefix + "request." + rn[j]);
        seg.request_params[j] = cfg.get_double(prefix + "request." + rn[j], seg.request_params[j]);
      }
      seg.filter_probs.assign(layout::kFilterCount, 0.0);
      for (std::size_t c = 0; c < fn.size(); ++c) {
        known.push_back(prefix + "filter." + fn[c]);
        seg.filter_probs[c] = cfg.get_double(prefix + "filter." + fn[c], 0.0);
      }
      mc.segments.push_back(std::move(seg));
    }
    if (auto unknown = cfg.unknown_keys(known); !unknown.empty())
      throw UsageError("unknown market config key '" + unknown.front() + "'");
    mc.validate();
    return mc;
  }

  KeyValueConfig to_config() const {
    KeyValueConfig cfg;
    auto copy = *this;
    copy.visit([&](const std::string& key, auto& field) {
      using T = std::decay_t<decltype(field)>;
      if constexpr (std::is_floating_point_v<T>) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", field);
        cfg.set(key, buf);
      } else {
        cfg.set(key, std::to_string(field));
      }
    });
    cfg.set("district_baseline", std::string(district_name(baseline_district)));
    cfg.set("window_start", format_date(window_start));
    cfg.set("segments", std::to_string(segments.size()));
    const auto rn = layout::request_names(baseline_district);
    const auto fn = layout::filter_names(baseline_district);
    for (std::size_t s = 0; s < segments.size(); ++s) {
      const std::string prefix = "segment." + std::to_string(s) + ".";
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", segments[s].share);
      cfg.set(prefix + "share", buf);
      for (std::size_t j = 0; j < rn.size(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", segments[s].request_params[j]);
        cfg.set(prefix + "request." + rn[j], buf);
      }
      for (std::size_t c = 0; c < fn.size(); ++c) {
        if (segments[s].filter_probs[c] == 0.0) continue;
        std::snprintf(buf, sizeof buf, "%.17g", segments[s].filter_probs[c]);
        cfg.set(prefix + "filter." + fn[c], buf);
      }
    }
    return cfg;
  }

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    auto copy = *this;
    copy.visit([&](const std::string& key, auto& field) { j[key] = field; });
    j["district_baseline"] = district_name(baseline_district);
    j["window_start"] = format_date(window_start);
    j["segments"] = nlohmann::json::array();
    for (const auto& s : segments)
      j["segments"].push_back({{"share", s.share}, {"request_params", s.request_params}, {"filter_probs", s.filter_probs}});
    return j;
  }

  static MarketConfig from_json(const nlohmann::json& j) {
    KeyValueConfig cfg;
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (it.key() == "segments") continue;
      if (it.value().is_string()) {
        cfg.set(it.key(), it.value().get<std::string>());
      } else if (it.value().is_number_float()) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", it.value().get<double>());
        cfg.set(it.key(), buf);
      } else {
        cfg.set(it.key(), it.value().dump());
      }
    }
    auto mc = from_config(cfg);
    if (j.contains("segments")) {
      for (const auto& s : j["segments"])
        mc.segments.push_back({s["share"].get<double>(), s["request_params"].get<std::vector<double>>(),
                               s["filter_probs"].get<std::vector<double>>()});
    }
    mc.validate();
    return mc;
  }
};

// ---------------------------------------------------------------------------
// Status-quo ranking

inline std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// One uniform draw per room, shared by every user within an epoch.
struct StatusQuoTiebreak {
  std::uint64_t seed = 0;
  std::int64_t epoch = 0;

  double draw(std::string_view room_id) const {
    return keyed_uniform({seed, static_cast<std::uint64_t>(Stream::tiebreak), static_cast<std::uint64_t>(epoch),
                          fnv1a(room_id)});
  }
};

struct RecencyTiers {
  int recent_days = 7;
  int fresh_days = 30;

  /// 2 for the most recent listings, 0 for the oldest.
  int tier(std::int64_t days) const { return days <= recent_days ? 2 : (days <= fresh_days ? 1 : 0); }
};

/// Platform order: registered landlords first, then newer recency tiers,
/// then the shared tiebreak draw ascending.
inline std::vector<const Listing*> status_quo_rank(std::vector<const Listing*> candidates, Timestamp search_time,
                                                   const StatusQuoTiebreak& tiebreak, const RecencyTiers& tiers = {}) {
  struct Key {
    const Listing* l;
    int registered, tier;
    double draw;
  };
  std::vector<Key> keys;
  keys.reserve(candidates.size());
  for (const auto* l : candidates)
    keys.push_back({l, l->registered_landlord ? 1 : 0, tiers.tier(days_since_published(*l, search_time)),
                    tiebreak.draw(l->room_id)});
  std::sort(keys.begin(), keys.end(), [](const Key& a, const Key& b) {
    if (a.registered != b.registered) return a.registered > b.registered;
    if (a.tier != b.tier) return a.tier > b.tier;
    if (a.draw != b.draw) return a.draw < b.draw;
    return a.l->room_id < b.l->room_id;
  });
  std::vector<const Listing*> out;
  out.reserve(keys.size());
  for (const auto& k : keys) out.push_back(k.l);
  return out;
}

inline std::int64_t tiebreak_epoch(const MarketConfig& cfg, Timestamp t) {
  if (cfg.tiebreak_epoch_days <= 0) return 0;
  const auto day = t.seconds / 86400 - cfg.window_start.days;
  return day < 0 ? 0 : day / cfg.tiebreak_epoch_days;
}

// ---------------------------------------------------------------------------
// Market generation

inline std::string user_id_for(std::size_t i) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "u%06zu", i);
  return buf;
}

inline std::string room_id_for(std::size_t i) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "r%06zu", i);
  return buf;
}

inline std::string search_id_for(std::size_t i) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "s%08zu", i);
  return buf;
}

/// Segment of user i; drawn from its own stream so it can be recomputed.
inline std::size_t user_segment(const MarketConfig& cfg, std::size_t user_index) {
  if (cfg.segments.size() <= 1) return 0;
  std::vector<double> shares;
  for (const auto& s : cfg.segments) shares.push_back(s.share);
  RandomStream rng(cfg.seed, Stream::users, user_index, 1);
  return rng.categorical(shares);
}

inline std::pair<std::vector<UserProfile>, std::vector<Listing>> generate_market(const MarketConfig& cfg) {
  cfg.validate();
  std::vector<UserProfile> users(cfg.n_users);
  parallel_for(cfg.n_users, [&](std::size_t i) {
    RandomStream rng(cfg.seed, Stream::users, i);
    auto& u = users[i];
    u.user_id = user_id_for(i);
    u.age = static_cast<int>(std::clamp(std::round(rng.normal(cfg.age_mean, cfg.age_sd)), double(kMinAge), double(kMaxAge)));
    u.female = rng.bernoulli(cfg.p_female);
    u.student = rng.bernoulli(cfg.p_student);
    u.worker = rng.bernoulli(cfg.p_worker);
  });

  const int first_day = cfg.window_start.days - cfg.prepublish_days;
  const int last_day = cfg.window_start.days + cfg.window_days - 1;
  std::vector<Listing> listings(cfg.n_rooms);
  parallel_for(cfg.n_rooms, [&](std::size_t i) {
    RandomStream rng(cfg.seed, Stream::listings, i);
    auto& l = listings[i];
    l.room_id = room_id_for(i);
    l.price = std::max(0.0, rng.normal(cfg.price_mean, cfg.price_sd));
    if (!rng.bernoulli(cfg.p_missing_tenants)) l.n_tenants = static_cast<int>(rng.poisson(cfg.tenants_mean));
    l.first_published = Date{first_day + static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(last_day - first_day + 1)))};
    l.registered_landlord = rng.bernoulli(cfg.p_registered);
    for (std::size_t a = 0; a < kAmenityCount; ++a) l.amenities[a] = rng.bernoulli(cfg.amenity_freq[a]);
    l.district = static_cast<District>(rng.categorical(cfg.district_weights));
    if (rng.bernoulli(cfg.p_age_pref)) {
      const int lo = static_cast<int>(std::clamp(std::round(rng.normal(cfg.pref_min_age_mean, 2.0)), 16.0, 60.0));
      const int hi = static_cast<int>(std::clamp(std::round(rng.normal(cfg.pref_max_age_mean, 6.0)), 18.0, 99.0));
      l.pref_min_age = lo;
      l.pref_max_age = std::max(lo, hi);
    }
    const double g = rng.uniform();
    if (g < cfg.p_pref_female) l.pref_gender = Gender::female;
    else if (g < cfg.p_pref_female + cfg.p_pref_male) l.pref_gender = Gender::male;
    const double o = rng.uniform();
    if (o < cfg.p_pref_no_students) l.pref_occupation = OccupationPref::no_students;
    else if (o < cfg.p_pref_no_students + cfg.p_pref_students_only) l.pref_occupation = OccupationPref::students_only;
  });
  return {std::move(users), std::move(listings)};
}

// ---------------------------------------------------------------------------
// Behaviour under the status quo

/// Visible-information expectation of the hidden request-utility terms.
/// Covariates are drawn independently of each other and of the candidate
/// selection, so the conditional mean of each hidden component given
/// (x1, position, user) is its mean over the listing universe given the user.
class HiddenMeans {
 public:
  HiddenMeans(const std::vector<Listing>& listings, double mean_days) : mean_days_(mean_days) {
    const double n = static_cast<double>(std::max<std::size_t>(1, listings.size()));
    amenity_.fill(0.0);
    for (const auto& l : listings)
      for (std::size_t a = 0; a < kAmenityCount; ++a) amenity_[a] += l.amenities[a] ? 1.0 : 0.0;
    for (auto& v : amenity_) v /= n;
    UserProfile probe;
    for (int female = 0; female < 2; ++female) {
      probe.female = female;
      double s = 0.0;
      for (const auto& l : listings) s += gender_match(probe, l);
      gender_[female] = s / n;
    }
    for (int student = 0; student < 2; ++student) {
      probe.student = student;
      double s = 0.0;
      for (const auto& l : listings) s += occupation_match(probe, l);
      occupation_[student] = s / n;
    }
    for (int age = kMinAge; age <= kMaxAge; ++age) {
      probe.age = age;
      double s = 0.0;
      for (const auto& l : listings) s += age_match(probe, l);
      age_[age - kMinAge] = s / n;
    }
  }

  std::array<double, kX2Size> expected_x2(const UserProfile& u) const {
    std::array<double, kX2Size> e{};
    e[x2::days] = mean_days_;
    e[x2::gender_match] = gender_[u.female ? 1 : 0];
    e[x2::age_match] = age_[std::clamp(u.age, kMinAge, kMaxAge) - kMinAge];
    e[x2::occupation_match] = occupation_[u.student ? 1 : 0];
    for (std::size_t a = 0; a < kAmenityCount; ++a) e[x2::first_amenity + a] = amenity_[a];
    return e;
  }

  /// Hidden part of E[U | x1, pos] for a user with request parameters beta.
  double contribution(const UserProfile& u, std::span<const double> beta) const {
    const auto e = expected_x2(u);
    double v = 0.0;
    for (std::size_t k = 0; k < kX2Size; ++k) v += e[k] * beta[layout::request_column_of_x2(k)];
    return v;
  }

 private:
  double mean_days_;
  std::array<double, kAmenityCount> amenity_{};
  std::array<double, 2> gender_{}, occupation_{};
  std::array<double, kMaxAge - kMinAge + 1> age_{};
};

/// Per-slot quantities of a simulated log, flattened search-major.
struct SlotTruth {
  std::vector<std::size_t> offsets;    // search k occupies [offsets[k], offsets[k+1])
  std::vector<double> expected_utility;  // E[U | x1, pos] under the true parameters
  std::vector<double> utility;           // deterministic part of U
  std::vector<double> click_index;       // deterministic part of I
};

struct Behavior {
  std::vector<SearchLog> searches;
  WinsorCaps caps;
  double click_threshold = 0.0;
  double request_threshold = 0.0;
};

/// Threshold tau with mean_i P(index_i + gumbel > tau) = target.
inline double calibrate_threshold(std::span<const double> index, double target) {
  if (index.empty()) return 0.0;
  auto rate = [&](double tau) {
    const Partition part{index.size(), kReductionChunks};
    double total = 0.0;
    for (std::size_t c = 0; c < part.size(); ++c) {
      double s = 0.0;
      for (std::size_t i = part.begin(c); i < part.end(c); ++i) s += -std::expm1(-std::exp(index[i] - tau));
      total += s;
    }
    return total / static_cast<double>(index.size());
  };
  double lo = *std::min_element(index.begin(), index.end()) - 60.0;
  double hi = *std::max_element(index.begin(), index.end()) + 60.0;
  for (int it = 0; it < 200 && hi - lo > 1e-13 * std::max(1.0, std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (rate(mid) > target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Deterministic request utility, expected utility and click index of every
/// slot, under the generator's true parameters.
inline SlotTruth compute_slot_truth(const std::vector<UserProfile>& users, const std::vector<Listing>& listings,
                                    const std::vector<SearchLog>& searches, const WinsorCaps& caps,
                                    const MarketConfig& cfg) {
  std::unordered_map<std::string, std::size_t> user_index, room_index;
  for (std::size_t i = 0; i < users.size(); ++i) user_index.emplace(users[i].user_id, i);
  for (std::size_t i = 0; i < listings.size(); ++i) room_index.emplace(listings[i].room_id, i);
  auto lookup = [](const auto& index, const std::string& id) {
    auto it = index.find(id);
    if (it == index.end()) throw ValidationError("unknown id '" + id + "' in simulated log");
    return it->second;
  };

  SlotTruth truth;
  truth.offsets.assign(searches.size() + 1, 0);
  for (std::size_t k = 0; k < searches.size(); ++k) truth.offsets[k + 1] = truth.offsets[k] + searches[k].slots.size();
  const std::size_t n_slots = truth.offsets.back();

  double days_total = 0.0;
  for (const auto& s : searches)
    for (const auto& slot : s.slots)
      days_total += std::min(static_cast<double>(days_since_published(listings[lookup(room_index, slot.room_id)], s.timestamp)),
                             caps.days_since_published);
  const HiddenMeans hidden(listings, n_slots ? days_total / static_cast<double>(n_slots) : 0.0);

  const auto segments = cfg.effective_segments();
  std::vector<double> user_hidden(users.size());
  for (std::size_t i = 0; i < users.size(); ++i)
    user_hidden[i] = hidden.contribution(users[i], segments[user_segment(cfg, i)].request_params);

  const CovariateSpec spec{caps, cfg.baseline_district};
  truth.expected_utility.resize(n_slots);
  truth.utility.resize(n_slots);
  truth.click_index.resize(n_slots);
  parallel_for(searches.size(), [&](std::size_t k) {
    const auto& s = searches[k];
    const std::size_t ui = lookup(user_index, s.user_id);
    const auto& beta = segments[user_segment(cfg, ui)].request_params;
    for (std::size_t j = 0; j < s.slots.size(); ++j) {
      const auto& slot = s.slots[j];
      const auto cov = derive_covariates(users[ui], listings[lookup(room_index, slot.room_id)], s.timestamp,
                                         slot.position, spec);
      const auto row = layout::request_row(cov);
      double visible = 0.0;
      for (std::size_t c = 0; c < kX1Size; ++c) visible += row[c] * beta[c];
      const std::size_t at = truth.offsets[k] + j;
      truth.utility[at] = layout::dot(row, beta);
      truth.expected_utility[at] = visible + user_hidden[ui];
      truth.click_index[at] = layout::dot(layout::click_row(slot.position, truth.expected_utility[at]), cfg.true_click_params);
    }
  });
  return truth;
}

namespace detail {

/// Indices of the `count` largest scores (ties to the lower index).
inline std::vector<std::size_t> top_indices(const std::vector<double>& score, std::size_t count) {
  std::vector<std::size_t> idx(score.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  idx.resize(std::min(count, idx.size()));
  return idx;
}

}  // namespace detail

/// Simulates searches, clicks and requests under the status-quo ranking.
///
/// Each search draws a candidate set, orders it with status_quo_rank and
/// assigns positions 1..n. Click counts come from independent threshold
/// crossings of I + e with the threshold calibrated to the target click rate;
/// the clicked slots are then the top-k of I + e' with fresh Gumbel noise, so
/// that given the count the clicked set follows the two-tier logit exactly.
/// Requests repeat the same protocol among the clicked slots with U.
inline Behavior simulate_behavior(const std::vector<UserProfile>& users, const std::vector<Listing>& listings,
                                  const MarketConfig& cfg) {
  cfg.validate();
  const auto segments = cfg.effective_segments();
  const RecencyTiers tiers{cfg.recency_tier_recent, cfg.recency_tier_fresh};

  // Listings ordered by publication day, overall and per listing-only filter.
  std::vector<std::size_t> by_date(listings.size());
  std::iota(by_date.begin(), by_date.end(), 0);
  std::stable_sort(by_date.begin(), by_date.end(), [&](std::size_t a, std::size_t b) {
    return listings[a].first_published < listings[b].first_published;
  });
  UserProfile nobody;
  std::vector<std::vector<std::size_t>> filter_pool(layout::kFilterCount);
  for (std::size_t c = 3; c < layout::kFilterCount; ++c)
    for (auto i : by_date)
      if (layout::has_characteristic(nobody, listings[i], c, cfg.baseline_district)) filter_pool[c].push_back(i);

  // Pass 1: search counts per user, then global ids.
  std::vector<std::size_t> n_searches(users.size());
  for (std::size_t u = 0; u < users.size(); ++u) {
    RandomStream rng(cfg.seed, Stream::search_shape, u, 0);
    n_searches[u] = 1 + rng.poisson(cfg.searches_per_user_mean - 1.0);
  }
  std::vector<std::size_t> first_search(users.size() + 1, 0);
  for (std::size_t u = 0; u < users.size(); ++u) first_search[u + 1] = first_search[u] + n_searches[u];

  Behavior out;
  out.searches.resize(first_search.back());
  const double fill = cfg.page_capacity > 1
                          ? (cfg.results_per_search_mean - 1.0) / static_cast<double>(cfg.page_capacity - 1)
                          : 0.0;

  // Pass 2: search contents.
  parallel_for(users.size(), [&](std::size_t u) {
    const auto& user = users[u];
    const auto& seg = segments[user_segment(cfg, u)];
    RandomStream shape(cfg.seed, Stream::search_shape, u, 1);
    const auto span_days = static_cast<std::uint64_t>(cfg.window_days - cfg.user_active_days + 1);
    const std::int64_t start = static_cast<std::int64_t>(cfg.window_start.days) + static_cast<std::int64_t>(shape.below(span_days));
    std::vector<std::int64_t> times(n_searches[u]);
    for (auto& t : times)
      t = start * 86400 + static_cast<std::int64_t>(shape.below(static_cast<std::uint64_t>(cfg.user_active_days) * 86400));
    std::sort(times.begin(), times.end());

    std::array<std::vector<std::size_t>, 3> match_pool;
    for (std::size_t c = 0; c < 3; ++c)
      if (seg.filter_probs[c] > 0.0)
        for (auto i : by_date)
          if (layout::has_characteristic(user, listings[i], c, cfg.baseline_district)) match_pool[c].push_back(i);

    for (std::size_t j = 0; j < n_searches[u]; ++j) {
      const std::size_t g = first_search[u] + j;
      RandomStream rng(cfg.seed, Stream::candidates, g);
      auto& search = out.searches[g];
      search.search_id = search_id_for(g);
      search.user_id = user.user_id;
      search.timestamp = Timestamp{times[j]};
      const auto n_slots = 1 + rng.binomial(static_cast<std::uint64_t>(cfg.page_capacity - 1), fill);

      const std::vector<std::size_t>* pool = &by_date;
      double u_filter = rng.uniform();
      for (std::size_t c = 0; c < layout::kFilterCount; ++c) {
        if (u_filter < seg.filter_probs[c]) {
          pool = c < 3 ? &match_pool[c] : &filter_pool[c];
          break;
        }
        u_filter -= seg.filter_probs[c];
      }
      const auto day = static_cast<std::int32_t>(times[j] / 86400);
      auto eligible = [&](const std::vector<std::size_t>& p) {
        return static_cast<std::size_t>(std::upper_bound(p.begin(), p.end(), day, [&](std::int32_t d, std::size_t i) {
                                          return d < listings[i].first_published.days;
                                        }) - p.begin());
      };
      std::size_t m = eligible(*pool);
      if (m == 0) {
        pool = &by_date;
        m = eligible(by_date);
      }
      std::vector<std::size_t> picked;
      if (m <= n_slots) {
        picked.assign(pool->begin(), pool->begin() + static_cast<std::ptrdiff_t>(m));
      } else {
        while (picked.size() < n_slots) {
          const auto cand = (*pool)[rng.below(m)];
          if (std::find(picked.begin(), picked.end(), cand) == picked.end()) picked.push_back(cand);
        }
      }
      std::vector<const Listing*> candidates;
      for (auto i : picked) candidates.push_back(&listings[i]);
      const StatusQuoTiebreak tb{cfg.seed, tiebreak_epoch(cfg, search.timestamp)};
      const auto ranked = status_quo_rank(std::move(candidates), search.timestamp, tb, tiers);
      search.slots.resize(ranked.size());
      for (std::size_t p = 0; p < ranked.size(); ++p)
        search.slots[p] = SearchResultSlot{ranked[p]->room_id, static_cast<int>(p) + 1, false, false};
    }
  });

  // Winsorization caps over all generated results.
  {
    std::vector<double> prices, days;
    std::unordered_map<std::string, std::size_t> room_index;
    for (std::size_t i = 0; i < listings.size(); ++i) room_index.emplace(listings[i].room_id, i);
    for (const auto& s : out.searches)
      for (const auto& slot : s.slots) {
        const auto& l = listings[room_index.at(slot.room_id)];
        prices.push_back(l.price);
        days.push_back(static_cast<double>(days_since_published(l, s.timestamp)));
      }
    out.caps.price = percentile(std::move(prices), cfg.winsor_percentile);
    out.caps.days_since_published = percentile(std::move(days), cfg.winsor_percentile);
  }

  const auto truth = compute_slot_truth(users, listings, out.searches, out.caps, cfg);

  // Clicks.
  out.click_threshold = calibrate_threshold(truth.click_index, cfg.click_rate_target);
  parallel_for(out.searches.size(), [&](std::size_t k) {
    auto& s = out.searches[k];
    const std::size_t base = truth.offsets[k];
    RandomStream count_rng(cfg.seed, Stream::click_count, k);
    RandomStream pick_rng(cfg.seed, Stream::click_pick, k);
    std::size_t count = 0;
    std::vector<double> score(s.slots.size());
    for (std::size_t j = 0; j < s.slots.size(); ++j) {
      if (truth.click_index[base + j] + count_rng.gumbel() > out.click_threshold) ++count;
      score[j] = truth.click_index[base + j] + pick_rng.gumbel();
    }
    for (auto j : detail::top_indices(score, count)) s.slots[j].clicked = true;
  });

  // Requests among the clicked slots.
  std::vector<double> clicked_utility;
  for (std::size_t k = 0; k < out.searches.size(); ++k)
    for (std::size_t j = 0; j < out.searches[k].slots.size(); ++j)
      if (out.searches[k].slots[j].clicked) clicked_utility.push_back(truth.utility[truth.offsets[k] + j]);
  out.request_threshold = calibrate_threshold(clicked_utility, cfg.request_given_click_target);
  parallel_for(out.searches.size(), [&](std::size_t k) {
    auto& s = out.searches[k];
    const std::size_t base = truth.offsets[k];
    RandomStream count_rng(cfg.seed, Stream::request_count, k);
    RandomStream pick_rng(cfg.seed, Stream::request_pick, k);
    std::vector<std::size_t> clicked;
    std::vector<double> score;
    std::size_t count = 0;
    for (std::size_t j = 0; j < s.slots.size(); ++j) {
      if (!s.slots[j].clicked) continue;
      clicked.push_back(j);
      if (truth.utility[base + j] + count_rng.gumbel() > out.request_threshold) ++count;
      score.push_back(truth.utility[base + j] + pick_rng.gumbel());
    }
    for (auto i : detail::top_indices(score, count)) s.slots[clicked[i]].requested = true;
  });
  return out;
}

/// Market plus simulated behaviour, packaged as a dataset.
inline Dataset generate_dataset(const MarketConfig& cfg) {
  auto [users, listings] = generate_market(cfg);
  auto behavior = simulate_behavior(users, listings, cfg);
  Dataset data;
  data.users = std::move(users);
  data.listings = std::move(listings);
  data.searches = std::move(behavior.searches);
  data.meta.winsor_percentile = cfg.winsor_percentile;
  data.meta.caps = behavior.caps;
  data.meta.page_capacity = cfg.page_capacity;
  data.meta.baseline_district = cfg.baseline_district;
  data.meta.seed = cfg.seed;
  data.meta.generator = cfg.to_json();
  data.meta.generator["click_threshold"] = behavior.click_threshold;
  data.meta.generator["request_threshold"] = behavior.request_threshold;
  data.reindex();
  return data;
}

/// True E[U | x1, pos] per slot (search-major), as used by the generator.
inline std::vector<double> true_expected_utilities(const Dataset& data, const MarketConfig& cfg) {
  return compute_slot_truth(data.users, data.listings, data.searches, data.meta.caps, cfg).expected_utility;
}

}  // namespace ranklab::synth

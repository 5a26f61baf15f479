#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ranklab/domain.hpp"
#include "ranklab/errors.hpp"

// Dataset directory: users.jsonl, listings.jsonl, searches.jsonl, meta.json.

namespace ranklab::io {

using nlohmann::json;
namespace fs = std::filesystem;

inline std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

// ---------------------------------------------------------------------------
// Entity <-> JSON

inline json to_json(const UserProfile& u) {
  return {{"user_id", u.user_id}, {"age", u.age}, {"female", u.female}, {"student", u.student}, {"worker", u.worker}};
}

inline json to_json(const Listing& l) {
  json amenities = json::object();
  for (std::size_t a = 0; a < kAmenityCount; ++a) amenities[std::string(kAmenityNames[a])] = l.amenities[a];
  json j = {{"room_id", l.room_id},
            {"price", l.price},
            {"n_tenants", l.n_tenants ? json(*l.n_tenants) : json(nullptr)},
            {"first_published", format_date(l.first_published)},
            {"registered_landlord", l.registered_landlord},
            {"amenities", amenities},
            {"district", district_name(l.district)},
            {"pref_min_age", l.pref_min_age ? json(*l.pref_min_age) : json(nullptr)},
            {"pref_max_age", l.pref_max_age ? json(*l.pref_max_age) : json(nullptr)},
            {"pref_gender", nullptr},
            {"pref_occupation", nullptr}};
  if (l.pref_gender) j["pref_gender"] = *l.pref_gender == Gender::female ? "female" : "male";
  if (l.pref_occupation)
    j["pref_occupation"] = *l.pref_occupation == OccupationPref::no_students ? "no_students" : "students_only";
  return j;
}

inline json to_json(const SearchLog& s) {
  json slots = json::array();
  for (const auto& slot : s.slots)
    slots.push_back({{"room_id", slot.room_id},
                     {"position", slot.position},
                     {"clicked", slot.clicked},
                     {"requested", slot.requested}});
  return {{"search_id", s.search_id}, {"user_id", s.user_id}, {"timestamp", format_timestamp(s.timestamp)}, {"slots", slots}};
}

namespace detail {

template <typename T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) throw ValidationError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string("field '") + key + "' has the wrong type");
  }
}

template <typename T>
std::optional<T> optional_field(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return field<T>(j, key);
}

}  // namespace detail

inline UserProfile user_from_json(const json& j) {
  UserProfile u;
  u.user_id = detail::field<std::string>(j, "user_id");
  u.age = detail::field<int>(j, "age");
  u.female = detail::field<bool>(j, "female");
  u.student = detail::field<bool>(j, "student");
  u.worker = detail::field<bool>(j, "worker");
  return u;
}

inline Listing listing_from_json(const json& j) {
  Listing l;
  l.room_id = detail::field<std::string>(j, "room_id");
  l.price = detail::field<double>(j, "price");
  l.n_tenants = detail::optional_field<int>(j, "n_tenants");
  l.first_published = parse_date(detail::field<std::string>(j, "first_published"));
  l.registered_landlord = detail::field<bool>(j, "registered_landlord");
  const auto& am = j.contains("amenities") ? j.at("amenities") : throw ValidationError("missing field 'amenities'");
  if (!am.is_object()) throw ValidationError("field 'amenities' must be an object");
  for (auto it = am.begin(); it != am.end(); ++it) {
    if (!it.value().is_boolean()) throw ValidationError("amenity '" + it.key() + "' must be boolean");
    l.amenities[amenity_index(it.key())] = it.value().get<bool>();
  }
  l.district = parse_district(detail::field<std::string>(j, "district"));
  l.pref_min_age = detail::optional_field<int>(j, "pref_min_age");
  l.pref_max_age = detail::optional_field<int>(j, "pref_max_age");
  if (auto g = detail::optional_field<std::string>(j, "pref_gender")) {
    if (*g == "female") l.pref_gender = Gender::female;
    else if (*g == "male") l.pref_gender = Gender::male;
    else throw ValidationError("unknown pref_gender '" + *g + "'");
  }
  if (auto o = detail::optional_field<std::string>(j, "pref_occupation")) {
    if (*o == "no_students") l.pref_occupation = OccupationPref::no_students;
    else if (*o == "students_only") l.pref_occupation = OccupationPref::students_only;
    else throw ValidationError("unknown pref_occupation '" + *o + "'");
  }
  return l;
}

inline SearchLog search_from_json(const json& j) {
  SearchLog s;
  s.search_id = detail::field<std::string>(j, "search_id");
  s.user_id = detail::field<std::string>(j, "user_id");
  s.timestamp = parse_timestamp(detail::field<std::string>(j, "timestamp"));
  if (!j.contains("slots") || !j.at("slots").is_array()) throw ValidationError("field 'slots' must be an array");
  for (const auto& sj : j.at("slots"))
    s.slots.push_back({detail::field<std::string>(sj, "room_id"), detail::field<int>(sj, "position"),
                       detail::field<bool>(sj, "clicked"), detail::field<bool>(sj, "requested")});
  return s;
}

// ---------------------------------------------------------------------------
// JSONL

template <typename T>
std::string to_jsonl(const std::vector<T>& items) {
  std::string out;
  for (const auto& item : items) {
    out += to_json(item).dump();
    out += '\n';
  }
  return out;
}

/// Parses one JSON object per non-blank line; errors carry file:line.
template <typename Fn>
void for_each_jsonl(const fs::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      fn(json::parse(line), lineno);
    } catch (const json::parse_error& e) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": malformed JSON: " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

template <typename T, typename Parse>
std::vector<T> read_jsonl(const fs::path& path, Parse&& parse) {
  std::vector<T> out;
  for_each_jsonl(path, [&](const json& j, std::size_t) { out.push_back(parse(j)); });
  return out;
}

// ---------------------------------------------------------------------------
// meta.json

inline json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json meta_to_json(const DatasetMeta& m) {
  json j = {{"winsor_percentile", m.winsor_percentile},
            {"winsor_caps",
             {{"days_since_published", finite_or_null(m.caps.days_since_published)},
              {"price", finite_or_null(m.caps.price)}}},
            {"page_capacity", m.page_capacity},
            {"baseline_district", district_name(m.baseline_district)},
            {"seed", m.seed ? json(*m.seed) : json(nullptr)}};
  if (!m.generator.empty()) j["generator"] = m.generator;
  return j;
}

inline DatasetMeta meta_from_json(const json& j, bool* has_caps = nullptr) {
  DatasetMeta m;
  m.winsor_percentile = j.value("winsor_percentile", 99.0);
  m.page_capacity = j.value("page_capacity", 20);
  if (j.contains("baseline_district")) m.baseline_district = parse_district(j.at("baseline_district").get<std::string>());
  if (j.contains("seed") && !j.at("seed").is_null()) m.seed = j.at("seed").get<std::uint64_t>();
  bool caps = false;
  if (j.contains("winsor_caps") && j.at("winsor_caps").is_object()) {
    const auto& c = j.at("winsor_caps");
    if (c.contains("days_since_published") && !c.at("days_since_published").is_null()) {
      m.caps.days_since_published = c.at("days_since_published").get<double>();
      caps = true;
    }
    if (c.contains("price") && !c.at("price").is_null()) {
      m.caps.price = c.at("price").get<double>();
      caps = true;
    }
  }
  if (j.contains("generator")) m.generator = j.at("generator");
  if (has_caps) *has_caps = caps;
  return m;
}

// ---------------------------------------------------------------------------
// Dataset directory

inline void write_dataset(const Dataset& data, const fs::path& dir) {
  ensure_directory(dir);
  write_text_file(dir / "users.jsonl", to_jsonl(data.users));
  write_text_file(dir / "listings.jsonl", to_jsonl(data.listings));
  write_text_file(dir / "searches.jsonl", to_jsonl(data.searches));
  write_text_file(dir / "meta.json", meta_to_json(data.meta).dump(2) + "\n");
}

inline std::vector<SearchLog> read_searches(const fs::path& path) { return read_jsonl<SearchLog>(path, search_from_json); }

/// Loads a dataset directory. Winsor caps are computed from the data when
/// meta.json does not record them.
inline Dataset read_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("dataset directory '" + dir.string() + "' does not exist");
  Dataset data;
  bool has_caps = false;
  const auto meta_path = dir / "meta.json";
  if (fs::exists(meta_path)) {
    try {
      data.meta = meta_from_json(json::parse(read_text_file(meta_path)), &has_caps);
    } catch (const json::exception& e) {
      throw ValidationError(meta_path.string() + ": " + e.what());
    }
  }
  data.users = read_jsonl<UserProfile>(dir / "users.jsonl", user_from_json);
  data.listings = read_jsonl<Listing>(dir / "listings.jsonl", listing_from_json);
  data.searches = read_searches(dir / "searches.jsonl");
  data.reindex();
  if (!has_caps) data.meta.caps = compute_winsor_caps(data, data.meta.winsor_percentile);
  return data;
}

}  // namespace ranklab::io

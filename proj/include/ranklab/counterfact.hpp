#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "ranklab/domain.hpp"
#include "ranklab/errors.hpp"
#include "ranklab/estimate.hpp"
#include "ranklab/parallel.hpp"
#include "ranklab/rng.hpp"
#include "ranklab/synth.hpp"

namespace ranklab::counterfact {

enum class PolicyKind { status_quo, personalized, random, blend };

struct RankingPolicy {
  PolicyKind kind = PolicyKind::status_quo;
  double alpha = 0.0;  // blend only

  static RankingPolicy status_quo() { return {PolicyKind::status_quo, 0.0}; }
  static RankingPolicy personalized() { return {PolicyKind::personalized, 1.0}; }
  static RankingPolicy random() { return {PolicyKind::random, 0.0}; }
  static RankingPolicy blend(double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("blend weight must lie in [0,1]");
    return {PolicyKind::blend, alpha};
  }

  /// statusquo | personalized | random | blend:ALPHA
  static RankingPolicy parse(const std::string& text) {
    if (text == "statusquo" || text == "status_quo") return status_quo();
    if (text == "personalized") return personalized();
    if (text == "random") return random();
    if (text.rfind("blend:", 0) == 0) {
      const std::string a = text.substr(6);
      double alpha = 0.0;
      auto [ptr, ec] = std::from_chars(a.data(), a.data() + a.size(), alpha);
      if (a.empty() || ec != std::errc{} || ptr != a.data() + a.size() || !std::isfinite(alpha))
        throw ValidationError("malformed blend weight '" + a + "'");
      return blend(alpha);
    }
    throw UsageError("unknown policy '" + text + "' (expected statusquo, personalized, random or blend:ALPHA)");
  }

  std::string label() const {
    switch (kind) {
      case PolicyKind::status_quo: return "statusquo";
      case PolicyKind::personalized: return "personalized";
      case PolicyKind::random: return "random";
      case PolicyKind::blend: {
        char buf[48];
        std::snprintf(buf, sizeof buf, "blend:%.17g", alpha);
        return buf;
      }
    }
    return {};
  }

  bool uses_utilities() const { return kind == PolicyKind::personalized || kind == PolicyKind::blend; }
};

// ---------------------------------------------------------------------------
// Orders

/// Slot indices sorted by Û descending; equal utilities fall back to the tie
/// keys (room identity) ascending.
template <typename TieKey>
std::vector<std::size_t> preference_order(std::span<const double> utilities, TieKey&& tie_key) {
  std::vector<std::size_t> order(utilities.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (utilities[a] != utilities[b]) return utilities[a] > utilities[b];
    const auto ka = tie_key(a), kb = tie_key(b);
    if (ka != kb) return ka < kb;
    return a < b;
  });
  return order;
}

/// Uniform random order of n slots from the stream of one search.
inline std::vector<std::size_t> random_order(std::size_t n, std::uint64_t seed, std::uint64_t search_key) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  RandomStream rng(seed, Stream::rerank, search_key);
  rng.shuffle(order);
  return order;
}

/// rank[slot] (1-based) from a display order.
inline std::vector<std::size_t> ranks_of(const std::vector<std::size_t>& order) {
  std::vector<std::size_t> rank(order.size());
  for (std::size_t p = 0; p < order.size(); ++p) rank[order[p]] = p + 1;
  return rank;
}

/// Display order for score = alpha * pref_rank + (1 - alpha) * random_rank,
/// ascending, ties to the lower random rank.
inline std::vector<std::size_t> blend_order(std::span<const std::size_t> pref_ranks,
                                            std::span<const std::size_t> random_ranks, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("blend weight must lie in [0,1]");
  if (pref_ranks.size() != random_ranks.size()) throw ValidationError("rank lists differ in length");
  const std::size_t n = pref_ranks.size();
  std::vector<double> score(n);
  for (std::size_t i = 0; i < n; ++i)
    score[i] = alpha * static_cast<double>(pref_ranks[i]) + (1.0 - alpha) * static_cast<double>(random_ranks[i]);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (score[a] != score[b]) return score[a] < score[b];
    return random_ranks[a] < random_ranks[b];
  });
  return order;
}

/// New 1-based position for each slot of one search.
/// `positions` are the observed positions, `utilities` Û per slot and
/// `tie_key(i)` the room identity of slot i for deterministic ties.
template <typename TieKey>
std::vector<int> rerank(std::span<const int> positions, std::span<const double> utilities, const RankingPolicy& policy,
                        std::uint64_t seed, std::uint64_t search_key, TieKey&& tie_key) {
  const std::size_t n = positions.size();
  if (policy.uses_utilities() && utilities.size() != n)
    throw ValidationError("personalised ranking needs an expected utility for every slot");
  std::vector<std::size_t> order;
  switch (policy.kind) {
    case PolicyKind::status_quo: return {positions.begin(), positions.end()};
    case PolicyKind::personalized: order = preference_order(utilities, tie_key); break;
    case PolicyKind::random: order = random_order(n, seed, search_key); break;
    case PolicyKind::blend: {
      const auto pref = ranks_of(preference_order(utilities, tie_key));
      const auto rnd = ranks_of(random_order(n, seed, search_key));
      order = blend_order(pref, rnd, policy.alpha);
      break;
    }
  }
  std::vector<int> out(n);
  for (std::size_t p = 0; p < n; ++p) out[order[p]] = static_cast<int>(p) + 1;
  return out;
}

// ---------------------------------------------------------------------------
// Choice prediction without shocks

struct PredictedChoices {
  std::vector<bool> clicked;
  std::vector<bool> requested;
};

/// Top-k slots by click index I(pos, Û) (ties: higher Û, then room), then the
/// top-r of those by Û (ties: room).
template <typename TieKey>
PredictedChoices predict_choices(std::span<const int> positions, std::span<const double> utilities,
                                 const estimate::ClickParams& click, std::size_t k, std::size_t r, TieKey&& tie_key) {
  const std::size_t n = positions.size();
  if (r > k || k > n) throw ValidationError("choice counts must satisfy r <= k <= n");
  std::vector<double> index(n);
  for (std::size_t i = 0; i < n; ++i) index[i] = click.index(positions[i], utilities[i]);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (index[a] != index[b]) return index[a] > index[b];
    if (utilities[a] != utilities[b]) return utilities[a] > utilities[b];
    const auto ka = tie_key(a), kb = tie_key(b);
    if (ka != kb) return ka < kb;
    return a < b;
  });
  PredictedChoices out{std::vector<bool>(n, false), std::vector<bool>(n, false)};
  std::vector<std::size_t> clicked(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  for (auto i : clicked) out.clicked[i] = true;
  std::sort(clicked.begin(), clicked.end(), [&](std::size_t a, std::size_t b) {
    if (utilities[a] != utilities[b]) return utilities[a] > utilities[b];
    const auto ka = tie_key(a), kb = tie_key(b);
    if (ka != kb) return ka < kb;
    return a < b;
  });
  for (std::size_t i = 0; i < r; ++i) out.requested[clicked[i]] = true;
  return out;
}

// ---------------------------------------------------------------------------
// Prepared logs

/// Search logs flattened for repeated counterfactual runs. Rooms are indexed
/// by their rank in the sorted id list so index order equals id order.
struct PreparedLogs {
  std::vector<std::string> search_ids, user_ids;
  std::vector<Timestamp> timestamps;
  std::vector<std::uint64_t> search_keys;
  std::vector<std::size_t> offsets{0};
  std::vector<std::uint32_t> room;        // per slot, index into room_ids
  std::vector<int> position;              // observed
  std::vector<double> u_hat;              // per slot
  std::vector<std::uint32_t> n_clicks, n_requests;
  std::vector<std::string> room_ids;      // every listing of the dataset, sorted

  std::size_t n_searches() const { return search_ids.size(); }
  std::size_t size(std::size_t k) const { return offsets[k + 1] - offsets[k]; }
};

inline PreparedLogs prepare_logs(const Dataset& data, std::vector<double> utilities) {
  PreparedLogs p;
  for (const auto& l : data.listings) p.room_ids.push_back(l.room_id);
  std::sort(p.room_ids.begin(), p.room_ids.end());
  std::unordered_map<std::string, std::uint32_t> index;
  for (std::size_t i = 0; i < p.room_ids.size(); ++i) index.emplace(p.room_ids[i], static_cast<std::uint32_t>(i));
  for (const auto& s : data.searches) {
    p.search_ids.push_back(s.search_id);
    p.user_ids.push_back(s.user_id);
    p.timestamps.push_back(s.timestamp);
    p.search_keys.push_back(synth::fnv1a(s.search_id));
    for (const auto& slot : s.slots) {
      auto it = index.find(slot.room_id);
      if (it == index.end()) throw ValidationError("search '" + s.search_id + "' references unknown room '" + slot.room_id + "'");
      p.room.push_back(it->second);
      p.position.push_back(slot.position);
    }
    p.offsets.push_back(p.room.size());
    p.n_clicks.push_back(static_cast<std::uint32_t>(s.n_clicked()));
    p.n_requests.push_back(static_cast<std::uint32_t>(s.n_requested()));
  }
  if (utilities.size() != p.room.size()) throw ValidationError("need one expected utility per search result");
  p.u_hat = std::move(utilities);
  return p;
}

// ---------------------------------------------------------------------------
// Garbling

enum class GarbleMode { universe, permutation };

inline GarbleMode parse_garble_mode(const std::string& s) {
  if (s == "universe") return GarbleMode::universe;
  if (s == "permutation") return GarbleMode::permutation;
  throw UsageError("unknown garble mode '" + s + "' (expected universe or permutation)");
}

inline std::string_view garble_mode_name(GarbleMode m) { return m == GarbleMode::universe ? "universe" : "permutation"; }

/// Congestion ids per slot after relabelling room identities across searches.
///
/// universe: each search draws distinct ids uniformly from `universe`.
/// permutation: all slot ids of the logs are shuffled together and dealt back,
/// keeping each room's exposure count; within-search duplicates are repaired
/// by swaps.
inline std::vector<std::uint32_t> garble_rooms(const std::vector<std::size_t>& offsets,
                                               const std::vector<std::uint32_t>& rooms,
                                               const std::vector<std::uint64_t>& search_keys,
                                               const std::vector<std::uint32_t>& universe, std::uint64_t seed,
                                               GarbleMode mode = GarbleMode::universe) {
  const std::size_t n_searches = offsets.size() - 1;
  std::vector<std::uint32_t> out(rooms.size());
  if (mode == GarbleMode::universe) {
    std::size_t largest = 0;
    for (std::size_t k = 0; k < n_searches; ++k) largest = std::max(largest, offsets[k + 1] - offsets[k]);
    if (universe.size() < largest) throw ValidationError("room universe is smaller than the largest search");
    parallel_for(n_searches, [&](std::size_t k) {
      RandomStream rng(seed, Stream::garble, search_keys[k]);
      const std::size_t n = offsets[k + 1] - offsets[k];
      // partial Fisher-Yates over a sparse view of the universe
      std::unordered_map<std::size_t, std::size_t> swapped;
      auto at = [&](std::size_t i) {
        auto it = swapped.find(i);
        return it == swapped.end() ? i : it->second;
      };
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i + rng.below(universe.size() - i);
        const std::size_t vi = at(i), vj = at(j);
        swapped[i] = vj;
        swapped[j] = vi;
        out[offsets[k] + i] = universe[vj];
      }
    });
    return out;
  }

  out = rooms;
  RandomStream rng(seed, Stream::garble, 0xffffffffffffffffULL);
  rng.shuffle(out);
  std::vector<std::size_t> search_of(rooms.size());
  for (std::size_t k = 0; k < n_searches; ++k)
    for (std::size_t i = offsets[k]; i < offsets[k + 1]; ++i) search_of[i] = k;
  auto occurs = [&](std::size_t k, std::uint32_t id, std::size_t except) {
    for (std::size_t i = offsets[k]; i < offsets[k + 1]; ++i)
      if (i != except && out[i] == id) return true;
    return false;
  };
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::size_t k = search_of[i];
    if (!occurs(k, out[i], i)) continue;
    bool fixed = false;
    for (int attempt = 0; attempt < 10000 && !fixed; ++attempt) {
      const std::size_t j = rng.below(out.size());
      const std::size_t kj = search_of[j];
      if (kj == k || occurs(k, out[j], i) || occurs(kj, out[i], j)) continue;
      std::swap(out[i], out[j]);
      fixed = true;
    }
    if (!fixed) throw ValidationError("cannot relabel rooms without within-search duplicates");
  }
  return out;
}

/// Id-level wrapper: relabelled room id per slot of every search.
inline std::vector<std::vector<std::string>> garble_rooms(const std::vector<SearchLog>& searches,
                                                          const std::vector<std::string>& room_universe,
                                                          std::uint64_t seed, GarbleMode mode = GarbleMode::universe) {
  std::vector<std::string> ids = room_universe;
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  std::unordered_map<std::string, std::uint32_t> index;
  for (const auto& s : searches)
    for (const auto& slot : s.slots)
      if (!std::binary_search(ids.begin(), ids.end(), slot.room_id)) ids.push_back(slot.room_id);
  for (std::size_t i = 0; i < ids.size(); ++i) index.emplace(ids[i], static_cast<std::uint32_t>(i));
  std::vector<std::size_t> offsets{0};
  std::vector<std::uint32_t> rooms;
  std::vector<std::uint64_t> keys;
  for (const auto& s : searches) {
    for (const auto& slot : s.slots) rooms.push_back(index.at(slot.room_id));
    offsets.push_back(rooms.size());
    keys.push_back(synth::fnv1a(s.search_id));
  }
  std::vector<std::uint32_t> universe;
  for (const auto& id : room_universe) universe.push_back(index.at(id));
  std::sort(universe.begin(), universe.end());
  universe.erase(std::unique(universe.begin(), universe.end()), universe.end());
  const auto garbled = garble_rooms(offsets, rooms, keys, universe, seed, mode);
  std::vector<std::vector<std::string>> out(searches.size());
  for (std::size_t k = 0; k < searches.size(); ++k)
    for (std::size_t i = offsets[k]; i < offsets[k + 1]; ++i) out[k].push_back(ids[garbled[i]]);
  return out;
}

// ---------------------------------------------------------------------------
// Counterfactual runs

struct Provenance {
  RankingPolicy policy;
  std::uint64_t seed = 0;
  bool garbled = false;
  GarbleMode garble_mode = GarbleMode::universe;
  std::string blend_rule = "score = alpha*pref_rank + (1-alpha)*random_rank; ascending; ties by random_rank";
};

/// Outcome of one policy on prepared logs, per slot.
struct CounterfactualLog {
  Provenance provenance;
  std::vector<int> position;
  std::vector<std::uint8_t> clicked, requested;
  std::vector<std::uint32_t> congestion_room;  // == room unless garbled
};

inline CounterfactualLog run_policy(const PreparedLogs& logs, const estimate::ClickParams& click,
                                    const RankingPolicy& policy, std::uint64_t seed, bool garble = false,
                                    GarbleMode mode = GarbleMode::universe) {
  CounterfactualLog out;
  out.provenance = {policy, seed, garble, mode};
  const std::size_t n = logs.room.size();
  out.position.resize(n);
  out.clicked.assign(n, 0);
  out.requested.assign(n, 0);
  parallel_for(logs.n_searches(), [&](std::size_t k) {
    const std::size_t b = logs.offsets[k], m = logs.size(k);
    const std::span<const int> pos(logs.position.data() + b, m);
    const std::span<const double> u(logs.u_hat.data() + b, m);
    auto tie = [&](std::size_t i) { return logs.room[b + i]; };
    const auto new_pos = rerank(pos, u, policy, seed, logs.search_keys[k], tie);
    const auto choice = predict_choices(new_pos, u, click, logs.n_clicks[k], logs.n_requests[k], tie);
    for (std::size_t i = 0; i < m; ++i) {
      out.position[b + i] = new_pos[i];
      out.clicked[b + i] = choice.clicked[i];
      out.requested[b + i] = choice.requested[i];
    }
  });
  if (garble) {
    std::vector<std::uint32_t> universe(logs.room_ids.size());
    std::iota(universe.begin(), universe.end(), 0u);
    out.congestion_room = garble_rooms(logs.offsets, logs.room, logs.search_keys, universe, seed, mode);
  } else {
    out.congestion_room = logs.room;
  }
  return out;
}

inline nlohmann::json provenance_to_json(const Provenance& p) {
  nlohmann::json j = {{"policy", p.policy.label()}, {"seed", p.seed}, {"garbled", p.garbled}};
  if (p.policy.kind == PolicyKind::blend) {
    j["alpha"] = p.policy.alpha;
    j["blend_rule"] = p.blend_rule;
  }
  if (p.garbled) j["garble_mode"] = garble_mode_name(p.garble_mode);
  return j;
}

/// searches_cf.jsonl: a provenance header line, then one search per line with
/// slots in their new display order.
inline std::string counterfactual_jsonl(const PreparedLogs& logs, const CounterfactualLog& cf) {
  std::string out = nlohmann::json{{"provenance", provenance_to_json(cf.provenance)}}.dump() + "\n";
  for (std::size_t k = 0; k < logs.n_searches(); ++k) {
    const std::size_t b = logs.offsets[k], m = logs.size(k);
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto x, auto y) { return cf.position[b + x] < cf.position[b + y]; });
    nlohmann::json slots = nlohmann::json::array();
    for (auto i : order) {
      nlohmann::json s = {{"room_id", logs.room_ids[logs.room[b + i]]},
                          {"position", cf.position[b + i]},
                          {"clicked", cf.clicked[b + i] != 0},
                          {"requested", cf.requested[b + i] != 0},
                          {"u_hat", logs.u_hat[b + i]}};
      if (cf.provenance.garbled) s["congestion_id"] = logs.room_ids[cf.congestion_room[b + i]];
      slots.push_back(std::move(s));
    }
    out += nlohmann::json{{"search_id", logs.search_ids[k]},
                          {"user_id", logs.user_ids[k]},
                          {"timestamp", format_timestamp(logs.timestamps[k])},
                          {"slots", slots}}
               .dump();
    out += '\n';
  }
  return out;
}

}  // namespace ranklab::counterfact

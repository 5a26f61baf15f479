#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "ranklab/domain.hpp"
#include "ranklab/errors.hpp"
#include "ranklab/estimate.hpp"
#include "ranklab/layout.hpp"
#include "ranklab/parallel.hpp"
#include "ranklab/rng.hpp"

namespace ranklab::cluster {

/// Row-major n x dim matrix of per-user filter percentages.
struct FilterFeatures {
  std::size_t dim = layout::kFilterCount;
  std::vector<std::string> names;
  std::vector<std::string> user_ids;
  std::vector<double> values;
  std::vector<std::string> warnings;

  std::size_t size() const { return user_ids.size(); }
  std::span<const double> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
};

/// Percentage of each user's searches (with at least `min_slots` results) in
/// which every result has the characteristic.
inline FilterFeatures filter_features(const Dataset& data, std::size_t min_slots = 2) {
  FilterFeatures f;
  const District baseline = data.meta.baseline_district;
  f.names = layout::filter_names(baseline);
  const std::size_t d = f.dim;
  for (const auto& u : data.users) f.user_ids.push_back(u.user_id);
  f.values.assign(f.user_ids.size() * d, 0.0);
  std::vector<std::size_t> qualifying(f.user_ids.size(), 0);

  std::vector<std::vector<std::size_t>> by_user(data.users.size());
  for (std::size_t k = 0; k < data.searches.size(); ++k) {
    auto u = data.find_user(data.searches[k].user_id);
    if (!u) throw ValidationError("search '" + data.searches[k].search_id + "' references unknown user");
    by_user[*u].push_back(k);
  }
  parallel_for(data.users.size(), [&](std::size_t u) {
    const auto& user = data.users[u];
    for (auto k : by_user[u]) {
      const auto& s = data.searches[k];
      if (s.slots.size() < std::max<std::size_t>(min_slots, 1)) continue;
      ++qualifying[u];
      for (std::size_t c = 0; c < d; ++c) {
        bool all = true;
        for (const auto& slot : s.slots)
          if (!layout::has_characteristic(user, data.listing(slot.room_id), c, baseline)) {
            all = false;
            break;
          }
        if (all) f.values[u * d + c] += 1.0;
      }
    }
    if (qualifying[u])
      for (std::size_t c = 0; c < d; ++c) f.values[u * d + c] *= 100.0 / static_cast<double>(qualifying[u]);
  });
  for (std::size_t u = 0; u < f.user_ids.size(); ++u)
    if (!qualifying[u]) f.warnings.push_back("user '" + f.user_ids[u] + "' has no qualifying searches; zero features");
  return f;
}

// ---------------------------------------------------------------------------
// k-medoids (PAM)

inline double l1(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

struct ClusterAssignment {
  std::size_t k = 0;
  std::vector<std::size_t> medoids;     // point indices, one per cluster
  std::vector<std::size_t> assignment;  // cluster per point
  std::vector<double> distance;         // to the assigned medoid
  double total_cost = 0.0;
  std::vector<double> cost_history;     // after BUILD, then after each swap
  std::size_t swaps = 0;
  bool converged = false;
};

/// Nearest medoid per point, ties to the lowest cluster index.
inline void assign_points(std::span<const double> x, std::size_t dim, ClusterAssignment& a) {
  const std::size_t n = x.size() / dim;
  a.assignment.assign(n, 0);
  a.distance.assign(n, 0.0);
  parallel_for(n, [&](std::size_t i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < a.medoids.size(); ++c) {
      const double dist = l1(x.subspan(i * dim, dim), x.subspan(a.medoids[c] * dim, dim));
      if (dist < best) {
        best = dist;
        a.assignment[i] = c;
      }
    }
    a.distance[i] = best;
  });
  a.total_cost = 0.0;
  for (double dist : a.distance) a.total_cost += dist;
}

/// PAM with L1 distance: greedy BUILD, then the best improving single swap
/// until none improves or `max_iters` swaps. The seed only orders swaps of
/// exactly equal cost.
inline ClusterAssignment k_medoids(std::span<const double> x, std::size_t dim, std::size_t k, std::uint64_t seed,
                                   std::size_t max_iters = 100) {
  if (dim == 0 || x.size() % dim != 0) throw ValidationError("feature matrix has a ragged shape");
  const std::size_t n = x.size() / dim;
  if (k < 1) throw ValidationError("k must be at least 1");
  if (k > n) throw ValidationError("k = " + std::to_string(k) + " exceeds the number of points (" + std::to_string(n) + ")");
  for (double v : x)
    if (!std::isfinite(v)) throw ValidationError("features must be finite");
  auto dist = [&](std::size_t i, std::size_t j) { return l1(x.subspan(i * dim, dim), x.subspan(j * dim, dim)); };

  ClusterAssignment a;
  a.k = k;
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::vector<std::uint8_t> is_medoid(n, 0);

  // BUILD
  for (std::size_t step = 0; step < k; ++step) {
    std::vector<double> gain(n, -std::numeric_limits<double>::infinity());
    parallel_for(n, [&](std::size_t h) {
      if (is_medoid[h]) return;
      double total = 0.0;
      for (std::size_t j = 0; j < n; ++j) total += std::min(nearest[j], dist(h, j));
      gain[h] = -total;
    });
    std::size_t best = n;
    for (std::size_t h = 0; h < n; ++h)
      if (!is_medoid[h] && (best == n || gain[h] > gain[best])) best = h;
    is_medoid[best] = 1;
    a.medoids.push_back(best);
    for (std::size_t j = 0; j < n; ++j) nearest[j] = std::min(nearest[j], dist(best, j));
  }
  assign_points(x, dim, a);
  a.cost_history.push_back(a.total_cost);

  // SWAP
  for (a.swaps = 0; a.swaps < max_iters;) {
    // distance to nearest and second-nearest medoid for every point
    std::vector<double> d1(n), d2(n);
    std::vector<std::size_t> c1(n);
    parallel_for(n, [&](std::size_t j) {
      double b1 = std::numeric_limits<double>::infinity(), b2 = b1;
      std::size_t i1 = 0;
      for (std::size_t c = 0; c < k; ++c) {
        const double dd = dist(a.medoids[c], j);
        if (dd < b1) {
          b2 = b1;
          b1 = dd;
          i1 = c;
        } else if (dd < b2) {
          b2 = dd;
        }
      }
      d1[j] = b1;
      d2[j] = b2;
      c1[j] = i1;
    });
    // delta[c * n + h]: cost change of replacing medoid c by point h
    std::vector<double> delta(k * n, std::numeric_limits<double>::infinity());
    parallel_for(n, [&](std::size_t h) {
      if (is_medoid[h]) return;
      std::vector<double> dc(k, 0.0);
      for (std::size_t j = 0; j < n; ++j) {
        const double dhj = dist(h, j);
        for (std::size_t c = 0; c < k; ++c) {
          const double current = d1[j];
          const double without = c1[j] == c ? d2[j] : d1[j];
          dc[c] += std::min(without, dhj) - current;
        }
      }
      for (std::size_t c = 0; c < k; ++c) delta[c * n + h] = dc[c];
    });
    double best = 0.0, best_tie = 2.0;
    std::size_t best_c = k, best_h = n;
    for (std::size_t c = 0; c < k; ++c)
      for (std::size_t h = 0; h < n; ++h) {
        const double dlt = delta[c * n + h];
        if (!(dlt < 0.0)) continue;
        const double tie = keyed_uniform({seed, static_cast<std::uint64_t>(Stream::kmedoids), a.medoids[c], h});
        if (dlt < best || (dlt == best && tie < best_tie)) {
          best = dlt;
          best_tie = tie;
          best_c = c;
          best_h = h;
        }
      }
    // ignore improvements that are pure rounding noise
    if (best_c == k || best > -1e-12 * std::max(1.0, a.total_cost)) {
      a.converged = true;
      break;
    }
    is_medoid[a.medoids[best_c]] = 0;
    is_medoid[best_h] = 1;
    a.medoids[best_c] = best_h;
    assign_points(x, dim, a);
    a.cost_history.push_back(a.total_cost);
    ++a.swaps;
  }
  assign_points(x, dim, a);
  return a;
}

inline ClusterAssignment k_medoids(const FilterFeatures& f, std::size_t k, std::uint64_t seed, std::size_t max_iters = 100) {
  return k_medoids(f.values, f.dim, k, seed, max_iters);
}

/// Mean silhouette width (L1); a diagnostic only.
inline double silhouette(std::span<const double> x, std::size_t dim, const ClusterAssignment& a) {
  const std::size_t n = x.size() / dim;
  if (a.k < 2 || n < 2) return 0.0;
  std::vector<double> s(n, 0.0);
  parallel_for(n, [&](std::size_t i) {
    std::vector<double> sum(a.k, 0.0);
    std::vector<std::size_t> count(a.k, 0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      sum[a.assignment[j]] += l1(x.subspan(i * dim, dim), x.subspan(j * dim, dim));
      ++count[a.assignment[j]];
    }
    const std::size_t own = a.assignment[i];
    if (count[own] == 0) return;
    const double in = sum[own] / static_cast<double>(count[own]);
    double out = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < a.k; ++c)
      if (c != own && count[c]) out = std::min(out, sum[c] / static_cast<double>(count[c]));
    const double m = std::max(in, out);
    s[i] = m > 0.0 && std::isfinite(out) ? (out - in) / m : 0.0;
  });
  double total = 0.0;
  for (double v : s) total += v;
  return total / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Per-cluster estimation

struct ClusterProfile {
  std::size_t n_users = 0;
  double share_users = 0.0;
  double mean_age = 0.0, share_female = 0.0, share_student = 0.0, share_worker = 0.0;
  double searches_per_user = 0.0, clicks_per_user = 0.0, requests_per_user = 0.0;
};

struct ClusterFit {
  std::size_t cluster = 0;
  std::string medoid_user;
  ClusterProfile profile;
  estimate::ModelParams params;
};

/// Dataset restricted to the users of one cluster; listings and winsor caps are
/// shared with the pooled data.
inline Dataset cluster_subset(const Dataset& data, const std::vector<std::string>& user_ids,
                              const ClusterAssignment& a, std::size_t cluster) {
  std::unordered_map<std::string, std::size_t> label;
  for (std::size_t i = 0; i < user_ids.size(); ++i) label.emplace(user_ids[i], a.assignment[i]);
  Dataset sub;
  sub.meta = data.meta;
  sub.listings = data.listings;
  for (const auto& u : data.users) {
    auto it = label.find(u.user_id);
    if (it != label.end() && it->second == cluster) sub.users.push_back(u);
  }
  for (const auto& s : data.searches) {
    auto it = label.find(s.user_id);
    if (it != label.end() && it->second == cluster) sub.searches.push_back(s);
  }
  sub.reindex();
  return sub;
}

inline ClusterProfile cluster_profile(const Dataset& sub, std::size_t total_users) {
  ClusterProfile p;
  p.n_users = sub.users.size();
  if (p.n_users == 0) return p;
  const double n = static_cast<double>(p.n_users);
  p.share_users = total_users ? n / static_cast<double>(total_users) : 0.0;
  for (const auto& u : sub.users) {
    p.mean_age += u.age;
    p.share_female += u.female;
    p.share_student += u.student;
    p.share_worker += u.worker;
  }
  p.mean_age /= n;
  p.share_female /= n;
  p.share_student /= n;
  p.share_worker /= n;
  for (const auto& s : sub.searches) {
    p.searches_per_user += 1.0;
    p.clicks_per_user += static_cast<double>(s.n_clicked());
    p.requests_per_user += static_cast<double>(s.n_requested());
  }
  p.searches_per_user /= n;
  p.clicks_per_user /= n;
  p.requests_per_user /= n;
  return p;
}

/// Full two-stage pipeline on each cluster separately.
inline std::vector<ClusterFit> fit_by_cluster(const Dataset& data, const std::vector<std::string>& user_ids,
                                              const ClusterAssignment& a, const estimate::FitOptions& opt = {},
                                              bool include_user_covariates = true) {
  std::vector<ClusterFit> out;
  for (std::size_t c = 0; c < a.k; ++c) {
    const auto sub = cluster_subset(data, user_ids, a, c);
    if (sub.searches.empty()) throw ValidationError("cluster " + std::to_string(c) + " has no searches");
    ClusterFit fit;
    fit.cluster = c;
    fit.medoid_user = user_ids[a.medoids[c]];
    fit.profile = cluster_profile(sub, user_ids.size());
    try {
      fit.params = estimate::fit_model(sub, opt, include_user_covariates);
    } catch (const Error& e) {
      throw ValidationError("cluster " + std::to_string(c) + ": " + e.what());
    }
    out.push_back(std::move(fit));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Output

inline std::string clusters_csv(const std::vector<std::string>& user_ids, const ClusterAssignment& a) {
  std::string out = "user_id,cluster,distance_to_medoid\n";
  char buf[64];
  for (std::size_t i = 0; i < user_ids.size(); ++i) {
    std::snprintf(buf, sizeof buf, ",%zu,%.10g\n", a.assignment[i], a.distance[i]);
    out += user_ids[i] + buf;
  }
  return out;
}

inline std::string medoids_csv(const FilterFeatures& f, const ClusterAssignment& a) {
  std::string out = "cluster,user_id";
  for (const auto& n : f.names) out += "," + n;
  out += "\n";
  char buf[64];
  for (std::size_t c = 0; c < a.k; ++c) {
    out += std::to_string(c) + "," + f.user_ids[a.medoids[c]];
    for (double v : f.row(a.medoids[c])) {
      std::snprintf(buf, sizeof buf, ",%.2f", v);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

inline nlohmann::json profile_to_json(const ClusterProfile& p) {
  return {{"n_users", p.n_users},           {"share_users", p.share_users},
          {"mean_age", p.mean_age},         {"share_female", p.share_female},
          {"share_student", p.share_student}, {"share_worker", p.share_worker},
          {"searches_per_user", p.searches_per_user}, {"clicks_per_user", p.clicks_per_user},
          {"requests_per_user", p.requests_per_user}};
}

}  // namespace ranklab::cluster

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "ranklab/counterfact.hpp"
#include "ranklab/domain.hpp"
#include "ranklab/errors.hpp"
#include "ranklab/estimate.hpp"

namespace ranklab::metrics {

inline std::string fmt(double v, const char* spec = "%.10g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

// ---------------------------------------------------------------------------
// Concentration

struct LorenzCurve {
  std::vector<double> share_rooms;   // starts at 0, ends at 1
  std::vector<double> share_events;  // starts at 0, ends at 1
};

inline void check_counts(std::span<const double> counts) {
  if (counts.empty()) throw ValidationError("no rooms to measure");
  double total = 0.0;
  for (double c : counts) {
    if (!(c >= 0.0) || !std::isfinite(c)) throw ValidationError("event counts must be finite and non-negative");
    total += c;
  }
  if (!(total > 0.0)) throw ValidationError("all event counts are zero");
}

/// Rooms sorted ascending by count; one point per room plus the origin.
inline LorenzCurve lorenz_curve(std::span<const double> counts) {
  check_counts(counts);
  std::vector<double> x(counts.begin(), counts.end());
  std::sort(x.begin(), x.end());
  const double total = std::accumulate(x.begin(), x.end(), 0.0);
  const double n = static_cast<double>(x.size());
  LorenzCurve c;
  c.share_rooms.push_back(0.0);
  c.share_events.push_back(0.0);
  double cum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    cum += x[i];
    c.share_rooms.push_back(static_cast<double>(i + 1) / n);
    c.share_events.push_back(i + 1 == x.size() ? 1.0 : cum / total);
  }
  return c;
}

/// Mean absolute difference over twice the mean, via the sorted form.
inline double gini(std::span<const double> counts) {
  check_counts(counts);
  std::vector<double> x(counts.begin(), counts.end());
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double weighted = 0.0, total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    weighted += (2.0 * static_cast<double>(i + 1) - n - 1.0) * x[i];
    total += x[i];
  }
  return weighted / (n * total);
}

/// Per-room event counts over the rooms that appear in at least one result
/// (by congestion id). `events[i]` flags slot i.
inline std::vector<double> room_counts(std::span<const std::uint32_t> room_of_slot, std::span<const std::uint8_t> events,
                                       std::size_t n_rooms) {
  std::vector<double> count(n_rooms, 0.0);
  std::vector<std::uint8_t> seen(n_rooms, 0);
  for (std::size_t i = 0; i < room_of_slot.size(); ++i) {
    seen[room_of_slot[i]] = 1;
    if (events.empty() || events[i]) count[room_of_slot[i]] += 1.0;
  }
  std::vector<double> out;
  for (std::size_t r = 0; r < n_rooms; ++r)
    if (seen[r]) out.push_back(count[r]);
  return out;
}

// ---------------------------------------------------------------------------
// Utility of predicted choices

/// Mean euro-normalised Û over the flagged slots.
inline double avg_utility(const counterfact::PreparedLogs& logs, std::span<const std::uint8_t> flags,
                          const estimate::NormalizedParams& norm) {
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < flags.size(); ++i)
    if (flags[i]) {
      total += norm.utility(logs.u_hat[i]);
      ++n;
    }
  if (n == 0) throw ValidationError("no predicted choices to average over");
  return total / static_cast<double>(n);
}

inline double avg_request_utility(const counterfact::PreparedLogs& logs, const counterfact::CounterfactualLog& cf,
                                  const estimate::NormalizedParams& norm) {
  return avg_utility(logs, cf.requested, norm);
}

// ---------------------------------------------------------------------------
// Frontier

struct FrontierRow {
  double alpha = 0.0;
  std::uint64_t seed = 0;
  double gini_clicks = 0.0, gini_requests = 0.0;
  double avg_u_clicked = 0.0, avg_u_requested = 0.0;
};

struct FrontierPoint {
  double alpha = 0.0;
  std::size_t n_seeds = 0;
  double gini_clicks = 0.0, gini_requests = 0.0, avg_u_clicked = 0.0, avg_u_requested = 0.0;
  double sd_gini_clicks = 0.0, sd_gini_requests = 0.0, sd_avg_u_clicked = 0.0, sd_avg_u_requested = 0.0;
};

struct Frontier {
  std::vector<FrontierRow> rows;      // alpha-major, seed-minor
  std::vector<FrontierPoint> points;  // one per alpha
};

struct FrontierOptions {
  std::vector<double> alphas;
  std::size_t n_seeds = 10;
  std::uint64_t base_seed = 1;
  bool garble = false;
  counterfact::GarbleMode garble_mode = counterfact::GarbleMode::universe;
};

inline counterfact::RankingPolicy policy_for_alpha(double alpha) {
  if (alpha == 1.0) return counterfact::RankingPolicy::personalized();
  if (alpha == 0.0) return counterfact::RankingPolicy::random();
  return counterfact::RankingPolicy::blend(alpha);
}

inline FrontierRow evaluate_policy(const counterfact::PreparedLogs& logs, const estimate::ClickParams& click,
                                   const estimate::NormalizedParams& norm, double alpha, std::uint64_t seed,
                                   bool garble, counterfact::GarbleMode mode) {
  const auto cf = counterfact::run_policy(logs, click, policy_for_alpha(alpha), seed, garble, mode);
  FrontierRow row;
  row.alpha = alpha;
  row.seed = seed;
  row.gini_clicks = gini(room_counts(cf.congestion_room, cf.clicked, logs.room_ids.size()));
  row.gini_requests = gini(room_counts(cf.congestion_room, cf.requested, logs.room_ids.size()));
  row.avg_u_clicked = avg_utility(logs, cf.clicked, norm);
  row.avg_u_requested = avg_utility(logs, cf.requested, norm);
  return row;
}

inline std::pair<double, double> mean_sd(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  double m = 0.0;
  for (double x : v) m += x;
  m /= n;
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0};
}

/// Every (alpha, seed) run plus per-alpha mean and sample sd across seeds.
/// alpha = 1 and alpha = 0 use the exact personalised and random policies.
inline Frontier frontier_sweep(const counterfact::PreparedLogs& logs, const estimate::ClickParams& click,
                               const estimate::NormalizedParams& norm, const FrontierOptions& opt) {
  if (opt.alphas.empty()) throw ValidationError("empty blend-weight grid");
  if (opt.n_seeds == 0) throw ValidationError("need at least one seed");
  for (double a : opt.alphas)
    if (!(a >= 0.0 && a <= 1.0)) throw ValidationError("blend weight " + fmt(a) + " outside [0,1]");
  Frontier f;
  for (double a : opt.alphas) {
    std::vector<double> gc, gr, uc, ur;
    for (std::size_t s = 0; s < opt.n_seeds; ++s) {
      const auto row = evaluate_policy(logs, click, norm, a, opt.base_seed + s, opt.garble, opt.garble_mode);
      f.rows.push_back(row);
      gc.push_back(row.gini_clicks);
      gr.push_back(row.gini_requests);
      uc.push_back(row.avg_u_clicked);
      ur.push_back(row.avg_u_requested);
    }
    FrontierPoint p;
    p.alpha = a;
    p.n_seeds = opt.n_seeds;
    std::tie(p.gini_clicks, p.sd_gini_clicks) = mean_sd(gc);
    std::tie(p.gini_requests, p.sd_gini_requests) = mean_sd(gr);
    std::tie(p.avg_u_clicked, p.sd_avg_u_clicked) = mean_sd(uc);
    std::tie(p.avg_u_requested, p.sd_avg_u_requested) = mean_sd(ur);
    f.points.push_back(p);
  }
  return f;
}

/// frontier.csv: one row per (alpha, seed), then per-alpha rows with seed
/// "mean" and "sd".
inline std::string frontier_csv(const Frontier& f) {
  std::string out = "alpha,seed,gini_clicks,gini_requests,avg_u_clicked,avg_u_requested\n";
  for (const auto& r : f.rows)
    out += fmt(r.alpha, "%.6g") + "," + std::to_string(r.seed) + "," + fmt(r.gini_clicks) + "," + fmt(r.gini_requests) +
           "," + fmt(r.avg_u_clicked) + "," + fmt(r.avg_u_requested) + "\n";
  for (const auto& p : f.points)
    out += fmt(p.alpha, "%.6g") + ",mean," + fmt(p.gini_clicks) + "," + fmt(p.gini_requests) + "," +
           fmt(p.avg_u_clicked) + "," + fmt(p.avg_u_requested) + "\n";
  for (const auto& p : f.points)
    out += fmt(p.alpha, "%.6g") + ",sd," + fmt(p.sd_gini_clicks) + "," + fmt(p.sd_gini_requests) + "," +
           fmt(p.sd_avg_u_clicked) + "," + fmt(p.sd_avg_u_requested) + "\n";
  return out;
}

/// Spearman rank correlation (average ranks for ties).
inline double spearman(std::span<const double> a, std::span<const double> b) {
  auto ranks = [](std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto x, auto y) { return v[x] < v[y]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j) + 1.0;
      i = j + 1;
    }
    return r;
  };
  if (a.size() != b.size() || a.size() < 2) throw ValidationError("spearman needs two equal-length samples");
  const auto ra = ranks(a), rb = ranks(b);
  const auto [ma, sa] = mean_sd(ra);
  const auto [mb, sb] = mean_sd(rb);
  double cov = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) cov += (ra[i] - ma) * (rb[i] - mb);
  cov /= static_cast<double>(ra.size() - 1);
  return cov / (sa * sb);
}

// ---------------------------------------------------------------------------
// Position profile

struct PositionRow {
  int position = 1;
  std::size_t results = 0, clicks = 0, requests = 0;
  double click_share = 0.0, request_share = 0.0;
  double p_click = 0.0, p_request = 0.0, p_request_given_click = 0.0;
};

struct SlopeEstimate {
  double slope = 0.0, se = 0.0, t = 0.0;
  std::size_t n = 0;
};

struct PositionShares {
  std::vector<PositionRow> rows;   // positions 1..max observed
  SlopeEstimate request_given_click_slope;  // OLS of requested on position among clicks
};

/// OLS slope of y on x with heteroskedasticity-robust (HC1) standard error.
inline SlopeEstimate ols_slope(std::span<const double> x, std::span<const double> y) {
  SlopeEstimate s;
  s.n = x.size();
  if (s.n < 3) return s;
  const double n = static_cast<double>(s.n);
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < s.n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) return s;
  s.slope = sxy / sxx;
  const double a = my - s.slope * mx;
  double meat = 0.0;
  for (std::size_t i = 0; i < s.n; ++i) {
    const double e = y[i] - a - s.slope * x[i];
    meat += (x[i] - mx) * (x[i] - mx) * e * e;
  }
  s.se = std::sqrt(meat / (sxx * sxx) * n / (n - 2.0));
  s.t = s.se > 0.0 ? s.slope / s.se : 0.0;
  return s;
}

inline PositionShares position_shares(const std::vector<SearchLog>& searches) {
  int max_pos = 0;
  for (const auto& s : searches)
    for (const auto& slot : s.slots) max_pos = std::max(max_pos, slot.position);
  PositionShares out;
  out.rows.resize(static_cast<std::size_t>(max_pos));
  std::size_t clicks = 0, requests = 0;
  std::vector<double> x, y;
  for (const auto& s : searches)
    for (const auto& slot : s.slots) {
      auto& r = out.rows[static_cast<std::size_t>(slot.position - 1)];
      ++r.results;
      if (slot.clicked) {
        ++r.clicks;
        ++clicks;
        x.push_back(slot.position);
        y.push_back(slot.requested ? 1.0 : 0.0);
      }
      if (slot.requested) {
        ++r.requests;
        ++requests;
      }
    }
  for (std::size_t p = 0; p < out.rows.size(); ++p) {
    auto& r = out.rows[p];
    r.position = static_cast<int>(p) + 1;
    r.click_share = clicks ? static_cast<double>(r.clicks) / static_cast<double>(clicks) : 0.0;
    r.request_share = requests ? static_cast<double>(r.requests) / static_cast<double>(requests) : 0.0;
    r.p_click = r.results ? static_cast<double>(r.clicks) / static_cast<double>(r.results) : 0.0;
    r.p_request = r.results ? static_cast<double>(r.requests) / static_cast<double>(r.results) : 0.0;
    r.p_request_given_click = r.clicks ? static_cast<double>(r.requests) / static_cast<double>(r.clicks) : 0.0;
  }
  out.request_given_click_slope = ols_slope(x, y);
  return out;
}

/// Centred moving average; the window shrinks at the ends.
inline std::vector<double> smooth(std::span<const double> v, std::size_t window = 3) {
  const std::size_t half = window / 2;
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::size_t lo = i >= half ? i - half : 0, hi = std::min(v.size() - 1, i + half);
    double s = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) s += v[j];
    out[i] = s / static_cast<double>(hi - lo + 1);
  }
  return out;
}

inline std::string positions_csv(const PositionShares& p) {
  std::string out =
      "position,results,clicks,requests,click_share,request_share,p_click,p_request,p_request_given_click\n";
  for (const auto& r : p.rows)
    out += std::to_string(r.position) + "," + std::to_string(r.results) + "," + std::to_string(r.clicks) + "," +
           std::to_string(r.requests) + "," + fmt(r.click_share) + "," + fmt(r.request_share) + "," + fmt(r.p_click) +
           "," + fmt(r.p_request) + "," + fmt(r.p_request_given_click) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Price distributions

struct PriceCdfs {
  std::vector<double> grid;
  std::vector<double> all, clicked, requested;
  double mean_all = 0.0, mean_clicked = 0.0, mean_requested = 0.0;
  std::size_t n_all = 0, n_clicked = 0, n_requested = 0;
};

/// Empirical CDFs of (winsorised) price on a shared grid of `points` values.
inline PriceCdfs price_cdfs(const Dataset& data, std::size_t points = 101) {
  std::vector<double> all, clicked, requested;
  const double cap = data.meta.caps.price;
  for (const auto& s : data.searches)
    for (const auto& slot : s.slots) {
      const double p = std::min(data.listing(slot.room_id).price, cap);
      all.push_back(p);
      if (slot.clicked) clicked.push_back(p);
      if (slot.requested) requested.push_back(p);
    }
  PriceCdfs out;
  if (all.empty()) return out;
  for (auto* v : {&all, &clicked, &requested}) std::sort(v->begin(), v->end());
  const double lo = all.front(), hi = all.back();
  points = std::max<std::size_t>(points, 2);
  auto cdf = [](const std::vector<double>& v, double x) {
    if (v.empty()) return 0.0;
    return static_cast<double>(std::upper_bound(v.begin(), v.end(), x) - v.begin()) / static_cast<double>(v.size());
  };
  for (std::size_t i = 0; i < points; ++i) {
    const double x = i + 1 == points ? hi : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    out.grid.push_back(x);
    out.all.push_back(cdf(all, x));
    out.clicked.push_back(cdf(clicked, x));
    out.requested.push_back(cdf(requested, x));
  }
  auto mean = [](const std::vector<double>& v) {
    return v.empty() ? std::nan("") : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  out.mean_all = mean(all);
  out.mean_clicked = mean(clicked);
  out.mean_requested = mean(requested);
  out.n_all = all.size();
  out.n_clicked = clicked.size();
  out.n_requested = requested.size();
  return out;
}

inline std::string price_cdfs_csv(const PriceCdfs& c) {
  std::string out = "price,cdf_all,cdf_clicked,cdf_requested\n";
  for (std::size_t i = 0; i < c.grid.size(); ++i)
    out += fmt(c.grid[i]) + "," + fmt(c.all[i]) + "," + fmt(c.clicked[i]) + "," + fmt(c.requested[i]) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Lorenz output for a dataset

inline std::string lorenz_csv(const Dataset& data) {
  std::unordered_map<std::string, std::uint32_t> index;
  std::vector<std::uint32_t> rooms;
  std::vector<std::uint8_t> clicked, requested;
  for (const auto& s : data.searches)
    for (const auto& slot : s.slots) {
      auto [it, fresh] = index.emplace(slot.room_id, static_cast<std::uint32_t>(index.size()));
      rooms.push_back(it->second);
      clicked.push_back(slot.clicked);
      requested.push_back(slot.requested);
    }
  std::string out = "share_rooms,share_events,series\n";
  auto emit = [&](const char* label, std::span<const std::uint8_t> flags) {
    const auto counts = room_counts(rooms, flags, index.size());
    if (std::accumulate(counts.begin(), counts.end(), 0.0) == 0.0) return;
    const auto c = lorenz_curve(counts);
    for (std::size_t i = 0; i < c.share_rooms.size(); ++i)
      out += fmt(c.share_rooms[i]) + "," + fmt(c.share_events[i]) + "," + label + "\n";
  };
  if (rooms.empty()) return out;
  emit("results", {});
  emit("clicks", clicked);
  emit("requests", requested);
  return out;
}

// ---------------------------------------------------------------------------
// Descriptive summary

struct WelchTest {
  double diff = 0.0, t = 0.0, df = 0.0, p = std::nan("");

  std::string stars() const {
    if (!(p == p)) return "";
    return p < 0.01 ? "***" : p < 0.05 ? "**" : p < 0.10 ? "*" : "";
  }
};

/// Two-sided Welch test of mean(a) - mean(b) from sufficient statistics.
inline WelchTest welch(double mean_a, double var_a, double n_a, double mean_b, double var_b, double n_b) {
  WelchTest w;
  w.diff = mean_a - mean_b;
  if (n_a < 2 || n_b < 2) return w;
  const double va = var_a / n_a, vb = var_b / n_b;
  const double se2 = va + vb;
  if (!(se2 > 0.0)) {
    w.p = w.diff == 0.0 ? 1.0 : 0.0;
    return w;
  }
  w.t = w.diff / std::sqrt(se2);
  w.df = se2 * se2 / (va * va / (n_a - 1.0) + vb * vb / (n_b - 1.0));
  const boost::math::students_t dist(w.df);
  w.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(w.t)));
  return w;
}

struct VariableSummary {
  std::string name;
  double mean = 0.0, sd = 0.0, median = 0.0, min = 0.0, max = 0.0;
  WelchTest clicked_vs_all, requested_vs_all, requested_vs_clicked;
};

struct SummaryReport {
  std::size_t n_users = 0, n_rooms = 0, n_searches = 0, n_results = 0, n_clicks = 0, n_requests = 0;
  double searches_per_user = 0.0, results_per_search = 0.0, clicks_per_search = 0.0, requests_per_search = 0.0;
  double p_click = 0.0, p_request_given_click = 0.0;
  std::size_t max_results = 0;
  double mean_age = 0.0, share_female = 0.0, share_student = 0.0, share_worker = 0.0;
  std::vector<VariableSummary> variables;
};

namespace detail {

struct Moments {
  double n = 0.0, sum = 0.0, sumsq = 0.0;
  void add(double x) {
    n += 1.0;
    sum += x;
    sumsq += x * x;
  }
  double mean() const { return n > 0 ? sum / n : std::nan(""); }
  double var() const { return n > 1 ? std::max(0.0, (sumsq - sum * sum / n) / (n - 1.0)) : 0.0; }
};

}  // namespace detail

inline SummaryReport summary_report(const Dataset& data) {
  SummaryReport r;
  const estimate::SlotView view(data);
  std::vector<std::string> names;
  for (const auto& n : x1_names(data.meta.baseline_district)) names.push_back(n);
  names.push_back("district_" + std::string(district_name(data.meta.baseline_district)));
  for (const auto& n : x2_names()) names.push_back(n);
  const std::size_t nv = names.size();

  std::vector<std::vector<double>> values(nv);
  std::vector<detail::Moments> all(nv), clicked(nv), requested(nv);
  std::unordered_map<std::string, int> rooms_seen, users_seen;
  std::vector<double> row(nv);
  for (std::size_t k = 0; k < data.searches.size(); ++k) {
    const auto& s = data.searches[k];
    users_seen.emplace(s.user_id, 0);
    r.max_results = std::max(r.max_results, s.slots.size());
    for (std::size_t j = 0; j < s.slots.size(); ++j) {
      const auto& slot = s.slots[j];
      rooms_seen.emplace(slot.room_id, 0);
      const auto c = view.covariates(k, j);
      std::size_t i = 0;
      for (double v : c.x1) row[i++] = v;
      row[i++] = view.listing(k, j).district == data.meta.baseline_district ? 1.0 : 0.0;
      for (double v : c.x2) row[i++] = v;
      for (std::size_t v = 0; v < nv; ++v) {
        values[v].push_back(row[v]);
        all[v].add(row[v]);
        if (slot.clicked) clicked[v].add(row[v]);
        if (slot.requested) requested[v].add(row[v]);
      }
      ++r.n_results;
      r.n_clicks += slot.clicked;
      r.n_requests += slot.requested;
    }
  }
  r.n_users = users_seen.size();
  r.n_rooms = rooms_seen.size();
  r.n_searches = data.searches.size();
  auto ratio = [](double a, double b) { return b > 0 ? a / b : 0.0; };
  r.searches_per_user = ratio(static_cast<double>(r.n_searches), static_cast<double>(r.n_users));
  r.results_per_search = ratio(static_cast<double>(r.n_results), static_cast<double>(r.n_searches));
  r.clicks_per_search = ratio(static_cast<double>(r.n_clicks), static_cast<double>(r.n_searches));
  r.requests_per_search = ratio(static_cast<double>(r.n_requests), static_cast<double>(r.n_searches));
  r.p_click = ratio(static_cast<double>(r.n_clicks), static_cast<double>(r.n_results));
  r.p_request_given_click = ratio(static_cast<double>(r.n_requests), static_cast<double>(r.n_clicks));

  std::size_t n_active = 0;
  for (const auto& u : data.users) {
    if (!users_seen.count(u.user_id)) continue;
    ++n_active;
    r.mean_age += u.age;
    r.share_female += u.female;
    r.share_student += u.student;
    r.share_worker += u.worker;
  }
  if (n_active) {
    const double n = static_cast<double>(n_active);
    r.mean_age /= n;
    r.share_female /= n;
    r.share_student /= n;
    r.share_worker /= n;
  }

  for (std::size_t v = 0; v < nv; ++v) {
    VariableSummary s;
    s.name = names[v];
    if (!values[v].empty()) {
      s.mean = all[v].mean();
      s.sd = std::sqrt(all[v].var());
      s.median = percentile(values[v], 50.0);
      s.min = *std::min_element(values[v].begin(), values[v].end());
      s.max = *std::max_element(values[v].begin(), values[v].end());
    }
    s.clicked_vs_all = welch(clicked[v].mean(), clicked[v].var(), clicked[v].n, all[v].mean(), all[v].var(), all[v].n);
    s.requested_vs_all =
        welch(requested[v].mean(), requested[v].var(), requested[v].n, all[v].mean(), all[v].var(), all[v].n);
    s.requested_vs_clicked = welch(requested[v].mean(), requested[v].var(), requested[v].n, clicked[v].mean(),
                                   clicked[v].var(), clicked[v].n);
    r.variables.push_back(std::move(s));
  }
  return r;
}

inline std::string summary_text(const SummaryReport& r) {
  std::ostringstream out;
  char line[256];
  out << "Sample\n";
  std::snprintf(line, sizeof line,
                "  users %zu\n  rooms in results %zu\n  searches %zu\n  results %zu\n  clicks %zu\n  requests %zu\n",
                r.n_users, r.n_rooms, r.n_searches, r.n_results, r.n_clicks, r.n_requests);
  out << line;
  std::snprintf(line, sizeof line,
                "  searches per user %.3f\n  results per search %.3f (max %zu)\n  clicks per search %.3f\n"
                "  requests per search %.3f\n",
                r.searches_per_user, r.results_per_search, r.max_results, r.clicks_per_search, r.requests_per_search);
  out << line;
  std::snprintf(line, sizeof line, "  P(result clicked) %.4f\n  P(click requested) %.4f\n", r.p_click,
                r.p_request_given_click);
  out << line;
  std::snprintf(line, sizeof line, "Users\n  mean age %.2f\n  female %.4f\n  student %.4f\n  worker %.4f\n", r.mean_age,
                r.share_female, r.share_student, r.share_worker);
  out << line;
  out << "Covariates over all results (differences: clicked-all, requested-all, requested-clicked)\n";
  std::snprintf(line, sizeof line, "  %-34s %10s %10s %10s %10s %10s %14s %14s %14s\n", "variable", "mean", "sd",
                "median", "min", "max", "click-all", "req-all", "req-click");
  out << line;
  for (const auto& v : r.variables) {
    auto cell = [](const WelchTest& w) {
      char b[32];
      std::snprintf(b, sizeof b, "%.4f%s", w.diff, w.stars().c_str());
      return std::string(b);
    };
    std::snprintf(line, sizeof line, "  %-34s %10.4f %10.4f %10.4f %10.4f %10.4f %14s %14s %14s\n", v.name.c_str(),
                  v.mean, v.sd, v.median, v.min, v.max, cell(v.clicked_vs_all).c_str(),
                  cell(v.requested_vs_all).c_str(), cell(v.requested_vs_clicked).c_str());
    out << line;
  }
  out << "Significance: * p<0.10, ** p<0.05, *** p<0.01 (Welch two-sample t-test)\n";
  return out.str();
}

}  // namespace ranklab::metrics

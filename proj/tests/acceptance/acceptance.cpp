// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "ranklab/cli.hpp"

using namespace ranklab;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail, double seconds) {
  std::printf("%s criterion %d: %s (%s) [%.1fs]\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str(), seconds);
  std::fflush(stdout);
  if (!pass) ++failures;
}

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

std::string num(double v, const char* spec = "%.4g") { return metrics::fmt(v, spec); }

synth::MarketConfig load_market(const std::string& name) {
  return synth::MarketConfig::from_config(KeyValueConfig::load(std::string(RANKLAB_CONFIG_DIR) + "/" + name));
}

// ---------------------------------------------------------------------------

void likelihood_exactness() {
  Timer t;
  const std::size_t n_instances = 100, draws = 1000000;
  std::vector<ChoiceInstance> inst(n_instances);
  for (std::size_t i = 0; i < n_instances; ++i) {
    RandomStream r(101, Stream::test_data, i);
    const auto nc = 1 + r.below(4), nd = 1 + r.below(12);
    for (std::size_t j = 0; j < nc; ++j) inst[i].chosen_values.push_back(r.normal());
    for (std::size_t j = 0; j < nd; ++j) inst[i].unchosen_values.push_back(r.normal());
  }
  std::vector<std::uint8_t> ok(n_instances, 0);
  std::vector<double> z(n_instances, 0.0);
  parallel_for(n_instances, [&](std::size_t i) {
    const double exact = tie_prob(inst[i]);
    const auto mc = mc_tie_prob(inst[i], draws, 1000 + i);
    z[i] = mc.se > 0.0 ? std::abs(exact - mc.p) / mc.se : (exact == mc.p ? 0.0 : 1e9);
    ok[i] = z[i] <= 3.0;
  });
  const auto agree = std::accumulate(ok.begin(), ok.end(), 0);
  report(1, "likelihood exactness vs Monte Carlo", agree >= 97,
         std::to_string(agree) + "/100 within 3 SE, max |z| " + num(*std::max_element(z.begin(), z.end())),
         t.seconds());
}

void gradient_correctness() {
  Timer t;
  double worst = 0.0;
  for (std::uint64_t d = 0; d < 20; ++d) {
    RandomStream r(202, Stream::test_data, d);
    const std::size_t p = 2 + r.below(4);
    StageData data(std::vector<std::string>(p, "x"));
    const std::size_t sets = 10 + r.below(30);
    for (std::size_t k = 0; k < sets; ++k) {
      const std::size_t n = 2 + r.below(12);
      std::vector<double> rows(n * p);
      for (auto& v : rows) v = r.normal();
      std::vector<std::uint8_t> ch(n, 0);
      const std::size_t nc = 1 + r.below(std::min<std::size_t>(4, n - 1));
      for (std::size_t i = 0; i < nc; ++i) ch[i] = 1;
      r.shuffle(ch);
      data.add_set("s", rows, ch);
    }
    std::vector<double> beta(p);
    for (auto& b : beta) b = r.normal(0.0, 0.7);
    const auto g = grad_log_likelihood(beta, data);
    for (std::size_t j = 0; j < p; ++j) {
      const double h = 1e-5;
      auto bp = beta, bm = beta;
      bp[j] += h;
      bm[j] -= h;
      const double fd = (log_likelihood(bp, data) - log_likelihood(bm, data)) / (2.0 * h);
      worst = std::max(worst, std::abs(g[j] - fd) / std::max(1.0, std::abs(fd)));
    }
  }
  report(2, "gradient vs central differences", worst <= 1e-5, "max relative deviation " + num(worst, "%.3g"),
         t.seconds());
}

// Returns how many request fits had a negative price coefficient.
int parameter_recovery() {
  Timer t;
  const int reps = 20;
  synth::MarketConfig base;  // defaults carry the true parameters
  const auto truth_req = base.true_request_params;
  const auto truth_clk = base.true_click_params;
  std::vector<int> hit_req(truth_req.size(), 0), hit_clk(truth_clk.size(), 0);
  std::size_t searches_req = 0, searches_clk = 0;
  int negative_price = 0;
  for (int rep = 0; rep < reps; ++rep) {
    auto cfg = base;
    cfg.n_users = 1000;
    cfg.searches_per_user_mean = 50.0;
    cfg.seed = 5000 + static_cast<std::uint64_t>(rep);
    const auto req_data = synth::generate_dataset(cfg);
    searches_req += req_data.searches.size();
    const auto req = estimate::fit_request_model(req_data);
    negative_price += req.fit.coef[layout::req::price] < 0.0;
    for (std::size_t j = 0; j < truth_req.size(); ++j)
      hit_req[j] += std::abs(req.fit.coef[j] - truth_req[j]) <= 3.0 * req.fit.se[j];

    cfg.n_users = 2000;
    cfg.seed = 7000 + static_cast<std::uint64_t>(rep);
    const auto clk_data = synth::generate_dataset(cfg);
    searches_clk += clk_data.searches.size();
    const auto u = synth::true_expected_utilities(clk_data, cfg);
    const auto clk = estimate::fit_click_model(clk_data, u);
    for (std::size_t j = 0; j < truth_clk.size(); ++j)
      hit_clk[j] += std::abs(clk.fit.coef[j] - truth_clk[j]) <= 3.0 * clk.fit.se[j];
  }
  const auto names_req = layout::request_names(), names_clk = layout::click_names();
  bool pass = true;
  std::string worst = "";
  int worst_hits = reps + 1;
  for (std::size_t j = 0; j < hit_req.size(); ++j) {
    pass = pass && hit_req[j] >= 18;
    if (hit_req[j] < worst_hits) worst_hits = hit_req[j], worst = "request." + names_req[j];
  }
  for (std::size_t j = 0; j < hit_clk.size(); ++j) {
    pass = pass && hit_clk[j] >= 18;
    if (hit_clk[j] < worst_hits) worst_hits = hit_clk[j], worst = "click." + names_clk[j];
  }
  report(3, "parameter recovery within 3 SE", pass,
         "price " + std::to_string(hit_req[layout::req::price]) + "/20, gender_match " +
             std::to_string(hit_req[layout::req::gender_match]) + "/20, balcony " +
             std::to_string(hit_req[layout::req::first_amenity + 1]) + "/20, position " +
             std::to_string(hit_clk[layout::clk::position]) + "/20, position_sq " +
             std::to_string(hit_clk[layout::clk::position_sq]) + "/20, u_hat " +
             std::to_string(hit_clk[layout::clk::u_hat]) + "/20; weakest " + worst + " " +
             std::to_string(worst_hits) + "/20; mean searches " + std::to_string(searches_req / reps) + " / " +
             std::to_string(searches_clk / reps),
         t.seconds());
  return negative_price;
}

// One fitted vertical market, shared by criteria 4, 6 and 7.
struct VerticalFit {
  Dataset data;
  estimate::ModelParams model;
  std::vector<double> utilities;
  double seconds = 0.0;
};

VerticalFit fit_vertical_market() {
  Timer t;
  VerticalFit v;
  v.data = synth::generate_dataset(load_market("vertical.cfg"));
  v.model = estimate::fit_model(v.data);
  v.utilities = estimate::expected_utilities(v.data, v.model.request, v.model.projection);
  v.seconds = t.seconds();
  return v;
}

void normalization(const VerticalFit& fit, int negative_price_fits) {
  Timer t;
  const auto norm = estimate::normalize_params(fit.model.request, fit.model.click);
  const bool price_exact = norm.request[layout::req::price] == -1.0;
  std::size_t mismatches = 0;
  std::size_t at = 0;
  for (const auto& s : fit.data.searches) {
    std::size_t a = 0, b = 0;
    for (std::size_t j = 1; j < s.slots.size(); ++j) {
      if (fit.utilities[at + j] > fit.utilities[at + a]) a = j;
      if (norm.utility(fit.utilities[at + j]) > norm.utility(fit.utilities[at + b])) b = j;
    }
    mismatches += a != b;
    at += s.slots.size();
  }
  report(4, "normalization", price_exact && mismatches == 0,
         "normalized price " + num(norm.request[layout::req::price], "%.17g") + " (raw " +
             num(fit.model.request.fit.coef[layout::req::price], "%.4g") + "), argmax changes in " +
             std::to_string(mismatches) + " of " + std::to_string(fit.data.searches.size()) +
             " searches; negative raw price in " + std::to_string(negative_price_fits) + "/20 recovery fits",
         t.seconds() + fit.seconds);
}

void lorenz_gini_suite() {
  Timer t;
  bool ok = true;
  std::size_t bad = 0;
  double worst_scale = 0.0;
  for (std::uint64_t v = 0; v < 1000; ++v) {
    RandomStream r(505, Stream::test_data, v);
    std::vector<double> x(1 + r.below(200));
    const double mean = r.uniform(0.1, 20.0);
    for (auto& c : x) c = static_cast<double>(r.poisson(mean * (r.bernoulli(0.2) ? 5.0 : 1.0)));
    x[r.below(x.size())] += 1.0;
    const auto l = metrics::lorenz_curve(x);
    bool good = l.share_rooms.front() == 0.0 && l.share_events.front() == 0.0 && l.share_rooms.back() == 1.0 &&
                l.share_events.back() == 1.0;
    for (std::size_t i = 1; i < l.share_events.size(); ++i)
      good = good && l.share_events[i] >= l.share_events[i - 1] && l.share_rooms[i] > l.share_rooms[i - 1];
    for (std::size_t i = 1; i + 1 < l.share_events.size(); ++i)
      good = good && l.share_events[i + 1] - 2.0 * l.share_events[i] + l.share_events[i - 1] >= -1e-12;
    const double g = metrics::gini(x);
    good = good && g >= 0.0 && g < 1.0;
    std::vector<double> scaled(x);
    const double c = r.uniform(0.01, 1000.0);
    for (auto& s : scaled) s *= c;
    const double gs = metrics::gini(scaled);
    const double rel = g > 0.0 ? std::abs(gs - g) / g : std::abs(gs);
    worst_scale = std::max(worst_scale, rel);
    good = good && rel <= 1e-12;
    bad += !good;
  }
  const double g1234 = metrics::gini(std::vector<double>{1, 2, 3, 4});
  ok = bad == 0 && std::abs(g1234 - 0.25) <= 1e-12;
  report(5, "Lorenz/Gini invariants", ok,
         std::to_string(bad) + "/1000 vectors violate an invariant, gini([1,2,3,4]) " + num(g1234, "%.15g") +
             ", max scale deviation " + num(worst_scale, "%.3g"),
         t.seconds());
}

void frontier_criteria(const VerticalFit& fit) {
  Timer t;
  const auto& model = fit.model;
  const auto logs = counterfact::prepare_logs(fit.data, fit.utilities);
  const auto norm = estimate::normalize_params(model.request, model.click);

  metrics::FrontierOptions opt;
  for (int a = 0; a <= 10; ++a) opt.alphas.push_back(a / 10.0);
  opt.n_seeds = 10;
  const auto plain = metrics::frontier_sweep(logs, model.click, norm, opt);

  std::vector<double> alphas, u_req, g_req;
  for (const auto& p : plain.points) {
    alphas.push_back(p.alpha);
    u_req.push_back(p.avg_u_requested);
    g_req.push_back(p.gini_requests);
  }
  const double rho_u = metrics::spearman(alphas, u_req), rho_g = metrics::spearman(alphas, g_req);
  const double gap = g_req.back() - g_req.front();
  const double sd0 = plain.points.front().sd_gini_requests;
  report(6, "utility-congestion trade-off", rho_u >= 0.9 && rho_g >= 0.9 && gap > 5.0 * sd0,
         "spearman(alpha, utility) " + num(rho_u, "%.3f") + ", spearman(alpha, gini) " + num(rho_g, "%.3f") +
             ", gini gap " + num(gap) + " vs 5*sd " + num(5.0 * sd0) + "; gini_requests " + num(g_req.front()) +
             " -> " + num(g_req.back()) + ", utility " + num(u_req.front()) + " -> " + num(u_req.back()),
         t.seconds());

  Timer t7;
  auto gopt = opt;
  gopt.garble = true;
  const auto garbled = metrics::frontier_sweep(logs, model.click, norm, gopt);
  const double ggap = std::abs(garbled.points.back().gini_requests - garbled.points.front().gini_requests);
  double max_du = 0.0;
  for (std::size_t i = 0; i < plain.rows.size(); ++i)
    max_du = std::max(max_du, std::abs(garbled.rows[i].avg_u_requested - plain.rows[i].avg_u_requested));
  for (std::size_t i = 0; i < plain.points.size(); ++i)
    max_du = std::max(max_du, std::abs(garbled.points[i].avg_u_requested - plain.points[i].avg_u_requested));
  report(7, "garbling removes the congestion gradient", ggap < 0.2 * std::abs(gap) && max_du < 1e-10,
         "garbled gap " + num(ggap) + " vs 20% of " + num(std::abs(gap)) + ", max utility change " +
             num(max_du, "%.3g"),
         t7.seconds());
}

void position_shape() {
  Timer t;
  synth::MarketConfig cfg;  // position enters the click stage only
  cfg.n_users = 2000;
  cfg.seed = 808;
  const auto data = synth::generate_dataset(cfg);
  const auto p = metrics::position_shares(data.searches);
  std::vector<double> shares;
  for (std::size_t i = 0; i < std::min<std::size_t>(p.rows.size(), 10); ++i) shares.push_back(p.rows[i].click_share);
  const auto sm = metrics::smooth(shares, 3);
  bool decreasing = sm.size() == 10;
  for (std::size_t i = 1; i < sm.size(); ++i) decreasing = decreasing && sm[i] < sm[i - 1];
  const auto& s = p.request_given_click_slope;
  report(8, "position-share shape", decreasing && std::abs(s.t) < 1.96,
         "smoothed click share " + num(sm.front(), "%.4f") + " -> " + num(sm.back(), "%.4f") +
             (decreasing ? " strictly decreasing" : " NOT strictly decreasing") + "; P(request|click) slope " +
             num(s.slope, "%.3g") + " (t " + num(s.t, "%.2f") + ")",
         t.seconds());
}

void clustering() {
  Timer t;
  bool monotone = true;
  auto check_monotone = [&](const cluster::ClusterAssignment& a) {
    for (std::size_t i = 1; i < a.cost_history.size(); ++i) monotone = monotone && a.cost_history[i] <= a.cost_history[i - 1];
  };

  // k = 1 against an exhaustive scan
  const std::size_t n = 200, dim = 5;
  RandomStream r(909, Stream::test_data);
  std::vector<double> x(n * dim);
  for (auto& v : x) v = r.uniform(0.0, 100.0);
  double best = std::numeric_limits<double>::infinity();
  std::size_t arg = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double c = 0.0;
    for (std::size_t j = 0; j < n; ++j) c += cluster::l1({x.data() + i * dim, dim}, {x.data() + j * dim, dim});
    if (c < best) best = c, arg = i;
  }
  const auto one = cluster::k_medoids(x, dim, 1, 1);
  check_monotone(one);
  const bool k1 = one.medoids[0] == arg && std::abs(one.total_cost - best) <= 1e-9 * best;

  // planted user types
  const auto cfg = load_market("segments.cfg");
  const auto data = synth::generate_dataset(cfg);
  const auto f = cluster::filter_features(data);
  const auto a = cluster::k_medoids(f, 3, 1);
  check_monotone(a);
  std::vector<std::size_t> truth(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) truth[i] = synth::user_segment(cfg, i);
  std::vector<std::size_t> perm{0, 1, 2};
  std::size_t best_match = 0;
  do {
    std::size_t m = 0;
    for (std::size_t i = 0; i < f.size(); ++i) m += perm[a.assignment[i]] == truth[i];
    best_match = std::max(best_match, m);
  } while (std::next_permutation(perm.begin(), perm.end()));
  const double accuracy = static_cast<double>(best_match) / static_cast<double>(f.size());

  for (std::uint64_t s = 0; s < 20; ++s) {
    RandomStream rs(910, Stream::test_data, s);
    std::vector<double> y(150 * 3);
    for (auto& v : y) v = static_cast<double>(rs.below(5));  // many equal distances
    check_monotone(cluster::k_medoids(y, 3, 2 + s % 6, s));
  }
  report(9, "k-medoids", k1 && accuracy >= 0.9 && monotone,
         std::string("k=1 medoid ") + (k1 ? "matches" : "differs from") + " exhaustive scan, planted accuracy " +
             num(100.0 * accuracy, "%.1f") + "%, cost " + (monotone ? "nonincreasing" : "INCREASED") + " on all runs",
         t.seconds());
}

void determinism() {
  Timer t;
  const fs::path root = fs::temp_directory_path() / "ranklab_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  io::write_text_file(root / "market.cfg", "n_users = 300\nn_rooms = 1500\nsearches_per_user_mean = 30\nseed = 42\n");
  std::ostringstream sink;
  auto pipeline = [&](const std::string& tag, const std::string& threads) {
    const auto dir = root / tag;
    const std::string data = (dir / "data").string(), params = (dir / "params").string(),
                      front = (dir / "frontier").string();
    int code = cli::run({"--threads", threads, "generate", "--config", (root / "market.cfg").string(), "--out", data},
                        sink, sink);
    if (code == 0) code = cli::run({"--threads", threads, "estimate", "--data", data, "--out", params}, sink, sink);
    if (code == 0)
      code = cli::run({"--threads", threads, "frontier", "--data", data, "--params", params, "--out", front,
                       "--alphas", "0,0.25,0.5,0.75,1", "--seeds", "3", "--seed", "9"},
                      sink, sink);
    return code == 0 ? io::read_text_file(fs::path(front) / "frontier.csv") : std::string("exit " + std::to_string(code));
  };
  const auto a = pipeline("t1a", "1");
  const auto b = pipeline("t1b", "1");
  const auto c = pipeline("t4", "4");
  const auto d = pipeline("t3", "3");
  const bool same = a == b && a == c && a == d && a.rfind("alpha,", 0) == 0;
  report(10, "byte-identical frontier.csv", same,
         std::string(same ? "identical" : "DIFFERENT") + " across 2 runs at 1 thread and runs at 3 and 4 threads (" +
             std::to_string(a.size()) + " bytes)",
         t.seconds());
  fs::remove_all(root);
}

}  // namespace

int main() {
  std::printf("ranklab acceptance suite (%zu worker threads)\n", thread_count());
  try {
    likelihood_exactness();
    gradient_correctness();
    const int negative_price_fits = parameter_recovery();
    const auto vertical = fit_vertical_market();
    normalization(vertical, negative_price_fits);
    lorenz_gini_suite();
    frontier_criteria(vertical);
    position_shape();
    clustering();
    determinism();
  } catch (const std::exception& e) {
    std::printf("FAIL acceptance aborted: %s\n", e.what());
    return 1;
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}

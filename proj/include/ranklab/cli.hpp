#pragma once

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ranklab/cluster.hpp"
#include "ranklab/config.hpp"
#include "ranklab/counterfact.hpp"
#include "ranklab/errors.hpp"
#include "ranklab/estimate.hpp"
#include "ranklab/io.hpp"
#include "ranklab/manifest.hpp"
#include "ranklab/metrics.hpp"
#include "ranklab/parallel.hpp"
#include "ranklab/synth.hpp"

namespace ranklab::cli {

namespace fs = std::filesystem;

/// Settings of the analysis commands (estimate, simulate, frontier, cluster).
struct AnalysisConfig {
  bool include_user_covariates = true;
  double grad_tol = 1e-6;
  double rel_f_tol = 1e-10;
  long long max_iters = 500;
  long long exact_cap = static_cast<long long>(kDefaultExactCap);
  std::string garble_mode = "universe";
  long long cluster_k = 3;
  long long cluster_min_slots = 2;
  long long cluster_max_iters = 100;
  long long cluster_seed = 1;
  long long frontier_seeds = 10;
  std::vector<double> frontier_alphas{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  long long counterfactual_seed = 1;

  static AnalysisConfig from_config(const KeyValueConfig& c) {
    AnalysisConfig a;
    a.include_user_covariates = c.get_bool("projection.include_user_covariates", a.include_user_covariates);
    a.grad_tol = c.get_double("optim.grad_tol", a.grad_tol);
    a.rel_f_tol = c.get_double("optim.rel_f_tol", a.rel_f_tol);
    a.max_iters = c.get_int("optim.max_iters", a.max_iters);
    a.exact_cap = c.get_int("tielogit.exact_cap", a.exact_cap);
    a.garble_mode = c.get_string("garble.mode", a.garble_mode);
    a.cluster_k = c.get_int("cluster.k", a.cluster_k);
    a.cluster_min_slots = c.get_int("cluster.min_slots", a.cluster_min_slots);
    a.cluster_max_iters = c.get_int("cluster.max_iters", a.cluster_max_iters);
    a.cluster_seed = c.get_int("cluster.seed", a.cluster_seed);
    a.frontier_seeds = c.get_int("frontier.seeds", a.frontier_seeds);
    a.frontier_alphas = c.get_doubles("frontier.alphas", a.frontier_alphas);
    a.counterfactual_seed = c.get_int("counterfactual.seed", a.counterfactual_seed);
    const std::vector<std::string> known{"projection.include_user_covariates", "optim.grad_tol", "optim.rel_f_tol",
                                         "optim.max_iters", "tielogit.exact_cap", "garble.mode", "cluster.k",
                                         "cluster.min_slots", "cluster.max_iters", "cluster.seed", "frontier.seeds",
                                         "frontier.alphas", "counterfactual.seed"};
    if (auto unknown = c.unknown_keys(known); !unknown.empty())
      throw UsageError("unknown analysis config key '" + unknown.front() + "'");
    counterfact::parse_garble_mode(a.garble_mode);
    if (a.max_iters < 1 || a.exact_cap < 1 || a.cluster_min_slots < 1 || a.cluster_max_iters < 0 || a.frontier_seeds < 1)
      throw UsageError("analysis config values out of range");
    return a;
  }

  KeyValueConfig to_config() const {
    KeyValueConfig c;
    auto num = [](double v) { return metrics::fmt(v, "%.17g"); };
    c.set("projection.include_user_covariates", include_user_covariates ? "true" : "false");
    c.set("optim.grad_tol", num(grad_tol));
    c.set("optim.rel_f_tol", num(rel_f_tol));
    c.set("optim.max_iters", std::to_string(max_iters));
    c.set("tielogit.exact_cap", std::to_string(exact_cap));
    c.set("garble.mode", garble_mode);
    c.set("cluster.k", std::to_string(cluster_k));
    c.set("cluster.min_slots", std::to_string(cluster_min_slots));
    c.set("cluster.max_iters", std::to_string(cluster_max_iters));
    c.set("cluster.seed", std::to_string(cluster_seed));
    c.set("frontier.seeds", std::to_string(frontier_seeds));
    std::string alphas;
    for (std::size_t i = 0; i < frontier_alphas.size(); ++i) alphas += (i ? "," : "") + metrics::fmt(frontier_alphas[i], "%.6g");
    c.set("frontier.alphas", alphas);
    c.set("counterfactual.seed", std::to_string(counterfactual_seed));
    return c;
  }

  estimate::FitOptions fit_options() const {
    estimate::FitOptions o;
    o.optim.grad_tol = grad_tol;
    o.optim.rel_f_tol = rel_f_tol;
    o.optim.max_iters = static_cast<std::size_t>(max_iters);
    o.exact_cap = static_cast<std::size_t>(exact_cap);
    return o;
  }
};

/// Parses "0,0.25,1" strictly; bad items are validation errors.
inline std::vector<double> parse_alphas(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc{} || ptr != item.data() + item.size() || !std::isfinite(v))
      throw ValidationError("malformed blend weight '" + item + "'");
    if (v < 0.0 || v > 1.0) throw ValidationError("blend weight " + item + " outside [0,1]");
    out.push_back(v);
  }
  if (out.empty()) throw ValidationError("empty blend-weight list");
  return out;
}

namespace detail {

struct Loaded {
  Dataset data;
  estimate::ModelParams params;
  std::vector<double> utilities;
  estimate::NormalizedParams norm;
};

inline Loaded load_fitted(const fs::path& data_dir, const fs::path& params_dir) {
  Loaded l;
  l.data = io::read_dataset(data_dir);
  nlohmann::json pj, qj;
  try {
    pj = nlohmann::json::parse(io::read_text_file(params_dir / "params.json"));
    qj = nlohmann::json::parse(io::read_text_file(params_dir / "projection.json"));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed parameter files: ") + e.what());
  }
  l.params = estimate::params_from_json(pj, qj);
  l.utilities = estimate::expected_utilities(l.data, l.params.request, l.params.projection);
  l.norm = estimate::normalize_params(l.params.request, l.params.click);
  return l;
}

inline AnalysisConfig analysis_config(const std::string& path) {
  return path.empty() ? AnalysisConfig{} : AnalysisConfig::from_config(KeyValueConfig::load(path));
}

inline void write_cluster_outputs(const Dataset& data, const AnalysisConfig& cfg, std::size_t k, std::uint64_t seed,
                                  const fs::path& out_dir, manifest::RunManifest& m, std::ostream& out,
                                  std::ostream& err) {
  const auto features = cluster::filter_features(data, static_cast<std::size_t>(cfg.cluster_min_slots));
  for (const auto& w : features.warnings) err << "warning: " << w << '\n';
  const auto assignment = cluster::k_medoids(features, k, seed, static_cast<std::size_t>(cfg.cluster_max_iters));
  io::write_text_file(out_dir / "clusters.csv", cluster::clusters_csv(features.user_ids, assignment));
  io::write_text_file(out_dir / "medoids.csv", cluster::medoids_csv(features, assignment));
  m.outputs.insert(m.outputs.end(), {"clusters.csv", "medoids.csv"});
  const double sil = cluster::silhouette(features.values, features.dim, assignment);
  out << "k-medoids: k=" << k << " cost=" << metrics::fmt(assignment.total_cost) << " swaps=" << assignment.swaps
      << " silhouette=" << metrics::fmt(sil, "%.4f") << '\n';

  const auto fits = cluster::fit_by_cluster(data, features.user_ids, assignment, cfg.fit_options(),
                                            cfg.include_user_covariates);
  for (const auto& f : fits) {
    auto j = estimate::params_to_json(f.params);
    j["cluster"] = f.cluster;
    j["medoid_user"] = f.medoid_user;
    j["profile"] = cluster::profile_to_json(f.profile);
    j["projection"] = estimate::projection_to_json(f.params.projection);
    j["silhouette"] = sil;
    const std::string name = "params_" + std::to_string(f.cluster) + ".json";
    io::write_text_file(out_dir / name, j.dump(2) + "\n");
    m.outputs.push_back(name);
  }
}

}  // namespace detail

/// Runs one command line (without the program name). Returns the exit code:
/// 0 success, 2 usage, 3 I/O, 4 validation, 5 numerical.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"ranklab: synthetic search logs, two-stage click/request estimation and ranking counterfactuals",
               "ranklab"};
  app.require_subcommand(1);
  long long threads = 0;
  app.add_option("--threads", threads, "worker threads (default: RANKLAB_THREADS, then all cores)")
      ->check(CLI::NonNegativeNumber);

  std::string config, data_dir, params_dir, out_dir, policy_text = "statusquo", alphas_text;
  std::optional<std::uint64_t> seed;
  bool print_config = false, garble = false;
  long long n_seeds = 0, k = 0, clusters = 0;

  auto* gen = app.add_subcommand("generate", "generate a synthetic market and its status-quo search logs");
  gen->add_option("--config", config, "market config file (key = value)");
  gen->add_option("--out", out_dir, "dataset directory to write");
  gen->add_option("--seed", seed, "override the config seed");
  gen->add_flag("--print-config", print_config, "print the effective config and exit");

  auto* val = app.add_subcommand("validate", "check a dataset directory for structural violations");
  val->add_option("--data", data_dir, "dataset directory")->required();

  auto* est = app.add_subcommand("estimate", "fit the request, projection and click models");
  est->add_option("--data", data_dir, "dataset directory")->required();
  est->add_option("--out", out_dir, "output directory")->required();
  est->add_option("--config", config, "analysis config file");
  est->add_option("--clusters", clusters, "also cluster users into K groups and fit each")->check(CLI::PositiveNumber);
  est->add_option("--seed", seed, "seed for clustering ties");

  auto* rep = app.add_subcommand("report", "descriptive summary, position shares, price CDFs, Lorenz curves");
  rep->add_option("--data", data_dir, "dataset directory")->required();
  rep->add_option("--out", out_dir, "output directory")->required();

  auto* sim = app.add_subcommand("simulate", "re-rank searches under a policy and predict choices");
  sim->add_option("--data", data_dir, "dataset directory")->required();
  sim->add_option("--params", params_dir, "directory with params.json and projection.json")->required();
  sim->add_option("--out", out_dir, "output directory")->required();
  sim->add_option("--policy", policy_text, "statusquo | personalized | random | blend:ALPHA");
  sim->add_flag("--garble", garble, "relabel room identities across searches");
  sim->add_option("--seed", seed, "seed for random orders and garbling");
  sim->add_option("--config", config, "analysis config file");

  auto* fro = app.add_subcommand("frontier", "sweep the blend weight and record congestion and utility");
  fro->add_option("--data", data_dir, "dataset directory")->required();
  fro->add_option("--params", params_dir, "directory with params.json and projection.json")->required();
  fro->add_option("--out", out_dir, "output directory")->required();
  fro->add_option("--alphas", alphas_text, "comma-separated blend weights in [0,1]");
  fro->add_option("--seeds", n_seeds, "seeds per blend weight")->check(CLI::PositiveNumber);
  fro->add_option("--seed", seed, "first seed");
  fro->add_flag("--garble", garble, "relabel room identities across searches");
  fro->add_option("--config", config, "analysis config file");

  auto* clu = app.add_subcommand("cluster", "k-medoids on filter frequencies and per-cluster estimation");
  clu->add_option("--data", data_dir, "dataset directory")->required();
  clu->add_option("--out", out_dir, "output directory")->required();
  clu->add_option("--k", k, "number of clusters")->check(CLI::PositiveNumber);
  clu->add_option("--seed", seed, "seed for equal-cost swap ties");
  clu->add_option("--config", config, "analysis config file");

  for (auto* sub : {est, rep, sim, fro, clu}) sub->add_flag("--print-config", print_config, "print analysis config defaults and exit");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  set_thread_count(static_cast<std::size_t>(threads));
  const std::string command = app.get_subcommands().front()->get_name();
  manifest::RunManifest m;
  m.command = command;
  m.arguments = args;
  m.output = out_dir;
  if (!config.empty()) m.config_path = config;

  try {
    if (command == "generate") {
      KeyValueConfig kv = config.empty() ? KeyValueConfig{} : KeyValueConfig::load(config);
      auto mc = synth::MarketConfig::from_config(kv);
      if (seed) mc.seed = *seed;
      if (print_config) {
        out << mc.to_config().to_string();
        return 0;
      }
      if (out_dir.empty()) throw UsageError("generate needs --out");
      if (!config.empty()) m.add_input(config);
      m.seed = mc.seed;
      const auto data = synth::generate_dataset(mc);
      io::write_dataset(data, out_dir);
      m.outputs = {"users.jsonl", "listings.jsonl", "searches.jsonl", "meta.json"};
      m.write(out_dir);
      out << "generated " << data.users.size() << " users, " << data.listings.size() << " rooms, "
          << data.searches.size() << " searches into " << out_dir << '\n';
      return 0;
    }

    if (print_config) {
      out << AnalysisConfig{}.to_config().to_string();
      return 0;
    }

    if (command == "validate") {
      const auto data = io::read_dataset(data_dir);
      const auto report = validate_dataset(data);
      for (const auto& v : report.violations)
        out << violation_label(v.kind) << ": " << v.entity << (v.detail.empty() ? "" : " (" + v.detail + ")") << '\n';
      out << (report.valid() ? "valid" : "invalid") << " (" << report.violations.size() << " violations)\n";
      return report.valid() ? 0 : static_cast<int>(Error::Category::validation);
    }

    const auto cfg = detail::analysis_config(config);
    if (!config.empty()) m.add_input(config);
    m.add_input(data_dir);
    if (!params_dir.empty()) m.add_input(params_dir);
    io::ensure_directory(out_dir);

    if (command == "estimate") {
      const auto data = io::read_dataset(data_dir);
      if (auto report = validate_dataset(data); !report.valid())
        throw ValidationError("dataset has " + std::to_string(report.violations.size()) + " structural violations");
      const auto params = estimate::fit_model(data, cfg.fit_options(), cfg.include_user_covariates);
      for (const auto& w : params.projection.warnings) err << "warning: " << w << '\n';
      io::write_text_file(fs::path(out_dir) / "params.json", estimate::params_to_json(params).dump(2) + "\n");
      io::write_text_file(fs::path(out_dir) / "projection.json",
                          estimate::projection_to_json(params.projection).dump(2) + "\n");
      m.outputs = {"params.json", "projection.json"};
      out << "request: loglik " << metrics::fmt(params.request.fit.loglik) << ", pseudo-R2 "
          << metrics::fmt(params.request.fit.pseudo_r2, "%.4f") << ", " << params.request.fit.n_sets << " sets\n"
          << "click: loglik " << metrics::fmt(params.click.fit.loglik) << ", pseudo-R2 "
          << metrics::fmt(params.click.fit.pseudo_r2, "%.4f") << ", " << params.click.fit.n_sets << " sets\n";
      if (clusters > 0) {
        m.seed = seed.value_or(static_cast<std::uint64_t>(cfg.cluster_seed));
        detail::write_cluster_outputs(data, cfg, static_cast<std::size_t>(clusters), *m.seed, out_dir, m, out, err);
      }
    } else if (command == "report") {
      const auto data = io::read_dataset(data_dir);
      const fs::path dir(out_dir);
      io::write_text_file(dir / "summary.txt", metrics::summary_text(metrics::summary_report(data)));
      const auto pos = metrics::position_shares(data.searches);
      io::write_text_file(dir / "positions.csv", metrics::positions_csv(pos));
      io::write_text_file(dir / "price_cdfs.csv", metrics::price_cdfs_csv(metrics::price_cdfs(data)));
      io::write_text_file(dir / "lorenz.csv", metrics::lorenz_csv(data));
      m.outputs = {"summary.txt", "positions.csv", "price_cdfs.csv", "lorenz.csv"};
      const auto& s = pos.request_given_click_slope;
      out << "P(request|click) slope in position: " << metrics::fmt(s.slope, "%.6f") << " (se "
          << metrics::fmt(s.se, "%.6f") << ")\n";
    } else if (command == "simulate") {
      const auto policy = counterfact::RankingPolicy::parse(policy_text);
      const auto l = detail::load_fitted(data_dir, params_dir);
      const auto logs = counterfact::prepare_logs(l.data, l.utilities);
      m.seed = seed.value_or(static_cast<std::uint64_t>(cfg.counterfactual_seed));
      const auto cf = counterfact::run_policy(logs, l.params.click, policy, *m.seed, garble,
                                              counterfact::parse_garble_mode(cfg.garble_mode));
      io::write_text_file(fs::path(out_dir) / "searches_cf.jsonl", counterfact::counterfactual_jsonl(logs, cf));
      m.outputs = {"searches_cf.jsonl"};
      const auto n_rooms = logs.room_ids.size();
      out << "policy " << policy.label() << ": gini(clicks) "
          << metrics::fmt(metrics::gini(metrics::room_counts(cf.congestion_room, cf.clicked, n_rooms)), "%.4f");
      if (std::any_of(cf.requested.begin(), cf.requested.end(), [](auto v) { return v != 0; }))
        out << ", gini(requests) "
            << metrics::fmt(metrics::gini(metrics::room_counts(cf.congestion_room, cf.requested, n_rooms)), "%.4f")
            << ", mean utility of requests " << metrics::fmt(metrics::avg_request_utility(logs, cf, l.norm), "%.2f");
      out << '\n';
    } else if (command == "frontier") {
      metrics::FrontierOptions fo;
      fo.alphas = alphas_text.empty() ? cfg.frontier_alphas : parse_alphas(alphas_text);
      for (double a : fo.alphas)
        if (!(a >= 0.0 && a <= 1.0)) throw ValidationError("blend weight outside [0,1]");
      fo.n_seeds = static_cast<std::size_t>(n_seeds > 0 ? n_seeds : cfg.frontier_seeds);
      fo.base_seed = seed.value_or(static_cast<std::uint64_t>(cfg.counterfactual_seed));
      fo.garble = garble;
      fo.garble_mode = counterfact::parse_garble_mode(cfg.garble_mode);
      m.seed = fo.base_seed;
      const auto l = detail::load_fitted(data_dir, params_dir);
      const auto logs = counterfact::prepare_logs(l.data, l.utilities);
      const auto f = metrics::frontier_sweep(logs, l.params.click, l.norm, fo);
      io::write_text_file(fs::path(out_dir) / "frontier.csv", metrics::frontier_csv(f));
      m.outputs = {"frontier.csv"};
      out << "frontier: " << f.rows.size() << " runs over " << f.points.size() << " blend weights\n";
    } else if (command == "cluster") {
      const auto data = io::read_dataset(data_dir);
      m.seed = seed.value_or(static_cast<std::uint64_t>(cfg.cluster_seed));
      const auto kk = static_cast<std::size_t>(k > 0 ? k : cfg.cluster_k);
      detail::write_cluster_outputs(data, cfg, kk, *m.seed, out_dir, m, out, err);
    }
    m.write(out_dir);
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(Error::Category::io);
  } catch (const std::bad_alloc&) {
    err << "error: out of memory\n";
    return 1;
  }
}

}  // namespace ranklab::cli

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "ranklab/domain.hpp"
#include "ranklab/errors.hpp"
#include "ranklab/layout.hpp"
#include "ranklab/optim.hpp"
#include "ranklab/parallel.hpp"
#include "ranklab/tielogit.hpp"

namespace ranklab::estimate {

using nlohmann::json;

struct FitOptions {
  optim::Options optim;
  std::size_t exact_cap = kDefaultExactCap;
  double hessian_step = 1e-5;
};

/// Maximum-likelihood fit of one stage.
struct StageFit {
  std::vector<std::string> names;
  std::vector<double> coef;
  std::vector<double> se;
  double loglik = 0.0;
  double loglik0 = 0.0;  // all-zero parameters
  double pseudo_r2 = 0.0;
  std::size_t n_sets = 0;
  std::size_t n_skipped = 0;
  std::size_t iterations = 0;
  std::string stop_reason;

  std::size_t index_of(const std::string& name) const {
    for (std::size_t j = 0; j < names.size(); ++j)
      if (names[j] == name) return j;
    throw ValidationError("no coefficient named '" + name + "'");
  }
  double operator[](const std::string& name) const { return coef[index_of(name)]; }
};

/// Identifying spread of each column: RMS deviation from its choice-set mean.
inline std::vector<double> within_set_scale(const StageData& data) {
  const std::size_t p = data.n_params;
  std::vector<double> ss(p, 0.0), mean(p);
  for (std::size_t k = 0; k < data.n_sets(); ++k) {
    const std::size_t b = data.offsets[k], e = data.offsets[k + 1];
    std::fill(mean.begin(), mean.end(), 0.0);
    for (std::size_t r = b; r < e; ++r)
      for (std::size_t j = 0; j < p; ++j) mean[j] += data.rows[r * p + j];
    for (auto& m : mean) m /= static_cast<double>(e - b);
    for (std::size_t r = b; r < e; ++r)
      for (std::size_t j = 0; j < p; ++j) {
        const double d = data.rows[r * p + j] - mean[j];
        ss[j] += d * d;
      }
  }
  for (auto& s : ss) s = data.n_rows() ? std::sqrt(s / static_cast<double>(data.n_rows())) : 0.0;
  return ss;
}

/// Maximises the two-tier logit likelihood of `data` from a zero start.
///
/// The optimiser works on columns rescaled by their within-set spread so that
/// prices in euros and 0/1 dummies share a scale; estimates and standard
/// errors are mapped back afterwards.
inline StageFit fit_stage(const StageData& data, const FitOptions& opt = {}) {
  if (data.n_sets() == 0) throw ValidationError("no informative choice sets to estimate from");
  const std::size_t p = data.n_params;

  const auto scale = within_set_scale(data);
  for (std::size_t j = 0; j < p; ++j) {
    double magnitude = 0.0;
    for (std::size_t r = 0; r < data.n_rows(); ++r) magnitude = std::max(magnitude, std::abs(data.rows[r * p + j]));
    if (!(scale[j] > 1e-12 * std::max(1.0, magnitude)))
      throw ValidationError("covariate '" + data.names[j] +
                            "' is constant within every choice set and is not identified");
  }

  StageData scaled = data;
  for (std::size_t r = 0; r < scaled.n_rows(); ++r)
    for (std::size_t j = 0; j < p; ++j) scaled.rows[r * p + j] /= scale[j];

  const optim::Objective objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    std::vector<double> grad(p);
    double ll;
    try {
      ll = log_likelihood_and_gradient(std::span<const double>(x.data(), p), scaled, grad, opt.exact_cap);
    } catch (const NumericalError&) {
      // outside the region where the exact formula is representable
      g.setZero(static_cast<Eigen::Index>(p));
      return std::numeric_limits<double>::infinity();
    }
    g.resize(static_cast<Eigen::Index>(p));
    for (std::size_t j = 0; j < p; ++j) g[static_cast<Eigen::Index>(j)] = -grad[j];
    return -ll;
  };

  const auto result = optim::bfgs_minimize(objective, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p)), opt.optim);
  if (!result.converged)
    throw NumericalError("optimiser did not converge (" + result.reason + ") after " +
                         std::to_string(result.iterations) + " iterations");

  const Eigen::MatrixXd hess = optim::hessian_from_gradient(objective, result.x, opt.hessian_step);
  Eigen::LLT<Eigen::MatrixXd> llt(hess);
  if (llt.info() != Eigen::Success)
    throw NumericalError("observed information matrix is not positive definite at the optimum");
  const Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(hess.rows(), hess.cols()));

  StageFit fit;
  fit.names = data.names;
  fit.coef.resize(p);
  fit.se.resize(p);
  for (std::size_t j = 0; j < p; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    fit.coef[j] = result.x[jj] / scale[j];
    fit.se[j] = std::sqrt(cov(jj, jj)) / scale[j];
  }
  fit.loglik = -result.f;
  fit.loglik0 = log_likelihood(std::vector<double>(p, 0.0), scaled, opt.exact_cap);
  fit.pseudo_r2 = 1.0 - fit.loglik / fit.loglik0;
  fit.n_sets = data.n_sets();
  fit.n_skipped = data.skipped_degenerate;
  fit.iterations = result.iterations;
  fit.stop_reason = result.reason;
  return fit;
}

// ---------------------------------------------------------------------------
// Slot access

/// Resolves users and listings once per search for repeated covariate passes.
class SlotView {
 public:
  explicit SlotView(const Dataset& data) : data_(data), spec_(CovariateSpec::from(data.meta)) {
    offsets_.assign(data.searches.size() + 1, 0);
    user_.resize(data.searches.size());
    for (std::size_t k = 0; k < data.searches.size(); ++k) {
      const auto& s = data.searches[k];
      offsets_[k + 1] = offsets_[k] + s.slots.size();
      auto u = data.find_user(s.user_id);
      if (!u) throw ValidationError("search '" + s.search_id + "' references unknown user '" + s.user_id + "'");
      user_[k] = *u;
    }
    room_.resize(offsets_.back());
    for (std::size_t k = 0; k < data.searches.size(); ++k)
      for (std::size_t j = 0; j < data.searches[k].slots.size(); ++j) {
        const auto& id = data.searches[k].slots[j].room_id;
        auto r = data.find_room(id);
        if (!r) throw ValidationError("search '" + data.searches[k].search_id + "' references unknown room '" + id + "'");
        room_[offsets_[k] + j] = *r;
      }
  }

  std::size_t n_searches() const { return user_.size(); }
  std::size_t n_slots() const { return offsets_.back(); }
  std::size_t offset(std::size_t k) const { return offsets_[k]; }
  const std::vector<std::size_t>& offsets() const { return offsets_; }
  const UserProfile& user(std::size_t k) const { return data_.users[user_[k]]; }
  const Listing& listing(std::size_t k, std::size_t j) const { return data_.listings[room_[offsets_[k] + j]]; }
  const Dataset& data() const { return data_; }
  const CovariateSpec& spec() const { return spec_; }

  DerivedCovariates covariates(std::size_t k, std::size_t j) const {
    const auto& s = data_.searches[k];
    return derive_covariates(user(k), listing(k, j), s.timestamp, s.slots[j].position, spec_);
  }

 private:
  const Dataset& data_;
  CovariateSpec spec_;
  std::vector<std::size_t> offsets_, user_, room_;
};

// ---------------------------------------------------------------------------
// Request stage

struct RequestParams {
  StageFit fit;
  District baseline = District::greater_barcelona;

  std::span<const double> beta1() const { return {fit.coef.data(), layout::kBeta1Size}; }
  std::span<const double> beta2() const { return {fit.coef.data() + layout::req::days, layout::kBeta2Size}; }
  std::span<const double> beta_xz() const { return {fit.coef.data() + layout::req::gender_match, layout::kBetaXZSize}; }
  double price() const { return fit.coef[layout::req::price]; }
};

inline StageData request_stage_data(const Dataset& data) {
  const SlotView view(data);
  return build_stage_data(data, Stage::request, layout::request_names(data.meta.baseline_district),
                          [&](std::size_t k, std::size_t j, std::span<double> out) {
                            const auto row = layout::request_row(view.covariates(k, j));
                            std::copy(row.begin(), row.end(), out.begin());
                          });
}

inline RequestParams fit_request_model(const Dataset& data, const FitOptions& opt = {}) {
  return {fit_stage(request_stage_data(data), opt), data.meta.baseline_district};
}

// ---------------------------------------------------------------------------
// Projection of hidden covariates on visible ones

inline std::vector<std::string> projection_regressor_names(District baseline, bool include_user_covariates) {
  std::vector<std::string> names{"intercept"};
  const auto x1 = x1_names(baseline);
  names.insert(names.end(), x1.begin(), x1.end());
  names.insert(names.end(), {"position", "position_sq"});
  for (const auto& n : x1) names.push_back(n + "_x_position");
  if (include_user_covariates) {
    const std::vector<std::string> z{"age", "female", "student", "worker"};
    names.insert(names.end(), z.begin(), z.end());
    for (const auto& n : z) names.push_back(n + "_x_position");
  }
  return names;
}

inline void projection_regressors(const DerivedCovariates& c, const UserProfile& u, bool include_user_covariates,
                                  std::span<double> out) {
  const double pos = c.position;
  std::size_t i = 0;
  out[i++] = 1.0;
  for (double v : c.x1) out[i++] = v;
  out[i++] = pos;
  out[i++] = pos * pos;
  for (double v : c.x1) out[i++] = v * pos;
  if (include_user_covariates) {
    const double z[4] = {static_cast<double>(u.age), u.female ? 1.0 : 0.0, u.student ? 1.0 : 0.0, u.worker ? 1.0 : 0.0};
    for (double v : z) out[i++] = v;
    for (double v : z) out[i++] = v * pos;
  }
}

struct ProjectionComponent {
  std::string name;
  bool binary = true;
  std::vector<double> coef;       // aligned with regressor names; 0 for dropped
  std::vector<std::size_t> dropped;
  double r2 = 0.0;
};

struct ProjectionModel {
  bool include_user_covariates = true;
  District baseline = District::greater_barcelona;
  std::vector<std::string> regressors;
  std::vector<ProjectionComponent> components;  // x2 order
  std::vector<std::string> warnings;

  std::array<double, kX2Size> predict(const DerivedCovariates& c, const UserProfile& u) const {
    std::vector<double> x(regressors.size());
    projection_regressors(c, u, include_user_covariates, x);
    std::array<double, kX2Size> out{};
    for (std::size_t k = 0; k < kX2Size; ++k) {
      const auto& comp = components[k];
      double v = 0.0;
      for (std::size_t j = 0; j < x.size(); ++j) v += comp.coef[j] * x[j];
      out[k] = comp.binary ? std::clamp(v, 0.0, 1.0) : v;
    }
    return out;
  }
};

/// Least squares with rank detection: columns are rescaled, pivoted QR on the
/// normal equations decides which are collinear, and the rest are solved.
/// Returns the dropped column indices.
inline std::vector<std::size_t> solve_normal_equations(const Eigen::MatrixXd& xtx, const Eigen::MatrixXd& xty,
                                                       Eigen::MatrixXd& coef) {
  const auto p = xtx.rows();
  Eigen::VectorXd d(p);
  for (Eigen::Index j = 0; j < p; ++j) d[j] = xtx(j, j) > 0.0 ? 1.0 / std::sqrt(xtx(j, j)) : 0.0;
  const Eigen::MatrixXd a = d.asDiagonal() * xtx * d.asDiagonal();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  const auto rank = qr.rank();
  std::vector<std::size_t> keep, dropped;
  for (Eigen::Index i = 0; i < p; ++i) {
    const auto col = qr.colsPermutation().indices()[i];
    (i < rank && d[col] > 0.0 ? keep : dropped).push_back(static_cast<std::size_t>(col));
  }
  std::sort(keep.begin(), keep.end());
  std::sort(dropped.begin(), dropped.end());
  const auto m = static_cast<Eigen::Index>(keep.size());
  Eigen::MatrixXd ak(m, m), bk(m, xty.cols());
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) ak(i, j) = a(keep[i], keep[j]);
    bk.row(i) = d[keep[i]] * xty.row(keep[i]);
  }
  const Eigen::MatrixXd sol = ak.ldlt().solve(bk);
  coef = Eigen::MatrixXd::Zero(p, xty.cols());
  for (Eigen::Index i = 0; i < m; ++i) coef.row(keep[i]) = d[keep[i]] * sol.row(i);
  return dropped;
}

/// OLS of every hidden component on the regressor set over all result rows.
inline ProjectionModel fit_projection(const Dataset& data, bool include_user_covariates = true) {
  const SlotView view(data);
  ProjectionModel model;
  model.include_user_covariates = include_user_covariates;
  model.baseline = data.meta.baseline_district;
  model.regressors = projection_regressor_names(model.baseline, include_user_covariates);
  const auto p = static_cast<Eigen::Index>(model.regressors.size());
  const auto q = static_cast<Eigen::Index>(kX2Size);
  if (view.n_slots() == 0) throw ValidationError("no search results to fit the projection on");

  const Partition part{view.n_searches(), kReductionChunks};
  std::vector<Eigen::MatrixXd> xtx(part.size(), Eigen::MatrixXd::Zero(p, p));
  std::vector<Eigen::MatrixXd> xty(part.size(), Eigen::MatrixXd::Zero(p, q));
  std::vector<Eigen::VectorXd> ysum(part.size(), Eigen::VectorXd::Zero(q)), yss(part.size(), Eigen::VectorXd::Zero(q));
  parallel_for(part.size(), [&](std::size_t c) {
    Eigen::VectorXd x(p), y(q);
    for (std::size_t k = part.begin(c); k < part.end(c); ++k)
      for (std::size_t j = 0; j < data.searches[k].slots.size(); ++j) {
        const auto cov = view.covariates(k, j);
        projection_regressors(cov, view.user(k), include_user_covariates, std::span<double>(x.data(), x.size()));
        for (Eigen::Index i = 0; i < q; ++i) y[i] = cov.x2[i];
        xtx[c].selfadjointView<Eigen::Lower>().rankUpdate(x);
        xty[c].noalias() += x * y.transpose();
        ysum[c] += y;
        yss[c] += y.cwiseProduct(y);
      }
  });
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p), b = Eigen::MatrixXd::Zero(p, q);
  Eigen::VectorXd sy = Eigen::VectorXd::Zero(q), syy = Eigen::VectorXd::Zero(q);
  for (std::size_t c = 0; c < part.size(); ++c) {
    a += xtx[c];
    b += xty[c];
    sy += ysum[c];
    syy += yss[c];
  }
  a = a.selfadjointView<Eigen::Lower>();

  Eigen::MatrixXd coef;
  const auto dropped = solve_normal_equations(a, b, coef);
  for (auto j : dropped)
    model.warnings.push_back("projection: regressor '" + model.regressors[j] + "' is collinear and was dropped");

  // residual sums of squares in a second pass (no cancellation)
  std::vector<Eigen::VectorXd> ssr(part.size(), Eigen::VectorXd::Zero(q));
  parallel_for(part.size(), [&](std::size_t c) {
    Eigen::VectorXd x(p);
    for (std::size_t k = part.begin(c); k < part.end(c); ++k)
      for (std::size_t j = 0; j < data.searches[k].slots.size(); ++j) {
        const auto cov = view.covariates(k, j);
        projection_regressors(cov, view.user(k), include_user_covariates, std::span<double>(x.data(), x.size()));
        const Eigen::VectorXd fitted = coef.transpose() * x;
        for (Eigen::Index i = 0; i < q; ++i) {
          const double r = cov.x2[i] - fitted[i];
          ssr[c][i] += r * r;
        }
      }
  });
  Eigen::VectorXd total_ssr = Eigen::VectorXd::Zero(q);
  for (const auto& s : ssr) total_ssr += s;

  const auto names = x2_names();
  const double n = static_cast<double>(view.n_slots());
  for (Eigen::Index i = 0; i < q; ++i) {
    ProjectionComponent comp;
    comp.name = names[i];
    comp.binary = i != static_cast<Eigen::Index>(x2::days);
    comp.coef.assign(coef.col(i).data(), coef.col(i).data() + p);
    comp.dropped = dropped;
    const double sst = syy[i] - sy[i] * sy[i] / n;
    comp.r2 = sst > 1e-12 * std::max(1.0, syy[i]) ? 1.0 - total_ssr[i] / sst : 1.0;
    model.components.push_back(std::move(comp));
  }
  return model;
}

// ---------------------------------------------------------------------------
// Expected request utility

/// Û = x1 beta1 + x̂2 beta2 + (x̂2 ⊗ Z) beta_xz, with the match dummies standing
/// for the x2 ⊗ Z block.
inline double expected_utility(const UserProfile& user, const DerivedCovariates& cov, const RequestParams& request,
                               const ProjectionModel& projection) {
  const auto x2hat = projection.predict(cov, user);
  double u = 0.0;
  for (std::size_t i = 0; i < kX1Size; ++i) u += cov.x1[i] * request.fit.coef[i];
  for (std::size_t k = 0; k < kX2Size; ++k) u += x2hat[k] * request.fit.coef[layout::request_column_of_x2(k)];
  return u;
}

/// Û for every slot, search-major.
inline std::vector<double> expected_utilities(const Dataset& data, const RequestParams& request,
                                              const ProjectionModel& projection) {
  const SlotView view(data);
  std::vector<double> out(view.n_slots());
  parallel_for(view.n_searches(), [&](std::size_t k) {
    for (std::size_t j = 0; j < data.searches[k].slots.size(); ++j)
      out[view.offset(k) + j] = expected_utility(view.user(k), view.covariates(k, j), request, projection);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Click stage

struct ClickParams {
  StageFit fit;

  std::span<const double> beta_pos() const { return {fit.coef.data(), 5}; }
  double beta_u() const { return fit.coef[layout::clk::u_hat]; }
  double beta_pos_u() const { return fit.coef[layout::clk::position_x_u_hat]; }

  double index(int position, double u_hat) const { return layout::dot(layout::click_row(position, u_hat), fit.coef); }
};

inline std::vector<std::size_t> slot_offsets(const Dataset& data) {
  std::vector<std::size_t> off(data.searches.size() + 1, 0);
  for (std::size_t k = 0; k < data.searches.size(); ++k) off[k + 1] = off[k] + data.searches[k].slots.size();
  return off;
}

inline StageData click_stage_data(const Dataset& data, std::span<const double> utilities) {
  const auto off = slot_offsets(data);
  if (utilities.size() != off.back()) throw ValidationError("need one expected utility per search result");
  return build_stage_data(data, Stage::click, layout::click_names(),
                          [&](std::size_t k, std::size_t j, std::span<double> out) {
                            const auto row = layout::click_row(data.searches[k].slots[j].position, utilities[off[k] + j]);
                            std::copy(row.begin(), row.end(), out.begin());
                          });
}

inline ClickParams fit_click_model(const Dataset& data, std::span<const double> utilities, const FitOptions& opt = {}) {
  return {fit_stage(click_stage_data(data, utilities), opt)};
}

// ---------------------------------------------------------------------------
// Full pipeline

struct ModelParams {
  RequestParams request;
  ProjectionModel projection;
  ClickParams click;
};

inline ModelParams fit_model(const Dataset& data, const FitOptions& opt = {}, bool include_user_covariates = true) {
  ModelParams m;
  m.request = fit_request_model(data, opt);
  m.projection = fit_projection(data, include_user_covariates);
  const auto u = expected_utilities(data, m.request, m.projection);
  m.click = fit_click_model(data, u, opt);
  return m;
}

// ---------------------------------------------------------------------------
// Euro normalisation

struct NormalizedParams {
  double price_scale = 1.0;  // |beta_price|
  double u_scale = 1.0;      // |beta_U|
  std::vector<std::string> request_names, click_names;
  std::vector<double> request, click;

  /// Û in euros.
  double utility(double u_hat) const { return u_hat / price_scale; }
};

/// Request coefficients over |beta_price| (price becomes -1); click position
/// terms over |beta_U * beta_price|; Û's own coefficient over |beta_U|.
inline NormalizedParams normalize_params(const RequestParams& request, const ClickParams& click) {
  const double bp = request.price();
  const double bu = click.beta_u();
  if (bp == 0.0 || !std::isfinite(bp)) throw NumericalError("cannot normalise: price coefficient is zero");
  if (bu == 0.0 || !std::isfinite(bu)) throw NumericalError("cannot normalise: utility coefficient is zero");
  NormalizedParams n;
  n.price_scale = std::abs(bp);
  n.u_scale = std::abs(bu);
  n.request_names = request.fit.names;
  n.click_names = click.fit.names;
  for (std::size_t j = 0; j < request.fit.coef.size(); ++j)
    n.request.push_back(j == layout::req::price ? std::copysign(1.0, bp) : request.fit.coef[j] / n.price_scale);
  for (std::size_t j = 0; j < click.fit.coef.size(); ++j)
    n.click.push_back(j == layout::clk::u_hat ? std::copysign(1.0, bu)
                                              : click.fit.coef[j] / (n.u_scale * n.price_scale));
  return n;
}

// ---------------------------------------------------------------------------
// JSON

inline json stage_to_json(const StageFit& f) {
  json coefs = json::object();
  for (std::size_t j = 0; j < f.names.size(); ++j) coefs[f.names[j]] = {{"estimate", f.coef[j]}, {"se", f.se[j]}};
  return {{"coefficients", coefs},       {"order", f.names},           {"loglik", f.loglik},
          {"loglik0", f.loglik0},        {"pseudo_r2", f.pseudo_r2},   {"n_choice_sets", f.n_sets},
          {"n_skipped_degenerate", f.n_skipped}, {"iterations", f.iterations}, {"stop_reason", f.stop_reason}};
}

inline StageFit stage_from_json(const json& j) {
  StageFit f;
  try {
    f.names = j.at("order").get<std::vector<std::string>>();
    for (const auto& n : f.names) {
      f.coef.push_back(j.at("coefficients").at(n).at("estimate").get<double>());
      f.se.push_back(j.at("coefficients").at(n).at("se").get<double>());
    }
    f.loglik = j.value("loglik", 0.0);
    f.loglik0 = j.value("loglik0", 0.0);
    f.pseudo_r2 = j.value("pseudo_r2", 0.0);
    f.n_sets = j.value("n_choice_sets", std::size_t{0});
    f.n_skipped = j.value("n_skipped_degenerate", std::size_t{0});
    f.iterations = j.value("iterations", std::size_t{0});
    f.stop_reason = j.value("stop_reason", std::string{});
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed parameter block: ") + e.what());
  }
  return f;
}

inline json params_to_json(const ModelParams& m) {
  json j = {{"baseline_district", district_name(m.request.baseline)},
            {"request", stage_to_json(m.request.fit)},
            {"click", stage_to_json(m.click.fit)}};
  try {
    const auto n = normalize_params(m.request, m.click);
    json req = json::object(), clk = json::object();
    for (std::size_t i = 0; i < n.request.size(); ++i) req[n.request_names[i]] = n.request[i];
    for (std::size_t i = 0; i < n.click.size(); ++i) clk[n.click_names[i]] = n.click[i];
    j["normalized"] = {{"price_scale", n.price_scale}, {"u_scale", n.u_scale}, {"request", req}, {"click", clk}};
  } catch (const NumericalError& e) {
    j["normalized"] = {{"error", e.what()}};
  }
  return j;
}

inline json projection_to_json(const ProjectionModel& p) {
  json comps = json::array();
  for (const auto& c : p.components)
    comps.push_back({{"name", c.name}, {"binary", c.binary}, {"coefficients", c.coef}, {"dropped", c.dropped}, {"r2", c.r2}});
  return {{"include_user_covariates", p.include_user_covariates},
          {"baseline_district", district_name(p.baseline)},
          {"regressors", p.regressors},
          {"components", comps},
          {"warnings", p.warnings}};
}

inline ProjectionModel projection_from_json(const json& j) {
  ProjectionModel p;
  try {
    p.include_user_covariates = j.at("include_user_covariates").get<bool>();
    p.baseline = parse_district(j.at("baseline_district").get<std::string>());
    p.regressors = j.at("regressors").get<std::vector<std::string>>();
    for (const auto& c : j.at("components"))
      p.components.push_back({c.at("name").get<std::string>(), c.at("binary").get<bool>(),
                              c.at("coefficients").get<std::vector<double>>(),
                              c.at("dropped").get<std::vector<std::size_t>>(), c.at("r2").get<double>()});
    p.warnings = j.value("warnings", std::vector<std::string>{});
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed projection: ") + e.what());
  }
  if (p.components.size() != kX2Size || p.regressors.size() != projection_regressor_names(p.baseline, p.include_user_covariates).size())
    throw ValidationError("projection has the wrong shape");
  for (const auto& c : p.components)
    if (c.coef.size() != p.regressors.size()) throw ValidationError("projection component '" + c.name + "' has the wrong length");
  return p;
}

inline ModelParams params_from_json(const json& params, const json& projection) {
  ModelParams m;
  m.request.fit = stage_from_json(params.at("request"));
  m.request.baseline = parse_district(params.value("baseline_district", std::string("greater_barcelona")));
  m.click.fit = stage_from_json(params.at("click"));
  if (m.request.fit.coef.size() != layout::kRequestDim || m.click.fit.coef.size() != layout::kClickDim)
    throw ValidationError("parameter file has the wrong number of coefficients");
  m.projection = projection_from_json(projection);
  return m;
}

}  // namespace ranklab::estimate

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ranklab/domain.hpp"
#include "ranklab/errors.hpp"
#include "ranklab/parallel.hpp"
#include "ranklab/rng.hpp"

// Two-tier rank-ordered logit with ties. Observed behaviour in a choice set
// reveals only that every chosen item beats every unchosen one:
//
//   P = Pr( min_{c in C} v_c + e_c  >  max_{d in D} v_d + e_d ),  e iid Gumbel.
//
// Writing w = exp(v) and S_X = sum_{x in X} w_x, inclusion-exclusion over the
// chosen block gives
//
//   P = sum_{T subset C, T nonempty} (-1)^{|T|+1} S_T / (S_D + S_T),
//
// which reduces to the binary/multinomial logit when |C| = 1. The alternating
// sum cancels badly when P is small, so it is evaluated through the equivalent
// all-positive recursion over the chosen items still to be ranked,
//
//   Q(empty) = 1,   Q(R) = sum_{c in R} w_c Q(R \ {c}) / (S_D + S_R),   P = Q(C),
//
// i.e. a sum over orderings of sequential logit choices.

namespace ranklab {

inline constexpr std::size_t kDefaultExactCap = 20;

struct ChoiceInstance {
  std::vector<double> chosen_values;
  std::vector<double> unchosen_values;
};

namespace detail {

/// Evaluates P for a set split into chosen/unchosen values. If `dlogp` is not
/// null it receives d log P / d v for every value, chosen first then unchosen.
/// `scratch` avoids reallocating the 2^|C| subset table.
inline double tie_prob_core(std::span<const double> chosen, std::span<const double> unchosen, std::size_t cap,
                            double* dlogp, std::vector<double>& scratch) {
  const std::size_t c = chosen.size();
  if (c == 0 || unchosen.empty()) {
    if (dlogp) std::fill(dlogp, dlogp + c + unchosen.size(), 0.0);
    return 1.0;
  }
  if (c > cap)
    throw NumericalError("chosen block of size " + std::to_string(c) + " exceeds exact-method cap " +
                         std::to_string(cap));

  double shift = -std::numeric_limits<double>::infinity();
  for (double v : chosen) shift = std::max(shift, v);
  for (double v : unchosen) shift = std::max(shift, v);
  if (!std::isfinite(shift)) throw NumericalError("non-finite utility index");

  double s_d = 0.0;
  for (double v : unchosen) {
    if (!std::isfinite(v)) throw NumericalError("non-finite utility index");
    s_d += std::exp(v - shift);
  }
  double w[64];
  for (std::size_t i = 0; i < c; ++i) {
    if (!std::isfinite(chosen[i])) throw NumericalError("non-finite utility index");
    w[i] = std::exp(chosen[i] - shift);
  }

  const std::size_t n_masks = std::size_t{1} << c;
  scratch.assign((dlogp ? 3 : 2) * n_masks, 0.0);
  double* subset_sum = scratch.data();
  double* q = subset_sum + n_masks;
  q[0] = 1.0;
  for (std::size_t mask = 1; mask < n_masks; ++mask) {
    const auto low = static_cast<std::size_t>(__builtin_ctzll(mask));
    subset_sum[mask] = subset_sum[mask & (mask - 1)] + w[low];
    double num = 0.0;
    for (std::size_t m = mask; m; m &= m - 1) {
      const auto i = static_cast<std::size_t>(__builtin_ctzll(m));
      num += w[i] * q[mask ^ (std::size_t{1} << i)];
    }
    q[mask] = num / (s_d + subset_sum[mask]);
  }
  const double p = q[n_masks - 1];
  if (!(p > 0.0) || !std::isfinite(p))
    throw NumericalError("two-tier probability underflows (chosen block far below unchosen block)");

  if (dlogp) {
    // reverse sweep of the recursion: adjoints of Q, of each w_c and of S_D
    double* q_bar = q + n_masks;
    q_bar[n_masks - 1] = 1.0;
    double w_bar[64] = {};
    double s_d_bar = 0.0;
    for (std::size_t mask = n_masks - 1; mask >= 1; --mask) {
      if (q_bar[mask] == 0.0) continue;
      const double inv = 1.0 / (s_d + subset_sum[mask]);
      const double num_bar = q_bar[mask] * inv;
      const double denom_bar = -q_bar[mask] * q[mask] * inv;
      s_d_bar += denom_bar;
      for (std::size_t m = mask; m; m &= m - 1) {
        const auto i = static_cast<std::size_t>(__builtin_ctzll(m));
        const std::size_t rest = mask ^ (std::size_t{1} << i);
        w_bar[i] += denom_bar + num_bar * q[rest];
        q_bar[rest] += num_bar * w[i];
      }
    }
    for (std::size_t i = 0; i < c; ++i) dlogp[i] = w_bar[i] * w[i] / p;
    for (std::size_t j = 0; j < unchosen.size(); ++j) dlogp[c + j] = s_d_bar * std::exp(unchosen[j] - shift) / p;
  }
  return std::min(p, 1.0);
}

}  // namespace detail

/// Exact probability that the chosen block beats the unchosen block.
/// Returns exactly 1 when either block is empty.
inline double tie_prob(const ChoiceInstance& inst, std::size_t cap = kDefaultExactCap) {
  if (cap > 62) cap = 62;
  std::vector<double> scratch;
  return detail::tie_prob_core(inst.chosen_values, inst.unchosen_values, cap, nullptr, scratch);
}

struct McEstimate {
  double p = 0.0;
  double se = 0.0;
  std::size_t draws = 0;
};

/// Frequency estimate of the same event by direct Gumbel simulation.
inline McEstimate mc_tie_prob(const ChoiceInstance& inst, std::size_t n_draws, std::uint64_t seed) {
  if (n_draws == 0) throw UsageError("mc_tie_prob needs at least one draw");
  if (inst.chosen_values.empty() || inst.unchosen_values.empty()) return {1.0, 0.0, n_draws};
  RandomStream rng(seed, Stream::mc_oracle);
  std::size_t hits = 0;
  for (std::size_t k = 0; k < n_draws; ++k) {
    double lowest_chosen = std::numeric_limits<double>::infinity();
    for (double v : inst.chosen_values) lowest_chosen = std::min(lowest_chosen, v + rng.gumbel());
    bool beaten = false;
    for (double v : inst.unchosen_values) {
      if (v + rng.gumbel() >= lowest_chosen) {
        beaten = true;
        break;
      }
    }
    hits += beaten ? 0 : 1;
  }
  const double p = static_cast<double>(hits) / static_cast<double>(n_draws);
  return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(n_draws)), n_draws};
}

// ---------------------------------------------------------------------------
// Stage data: per-search choice sets with covariate rows.

enum class Stage { request, click };

inline std::string_view stage_name(Stage s) { return s == Stage::request ? "request" : "click"; }

/// Choice sets in a flat layout. Row r of set k lives at
/// rows[(offsets[k] + r) * n_params].
struct StageData {
  std::size_t n_params = 0;
  std::vector<std::string> names;
  std::vector<double> rows;
  std::vector<std::uint8_t> chosen;
  std::vector<std::size_t> offsets{0};
  std::vector<std::string> set_ids;
  std::size_t skipped_degenerate = 0;

  StageData() = default;
  explicit StageData(std::vector<std::string> param_names)
      : n_params(param_names.size()), names(std::move(param_names)) {}

  std::size_t n_sets() const { return offsets.size() - 1; }
  std::size_t n_rows() const { return offsets.back(); }

  /// Appends one choice set; degenerate sets (either block empty) carry no
  /// information and are counted but not stored.
  void add_set(std::string id, std::span<const double> set_rows, std::span<const std::uint8_t> set_chosen) {
    const std::size_t n = set_chosen.size();
    if (set_rows.size() != n * n_params) throw ValidationError("choice-set row block has wrong size");
    const auto n_chosen = static_cast<std::size_t>(std::count(set_chosen.begin(), set_chosen.end(), 1));
    if (n_chosen == 0 || n_chosen == n) {
      ++skipped_degenerate;
      return;
    }
    rows.insert(rows.end(), set_rows.begin(), set_rows.end());
    chosen.insert(chosen.end(), set_chosen.begin(), set_chosen.end());
    offsets.push_back(offsets.back() + n);
    set_ids.push_back(std::move(id));
  }

  std::span<const double> row(std::size_t global_row) const {
    return {rows.data() + global_row * n_params, n_params};
  }
};

/// Builds the stage's choice sets from a dataset. For the request stage the
/// set is the clicked slots with chosen = requested; for the click stage it is
/// every slot with chosen = clicked. `row_fn(search_index, slot_index, out)`
/// fills one covariate row.
template <typename RowFn>
StageData build_stage_data(const Dataset& data, Stage stage, std::vector<std::string> names, RowFn&& row_fn) {
  StageData out(std::move(names));
  std::vector<double> set_rows;
  std::vector<std::uint8_t> set_chosen;
  for (std::size_t si = 0; si < data.searches.size(); ++si) {
    const auto& search = data.searches[si];
    set_rows.clear();
    set_chosen.clear();
    for (std::size_t k = 0; k < search.slots.size(); ++k) {
      const auto& slot = search.slots[k];
      if (stage == Stage::request && !slot.clicked) continue;
      set_chosen.push_back(stage == Stage::request ? slot.requested : slot.clicked);
      const std::size_t at = set_rows.size();
      set_rows.resize(at + out.n_params);
      row_fn(si, k, std::span<double>(set_rows.data() + at, out.n_params));
    }
    out.add_set(search.search_id, set_rows, set_chosen);
  }
  return out;
}

namespace detail {

/// log P for set k, optionally accumulating d log P / d beta into grad.
inline double set_log_prob(const StageData& data, std::size_t k, std::span<const double> beta, double* grad,
                           std::vector<double>& values, std::vector<double>& dlogp, std::vector<std::size_t>& order,
                           std::vector<double>& scratch, std::size_t cap) {
  const std::size_t begin = data.offsets[k], end = data.offsets[k + 1];
  const std::size_t n = end - begin, p = data.n_params;
  values.resize(n);
  order.clear();
  for (std::size_t r = begin; r < end; ++r)
    if (data.chosen[r]) order.push_back(r);
  const std::size_t n_chosen = order.size();
  for (std::size_t r = begin; r < end; ++r)
    if (!data.chosen[r]) order.push_back(r);
  for (std::size_t i = 0; i < n; ++i) {
    const double* x = data.rows.data() + order[i] * p;
    double v = 0.0;
    for (std::size_t j = 0; j < p; ++j) v += x[j] * beta[j];
    values[i] = v;
  }
  dlogp.resize(n);
  const double prob = tie_prob_core(std::span<const double>(values.data(), n_chosen),
                                    std::span<const double>(values.data() + n_chosen, n - n_chosen), cap,
                                    grad ? dlogp.data() : nullptr, scratch);
  if (grad) {
    for (std::size_t i = 0; i < n; ++i) {
      const double* x = data.rows.data() + order[i] * p;
      for (std::size_t j = 0; j < p; ++j) grad[j] += dlogp[i] * x[j];
    }
  }
  return std::log(prob);
}

}  // namespace detail

/// Sum of log P over all stored choice sets; fills `grad` when non-empty.
/// Reduction runs over a fixed partition, so the result is bit-identical for
/// any worker count.
inline double log_likelihood_and_gradient(std::span<const double> beta, const StageData& data, std::span<double> grad,
                                          std::size_t cap = kDefaultExactCap) {
  if (beta.size() != data.n_params) throw ValidationError("parameter vector has wrong length");
  if (cap > 62) cap = 62;
  const bool want_grad = !grad.empty();
  const Partition part{data.n_sets(), kReductionChunks};
  const std::size_t chunks = part.size();
  std::vector<double> chunk_ll(chunks, 0.0);
  std::vector<double> chunk_grad(want_grad ? chunks * data.n_params : 0, 0.0);
  parallel_for(chunks, [&](std::size_t c) {
    std::vector<double> values, dlogp, scratch;
    std::vector<std::size_t> order;
    double* g = want_grad ? chunk_grad.data() + c * data.n_params : nullptr;
    double ll = 0.0;
    for (std::size_t k = part.begin(c); k < part.end(c); ++k)
      ll += detail::set_log_prob(data, k, beta, g, values, dlogp, order, scratch, cap);
    chunk_ll[c] = ll;
  });
  double total = 0.0;
  for (double v : chunk_ll) total += v;
  if (want_grad) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t c = 0; c < chunks; ++c)
      for (std::size_t j = 0; j < data.n_params; ++j) grad[j] += chunk_grad[c * data.n_params + j];
  }
  return total;
}

inline double log_likelihood(std::span<const double> beta, const StageData& data,
                             std::size_t cap = kDefaultExactCap) {
  return log_likelihood_and_gradient(beta, data, {}, cap);
}

inline std::vector<double> grad_log_likelihood(std::span<const double> beta, const StageData& data,
                                               std::size_t cap = kDefaultExactCap) {
  std::vector<double> g(data.n_params, 0.0);
  log_likelihood_and_gradient(beta, data, g, cap);
  return g;
}

/// Per-set log-probabilities as CSV (search_id,log_prob), for oracle comparison.
inline void write_log_probs_csv(std::ostream& out, std::span<const double> beta, const StageData& data,
                                std::size_t cap = kDefaultExactCap) {
  std::vector<double> values, dlogp, scratch;
  std::vector<std::size_t> order;
  out << "search_id,log_prob\n";
  out.precision(17);
  for (std::size_t k = 0; k < data.n_sets(); ++k)
    out << data.set_ids[k] << ','
        << detail::set_log_prob(data, k, beta, nullptr, values, dlogp, order, scratch, std::min<std::size_t>(cap, 62))
        << '\n';
}

}  // namespace ranklab

#pragma once

#include <array>
#include <string>
#include <vector>

#include "ranklab/domain.hpp"

// Column layouts shared by the generator, the estimators and the
// counterfactual engine.
//
// Request utility (22 columns):
//   [0, 8)   x1: price, missing_n_tenants, n_tenants, 5 district dummies
//   8        days_since_published
//   [9, 19)  10 amenity dummies
//   [19, 22) landlord-preference matches (gender, age, occupation), i.e. the
//            interactions of listing rules with user traits
//
// Click propensity (7 columns):
//   position, position^2, 1(pos=1), 1(pos=2), 1(pos=3), u_hat, position*u_hat

namespace ranklab::layout {

inline constexpr std::size_t kRequestDim = kX1Size + 1 + kAmenityCount + 3;
inline constexpr std::size_t kBeta1Size = kX1Size;
inline constexpr std::size_t kBeta2Size = 1 + kAmenityCount;
inline constexpr std::size_t kBetaXZSize = 3;

namespace req {
inline constexpr std::size_t price = 0;
inline constexpr std::size_t missing_n_tenants = 1;
inline constexpr std::size_t n_tenants = 2;
inline constexpr std::size_t first_district = 3;
inline constexpr std::size_t days = kX1Size;
inline constexpr std::size_t first_amenity = kX1Size + 1;
inline constexpr std::size_t gender_match = first_amenity + kAmenityCount;
inline constexpr std::size_t age_match = gender_match + 1;
inline constexpr std::size_t occupation_match = gender_match + 2;
}  // namespace req

inline constexpr std::size_t kClickDim = 7;

namespace clk {
inline constexpr std::size_t position = 0;
inline constexpr std::size_t position_sq = 1;
inline constexpr std::size_t pos1 = 2;
inline constexpr std::size_t pos2 = 3;
inline constexpr std::size_t pos3 = 4;
inline constexpr std::size_t u_hat = 5;
inline constexpr std::size_t position_x_u_hat = 6;
}  // namespace clk

/// Column index of x2 component `k` inside the request layout.
constexpr std::size_t request_column_of_x2(std::size_t k) {
  if (k == x2::days) return req::days;
  if (k >= x2::first_amenity) return req::first_amenity + (k - x2::first_amenity);
  return req::gender_match + (k - x2::gender_match);
}

inline std::vector<std::string> request_names(District baseline = District::greater_barcelona) {
  std::vector<std::string> names;
  for (const auto& n : x1_names(baseline)) names.push_back(n);
  names.emplace_back("days_since_published");
  for (auto a : kAmenityNames) names.emplace_back(a);
  names.insert(names.end(), {"gender_match", "age_match", "occupation_match"});
  return names;
}

inline std::vector<std::string> click_names() {
  return {"position", "position_sq", "pos_is_1", "pos_is_2", "pos_is_3", "u_hat", "position_x_u_hat"};
}

inline std::array<double, kRequestDim> request_row(const DerivedCovariates& c) {
  std::array<double, kRequestDim> row{};
  for (std::size_t i = 0; i < kX1Size; ++i) row[i] = c.x1[i];
  for (std::size_t k = 0; k < kX2Size; ++k) row[request_column_of_x2(k)] = c.x2[k];
  return row;
}

/// g(pos): squared polynomial with point masses at the first three positions.
inline std::array<double, 5> position_basis(int position) {
  const double p = position;
  return {p, p * p, position == 1 ? 1.0 : 0.0, position == 2 ? 1.0 : 0.0, position == 3 ? 1.0 : 0.0};
}

inline std::array<double, kClickDim> click_row(int position, double u_hat) {
  const auto g = position_basis(position);
  return {g[0], g[1], g[2], g[3], g[4], u_hat, position * u_hat};
}

// Binary characteristics a search can be filtered on: the three landlord
// matches, the ten amenities and the five non-baseline districts.
inline constexpr std::size_t kFilterCount = 3 + kAmenityCount + (kDistrictCount - 1);

inline std::vector<std::string> filter_names(District baseline = District::greater_barcelona) {
  std::vector<std::string> names{"gender_match", "age_match", "occupation_match"};
  for (auto a : kAmenityNames) names.emplace_back(a);
  for (auto d : dummy_districts(baseline)) names.push_back("district_" + std::string(district_name(d)));
  return names;
}

inline bool has_characteristic(const UserProfile& u, const Listing& l, std::size_t c,
                               District baseline = District::greater_barcelona) {
  if (c == 0) return gender_match(u, l);
  if (c == 1) return age_match(u, l);
  if (c == 2) return occupation_match(u, l);
  if (c < 3 + kAmenityCount) return l.amenities[c - 3];
  return l.district == dummy_districts(baseline)[c - 3 - kAmenityCount];
}

template <typename Row, typename Beta>
double dot(const Row& row, const Beta& beta) {
  double v = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i) v += row[i] * beta[i];
  return v;
}

}  // namespace ranklab::layout

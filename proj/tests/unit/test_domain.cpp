#include <gtest/gtest.h>

#include "ranklab/domain.hpp"

using namespace ranklab;

namespace {

Dataset tiny() {
  Dataset d;
  d.users = {{"u1", 30, true, false, true}};
  Listing a;
  a.room_id = "r1";
  a.price = 400;
  a.first_published = make_date(2018, 1, 1);
  Listing b = a;
  b.room_id = "r2";
  d.listings = {a, b};
  SearchLog s;
  s.search_id = "s1";
  s.user_id = "u1";
  s.timestamp = parse_timestamp("2018-02-01T10:00:00Z");
  s.slots = {{"r1", 1, true, true}, {"r2", 2, false, false}};
  d.searches = {s};
  d.reindex();
  return d;
}

}  // namespace

TEST(Calendar, DateRoundTrip) {
  EXPECT_EQ(format_date(parse_date("2018-03-31")), "2018-03-31");
  EXPECT_EQ(parse_date("1970-01-02").days, 1);
  EXPECT_EQ(format_timestamp(parse_timestamp("2019-12-31T23:59:59Z")), "2019-12-31T23:59:59Z");
  EXPECT_EQ(parse_timestamp("1970-01-01T00:01:00").seconds, 60);
  EXPECT_THROW(parse_date("2018-13-01"), ValidationError);
  EXPECT_THROW(parse_date("yesterday"), ValidationError);
}

TEST(Validate, CleanSingleSearchIsValid) {
  EXPECT_TRUE(validate_dataset(tiny()).valid());
}

TEST(Validate, RequestWithoutClick) {
  auto d = tiny();
  d.searches[0].slots[1].requested = true;
  const auto r = validate_dataset(d);
  EXPECT_FALSE(r.valid());
  ASSERT_EQ(r.count(ViolationKind::request_without_click), 1u);
  EXPECT_EQ(violation_label(r.violations[0].kind), "request without click");
}

TEST(Validate, DuplicatePosition) {
  auto d = tiny();
  d.searches[0].slots = {{"r1", 1, false, false}, {"r1", 1, false, false}, {"r2", 2, false, false}};
  EXPECT_EQ(validate_dataset(d).count(ViolationKind::duplicate_position), 1u);
}

TEST(Validate, PositionGapAndDanglingAndAge) {
  auto d = tiny();
  d.searches[0].slots[1].position = 3;
  d.searches[0].slots.push_back({"r9", 2, false, false});
  d.users[0].age = 12;
  const auto r = validate_dataset(d);
  EXPECT_EQ(r.count(ViolationKind::dangling_room), 1u);
  EXPECT_EQ(r.count(ViolationKind::age_out_of_bounds), 1u);
  EXPECT_TRUE(r.count(ViolationKind::position_gap) == 0u);  // {1,3,2} is still 1..3
  d.searches[0].slots.pop_back();
  EXPECT_EQ(validate_dataset(d).count(ViolationKind::position_gap), 1u);
}

TEST(Validate, PageCapacity) {
  auto d = tiny();
  d.meta.page_capacity = 1;
  EXPECT_EQ(validate_dataset(d).count(ViolationKind::page_capacity_exceeded), 1u);
}

TEST(Covariates, NoGenderPreferenceIsAMatch) {
  UserProfile male{"u", 30, false, false, false};
  Listing l;
  EXPECT_TRUE(gender_match(male, l));
  l.pref_gender = Gender::female;
  EXPECT_FALSE(gender_match(male, l));
  UserProfile female{"v", 30, true, false, false};
  EXPECT_TRUE(gender_match(female, l));
}

TEST(Covariates, AgeAndOccupationRules) {
  UserProfile u{"u", 30, false, true, false};
  Listing l;
  EXPECT_TRUE(age_match(u, l));
  l.pref_min_age = 31;
  EXPECT_FALSE(age_match(u, l));
  l.pref_min_age = 20;
  l.pref_max_age = 30;
  EXPECT_TRUE(age_match(u, l));
  EXPECT_TRUE(occupation_match(u, l));
  l.pref_occupation = OccupationPref::no_students;
  EXPECT_FALSE(occupation_match(u, l));
  l.pref_occupation = OccupationPref::students_only;
  EXPECT_TRUE(occupation_match(u, l));
}

TEST(Covariates, DaysAreWinsorized) {
  UserProfile u{"u", 30, false, false, false};
  Listing l;
  l.first_published = make_date(2018, 1, 1);
  const Timestamp t{static_cast<std::int64_t>(l.first_published.days + 800) * 86400 + 3600};
  CovariateSpec spec;
  spec.caps.days_since_published = 744;
  const auto c = derive_covariates(u, l, t, 1, spec);
  EXPECT_EQ(c.x2[x2::days], 744.0);
  EXPECT_EQ(derive_covariates(u, l, t, 1).x2[x2::days], 800.0);
}

TEST(Covariates, NegativeDaysAreRejected) {
  UserProfile u{"u", 30, false, false, false};
  Listing l;
  l.first_published = make_date(2018, 6, 1);
  EXPECT_THROW(derive_covariates(u, l, parse_timestamp("2018-05-31T12:00:00Z"), 1), ValidationError);
}

TEST(Covariates, MissingTenantsAndDistrictDummies) {
  UserProfile u{"u", 30, false, false, false};
  Listing l;
  l.district = District::eixample;
  l.price = 500;
  auto c = derive_covariates(u, l, Timestamp{0}, 4);
  EXPECT_EQ(c.x1[0], 500.0);
  EXPECT_EQ(c.x1[1], 1.0);
  EXPECT_EQ(c.x1[2], 0.0);
  double dummies = 0.0;
  for (std::size_t i = 3; i < kX1Size; ++i) dummies += c.x1[i];
  EXPECT_EQ(dummies, 1.0);
  EXPECT_EQ(c.position, 4);
  l.district = District::greater_barcelona;
  l.n_tenants = 3;
  c = derive_covariates(u, l, Timestamp{0}, 1);
  dummies = 0.0;
  for (std::size_t i = 3; i < kX1Size; ++i) dummies += c.x1[i];
  EXPECT_EQ(dummies, 0.0);
  EXPECT_EQ(c.x1[1], 0.0);
  EXPECT_EQ(c.x1[2], 3.0);
}

TEST(Covariates, PercentileInterpolates) {
  EXPECT_DOUBLE_EQ(percentile({1, 2, 3, 4, 5}, 50), 3.0);
  EXPECT_DOUBLE_EQ(percentile({1, 2, 3, 4}, 50), 2.5);
  EXPECT_DOUBLE_EQ(percentile({10, 0}, 100), 10.0);
}

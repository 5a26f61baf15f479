#include <gtest/gtest.h>

#include <algorithm>
#include <limits>

#include "ranklab/cluster.hpp"
#include "ranklab/synth.hpp"

using namespace ranklab;
using namespace ranklab::cluster;

namespace {

std::vector<double> random_points(std::size_t n, std::size_t dim, std::uint64_t seed) {
  RandomStream r(seed, Stream::test_data);
  std::vector<double> x(n * dim);
  for (auto& v : x) v = r.normal(0.0, 10.0);
  return x;
}

Dataset filter_data() {
  Dataset d;
  d.users = {{"u1", 30, true, false, true}, {"u2", 30, true, false, true}};
  for (int i = 0; i < 4; ++i) {
    Listing l;
    l.room_id = "r" + std::to_string(i);
    l.amenities[static_cast<std::size_t>(Amenity::balcony)] = i < 3;
    l.district = i % 2 ? District::eixample : District::north;
    d.listings.push_back(l);
  }
  auto search = [](std::string id, std::string user, std::vector<std::string> rooms) {
    SearchLog s;
    s.search_id = std::move(id);
    s.user_id = std::move(user);
    for (std::size_t j = 0; j < rooms.size(); ++j) s.slots.push_back({rooms[j], static_cast<int>(j) + 1, false, false});
    return s;
  };
  d.searches = {search("s1", "u1", {"r0", "r1", "r2"}), search("s2", "u1", {"r0", "r3"}),
                search("s3", "u1", {"r3"})};
  d.reindex();
  return d;
}

}  // namespace

TEST(Filters, AllResultsMustShareTheCharacteristic) {
  const auto f = filter_features(filter_data());
  ASSERT_EQ(f.size(), 2u);
  const auto names = f.names;
  const auto col = [&](const std::string& n) {
    return static_cast<std::size_t>(std::find(names.begin(), names.end(), n) - names.begin());
  };
  // u1: s1 all balcony, s2 mixed, s3 singleton and excluded
  EXPECT_DOUBLE_EQ(f.row(0)[col("balcony")], 50.0);
  EXPECT_DOUBLE_EQ(f.row(0)[col("district_eixample")], 0.0);
  EXPECT_DOUBLE_EQ(f.row(0)[col("district_north")], 0.0);
  EXPECT_DOUBLE_EQ(f.row(0)[col("gender_match")], 100.0);
  for (double v : f.row(1)) EXPECT_EQ(v, 0.0);
  ASSERT_EQ(f.warnings.size(), 1u);
  EXPECT_NE(f.warnings[0].find("u2"), std::string::npos);
}

TEST(Filters, SearchOrderDoesNotMatter) {
  auto d = filter_data();
  const auto a = filter_features(d);
  std::reverse(d.searches.begin(), d.searches.end());
  d.reindex();
  EXPECT_EQ(filter_features(d).values, a.values);
}

TEST(KMedoids, OneClusterFindsExhaustiveMedoid) {
  const std::size_t n = 60, dim = 3;
  const auto x = random_points(n, dim, 51);
  double best = std::numeric_limits<double>::infinity();
  std::size_t arg = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double c = 0.0;
    for (std::size_t j = 0; j < n; ++j) c += l1({x.data() + i * dim, dim}, {x.data() + j * dim, dim});
    if (c < best) best = c, arg = i;
  }
  const auto a = k_medoids(x, dim, 1, 1);
  EXPECT_EQ(a.medoids[0], arg);
  EXPECT_NEAR(a.total_cost, best, 1e-9 * best);
}

TEST(KMedoids, KEqualsNHasZeroCost) {
  const auto x = random_points(10, 2, 52);
  const auto a = k_medoids(x, 2, 10, 1);
  EXPECT_EQ(a.total_cost, 0.0);
  std::vector<std::size_t> m = a.medoids;
  std::sort(m.begin(), m.end());
  EXPECT_EQ(std::unique(m.begin(), m.end()), m.end());
}

TEST(KMedoids, InvalidK) {
  const auto x = random_points(5, 2, 53);
  EXPECT_THROW(k_medoids(x, 2, 0, 1), ValidationError);
  EXPECT_THROW(k_medoids(x, 2, 6, 1), ValidationError);
}

TEST(KMedoids, CostNeverIncreasesAndIsDeterministic) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto x = random_points(80, 4, 60 + s);
    const auto a = k_medoids(x, 4, 1 + s % 5, s);
    ASSERT_FALSE(a.cost_history.empty());
    for (std::size_t i = 1; i < a.cost_history.size(); ++i) EXPECT_LE(a.cost_history[i], a.cost_history[i - 1]);
    EXPECT_EQ(a.total_cost, a.cost_history.back());
    const auto b = k_medoids(x, 4, 1 + s % 5, s);
    EXPECT_EQ(a.medoids, b.medoids);
    EXPECT_EQ(a.assignment, b.assignment);
  }
}

TEST(KMedoids, SeparatedBlobs) {
  RandomStream r(54, Stream::test_data);
  std::vector<double> x;
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 20; ++i) {
      x.push_back(100.0 * c + r.normal());
      x.push_back(r.normal());
    }
  const auto a = k_medoids(x, 2, 3, 2);
  for (int c = 0; c < 3; ++c)
    for (int i = 1; i < 20; ++i) EXPECT_EQ(a.assignment[c * 20 + i], a.assignment[c * 20]);
  EXPECT_GT(silhouette(x, 2, a), 0.9);
}

TEST(Clusters, SubsetsPartitionTheUsers) {
  synth::MarketConfig cfg;
  cfg.n_users = 60;
  cfg.n_rooms = 500;
  cfg.searches_per_user_mean = 8;
  const auto data = synth::generate_dataset(cfg);
  const auto f = filter_features(data);
  const auto a = k_medoids(f, 3, 1);
  std::size_t users = 0, searches = 0;
  for (std::size_t c = 0; c < 3; ++c) {
    const auto sub = cluster_subset(data, f.user_ids, a, c);
    users += sub.users.size();
    searches += sub.searches.size();
    EXPECT_EQ(cluster_profile(sub, f.size()).n_users, sub.users.size());
  }
  EXPECT_EQ(users, data.users.size());
  EXPECT_EQ(searches, data.searches.size());
  EXPECT_NE(clusters_csv(f.user_ids, a).find("user_id,cluster"), std::string::npos);
  EXPECT_FALSE(medoids_csv(f, a).empty());
}

#include <gtest/gtest.h>

#include <filesystem>

#include "ranklab/io.hpp"
#include "ranklab/synth.hpp"

using namespace ranklab;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("ranklab_io_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Io, DatasetRoundTripIsLossless) {
  synth::MarketConfig cfg;
  cfg.n_users = 20;
  cfg.n_rooms = 200;
  cfg.searches_per_user_mean = 5;
  const auto data = synth::generate_dataset(cfg);
  const auto dir = temp_dir("roundtrip");
  io::write_dataset(data, dir);
  const auto back = io::read_dataset(dir);
  ASSERT_EQ(back.users.size(), data.users.size());
  ASSERT_EQ(back.listings.size(), data.listings.size());
  ASSERT_EQ(back.searches.size(), data.searches.size());
  EXPECT_EQ(io::to_jsonl(back.listings), io::to_jsonl(data.listings));
  EXPECT_EQ(io::to_jsonl(back.searches), io::to_jsonl(data.searches));
  EXPECT_EQ(io::to_jsonl(back.users), io::to_jsonl(data.users));
  EXPECT_EQ(back.meta.caps.price, data.meta.caps.price);
  EXPECT_EQ(back.meta.seed, data.meta.seed);
  EXPECT_EQ(back.meta.generator, data.meta.generator);
  fs::remove_all(dir);
}

TEST(Io, MissingDirectoryIsIoError) {
  EXPECT_THROW(io::read_dataset("/nonexistent/ranklab/dir"), IoError);
}

TEST(Io, MalformedLineNamesFileAndLine) {
  const auto dir = temp_dir("malformed");
  fs::create_directories(dir);
  io::write_text_file(dir / "users.jsonl", "{\"user_id\":\"u1\",\"age\":30,\"female\":true,\"student\":false,\"worker\":true}\n{oops\n");
  io::write_text_file(dir / "listings.jsonl", "");
  io::write_text_file(dir / "searches.jsonl", "");
  try {
    io::read_dataset(dir);
    FAIL() << "expected a validation error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("users.jsonl:2"), std::string::npos);
  }
  fs::remove_all(dir);
}

TEST(Io, ListingOptionalFields) {
  Listing l;
  l.room_id = "r";
  l.price = 321.5;
  l.pref_gender = Gender::male;
  l.amenities[2] = true;
  const auto j = io::to_json(l);
  EXPECT_TRUE(j["n_tenants"].is_null());
  EXPECT_EQ(j["pref_gender"], "male");
  const auto back = io::listing_from_json(j);
  EXPECT_FALSE(back.n_tenants.has_value());
  EXPECT_EQ(back.pref_gender, Gender::male);
  EXPECT_TRUE(back.amenities[2]);
  EXPECT_EQ(back.price, 321.5);
}

TEST(Io, CapsComputedWhenMetaLacksThem) {
  const auto dir = temp_dir("nocaps");
  fs::create_directories(dir);
  io::write_text_file(dir / "users.jsonl", "{\"user_id\":\"u1\",\"age\":30,\"female\":true,\"student\":false,\"worker\":true}\n");
  io::write_text_file(dir / "listings.jsonl",
                      "{\"room_id\":\"r1\",\"price\":100,\"n_tenants\":null,\"first_published\":\"2018-01-01\","
                      "\"registered_landlord\":false,\"amenities\":{},\"district\":\"north\"}\n");
  io::write_text_file(dir / "searches.jsonl",
                      "{\"search_id\":\"s1\",\"user_id\":\"u1\",\"timestamp\":\"2018-01-11T00:00:00Z\",\"slots\":"
                      "[{\"room_id\":\"r1\",\"position\":1,\"clicked\":false,\"requested\":false}]}\n");
  const auto d = io::read_dataset(dir);
  EXPECT_EQ(d.meta.caps.price, 100.0);
  EXPECT_EQ(d.meta.caps.days_since_published, 10.0);
  fs::remove_all(dir);
}

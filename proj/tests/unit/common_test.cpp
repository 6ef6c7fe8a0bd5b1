#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <random>

#include "twinbed/common/config.hpp"
#include "twinbed/common/csv.hpp"
#include "twinbed/common/text.hpp"

using namespace twinbed;

TEST(KeyValueConfig, ParsesCommentsBlanksAndOverrides) {
  const auto cfg = KeyValueConfig::parse("# header\n\n a = 1 \nb=two words\na = 3\n");
  EXPECT_EQ(cfg.get_int("a", 0), 3);
  EXPECT_EQ(cfg.get_string("b", ""), "two words");
  EXPECT_EQ(cfg.get_double("missing", 2.5), 2.5);
  EXPECT_FALSE(cfg.has("missing"));
}

TEST(KeyValueConfig, RejectsMalformedLinesWithLocation) {
  try {
    KeyValueConfig::parse("a = 1\nno equals here\n", "test.cfg");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("test.cfg:2"), std::string::npos);
  }
  EXPECT_THROW(KeyValueConfig::parse(" = 4\n"), ConfigError);
}

TEST(KeyValueConfig, TypedGettersRejectBadValues) {
  const auto cfg = KeyValueConfig::parse("x = abc\nn = 1.5\nflag = maybe\non = yes\noff = 0\n");
  EXPECT_THROW(cfg.get_double("x", 0), ConfigError);
  EXPECT_THROW(cfg.get_int("n", 0), ConfigError);
  EXPECT_THROW(cfg.get_bool("flag", false), ConfigError);
  EXPECT_TRUE(cfg.get_bool("on", false));
  EXPECT_FALSE(cfg.get_bool("off", true));
  EXPECT_THROW(cfg.require_string("absent"), ConfigError);
}

TEST(KeyValueConfig, KeysWithPrefix) {
  const auto cfg = KeyValueConfig::parse("zone.a = 1\nzone.b = 2\nzoned = 3\n");
  EXPECT_EQ(cfg.keys_with_prefix("zone"), (std::vector<std::string>{"a", "b"}));
}

TEST(KeyValueConfig, MissingFileThrows) {
  EXPECT_THROW(KeyValueConfig::load("/nonexistent/twinbed.cfg"), ConfigError);
}

TEST(Csv, HeaderRowsAndLineNumbers) {
  const auto t = parse_csv("# comment\nt_ms, value\n0,1.5\n\n100, 2\n");
  EXPECT_EQ(t.header, (std::vector<std::string>{"t_ms", "value"}));
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[1][1], "2");
  EXPECT_EQ(t.line_numbers, (std::vector<std::size_t>{3, 5}));
  EXPECT_EQ(t.column("value"), 1u);
  EXPECT_THROW(t.column("nope"), CsvError);
}

TEST(Csv, EmptyInputThrows) {
  EXPECT_THROW(parse_csv("\n# only a comment\n"), CsvError);
  EXPECT_THROW(read_csv("/nonexistent/table.csv"), CsvError);
}

TEST(Text, FormatDoubleRoundTrips) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::uint64_t> bits;
  for (int i = 0; i < 10000; ++i) {
    double v;
    const auto b = bits(rng);
    std::memcpy(&v, &b, sizeof v);
    if (!std::isfinite(v)) continue;
    const auto back = parse_double(format_double(v));
    ASSERT_TRUE(back.has_value());
    EXPECT_EQ(*back, v);
  }
}

TEST(Text, ParseRejectsTrailingGarbage) {
  EXPECT_FALSE(parse_double("1.5x").has_value());
  EXPECT_FALSE(parse_int("12 3").has_value());
  EXPECT_EQ(parse_int("-42").value(), -42);
}

TEST(Text, GlobMatch) {
  EXPECT_TRUE(glob_match("SG_*", "SG_LEVEL"));
  EXPECT_TRUE(glob_match("CW_TEM?", "CW_TEMP"));
  EXPECT_FALSE(glob_match("CW_TEM?", "CW_TEMPS"));
  EXPECT_TRUE(glob_match("*", ""));
  EXPECT_FALSE(glob_match("?", ""));
}

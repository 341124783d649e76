#include "falconc/csv.hpp"

#include <gtest/gtest.h>

#include <sstream>

#include "falconc/error.hpp"
#include "falconc/random.hpp"

namespace falconc::csv {
namespace {

TEST(CsvTest, ParsesQuotedFieldsAndCrlf) {
  const Table t = parse("a,B,c\r\n1,\"x,y\",\"say \"\"hi\"\"\"\r\n2,,z\n");
  ASSERT_EQ(t.header.size(), 3u);
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0][1], "x,y");
  EXPECT_EQ(t.rows[0][2], "say \"hi\"");
  EXPECT_EQ(t.rows[1][1], "");
  EXPECT_EQ(t.column("b"), 1u);
  EXPECT_FALSE(t.column("missing"));
}

TEST(CsvTest, RejectsRaggedRows) {
  EXPECT_THROW(parse("a,b\n1,2,3\n"), DataError);
  EXPECT_THROW(parse("a,b\n\"open\n"), DataError);
}

TEST(CsvTest, WriteQuotesOnlyWhenNeeded) {
  std::ostringstream out;
  write_row(out, {"plain", "a,b", "q\"q"});
  EXPECT_EQ(out.str(), "plain,\"a,b\",\"q\"\"q\"\n");
  const Table t = parse("h1,h2,h3\n" + out.str());
  EXPECT_EQ(t.rows[0], (std::vector<std::string>{"plain", "a,b", "q\"q"}));
}

TEST(CsvTest, FormatDoubleRoundTrips) {
  Rng rng(11);
  for (int i = 0; i < 2000; ++i) {
    const double v = (rng.uniform() - 0.5) * std::pow(10.0, static_cast<double>(rng.below(30)) - 15.0);
    const auto back = parse_double(format_double(v));
    ASSERT_TRUE(back);
    EXPECT_EQ(*back, v);
  }
}

TEST(CsvTest, StrictNumberParsing) {
  EXPECT_EQ(parse_double(" 1.5 "), 1.5);
  EXPECT_EQ(parse_double("+2"), 2.0);
  EXPECT_FALSE(parse_double("1.5x"));
  EXPECT_FALSE(parse_double(""));
  EXPECT_FALSE(parse_double("nan"));
  EXPECT_FALSE(parse_double("inf"));
  EXPECT_EQ(parse_int("443"), 443);
  EXPECT_EQ(parse_int("443.0"), 443);
  EXPECT_FALSE(parse_int("443.5"));
  EXPECT_FALSE(parse_int("abc"));
}

}  // namespace
}  // namespace falconc::csv

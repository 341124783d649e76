#include "falconc/feature_pipeline.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "falconc/csv.hpp"
#include "falconc/error.hpp"
#include "falconc/random.hpp"
#include "test_support.hpp"

namespace falconc {
namespace {

using testing::TempDir;
using testing::write_file;

LabeledFlow flow_with(std::map<std::string, FeatureValue> extras, std::string id = "0") {
  LabeledFlow lf;
  lf.flow.flow_id = std::move(id);
  lf.flow.src = {*parse_ipv4("192.168.1.5"), 1000};
  lf.flow.dst = {*parse_ipv4("10.0.0.1"), 80};
  lf.flow.protocol = 6;
  lf.flow.extra_features = std::move(extras);
  lf.label = ScenarioLabel{};
  return lf;
}

std::size_t find_feature(const FeatureMatrix& m, const std::string& name) {
  for (std::size_t j = 0; j < m.feature_names.size(); ++j) {
    if (m.feature_names[j] == name) return j;
  }
  ADD_FAILURE() << "no feature " << name;
  return 0;
}

TEST(EncodingTest, CategoricalIsLexicographicOneHot) {
  const std::vector<LabeledFlow> flows = {flow_with({{"cat", std::string("b")}}, "0"),
                                          flow_with({{"cat", std::string("a")}}, "1")};
  const EncodingSpec spec = fit_encoding(flows);
  ASSERT_EQ(spec.categorical_columns.size(), 1u);
  EXPECT_EQ(spec.categorical_columns[0].vocabulary, (std::vector<std::string>{"a", "b"}));
  const FeatureMatrix m = apply_encoding(spec, flows);
  const std::size_t a = find_feature(m, "cat=a");
  EXPECT_EQ(find_feature(m, "cat=b"), a + 1);
  EXPECT_EQ(m.rows(0, a), 0.0);
  EXPECT_EQ(m.rows(0, a + 1), 1.0);
  EXPECT_EQ(m.rows(1, a), 1.0);
}

TEST(EncodingTest, IpOctets) {
  const std::vector<LabeledFlow> flows = {flow_with({})};
  const EncodingSpec spec = fit_encoding(flows);
  const FeatureMatrix m = apply_encoding(spec, flows);
  ASSERT_EQ(m.feature_names[0], "src_ip[0]");
  EXPECT_EQ(m.rows(0, 0), 192.0);
  EXPECT_EQ(m.rows(0, 1), 168.0);
  EXPECT_EQ(m.rows(0, 2), 1.0);
  EXPECT_EQ(m.rows(0, 3), 5.0);
  EXPECT_EQ(m.width(), spec.feature_count());
}

TEST(EncodingTest, TextIpExtraBecomesIpColumn) {
  const std::vector<LabeledFlow> flows = {flow_with({{"gw", std::string("1.2.3.4")}})};
  const EncodingSpec spec = fit_encoding(flows);
  EXPECT_EQ(spec.ip_columns, (std::vector<std::string>{"src_ip", "dst_ip", "gw"}));
}

TEST(EncodingTest, MixedColumnIsAnError) {
  const std::vector<LabeledFlow> flows = {flow_with({{"mixed", 1.0}}, "0"),
                                          flow_with({{"mixed", std::string("x")}}, "1")};
  try {
    fit_encoding(flows);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("mixed"), std::string::npos);
  }
  EXPECT_THROW(fit_encoding({}), DataError);
}

TEST(EncodingTest, UnseenCategoryGivesZeroBlockAndMissingColumnFails) {
  const std::vector<LabeledFlow> fit = {flow_with({{"cat", std::string("a")}, {"n", 1.0}})};
  const EncodingSpec spec = fit_encoding(fit);
  const std::vector<LabeledFlow> unseen = {flow_with({{"cat", std::string("zzz")}, {"n", 1.0}})};
  const FeatureMatrix m = apply_encoding(spec, unseen);
  EXPECT_EQ(m.rows(0, find_feature(m, "cat=a")), 0.0);
  const std::vector<LabeledFlow> missing = {flow_with({{"cat", std::string("a")}})};
  EXPECT_THROW(apply_encoding(spec, missing), DataError);
}

// 86 raw columns: flow_id, 2 ips, 22 core numerics, 5 droppable identifiers,
// 3 categoricals with 4/3/2 levels and 53 numeric extras.
std::string wide_table(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::string> header = {"flow_id", "src_ip", "dst_ip"};
  for (auto c : core_numeric_columns()) header.emplace_back(c);
  for (auto c : {"id", "src_mac", "src_oui", "dst_mac", "dst_oui"}) header.emplace_back(c);
  for (auto c : {"app_family", "tls_version", "direction_hint"}) header.emplace_back(c);
  for (int j = 0; j < 53; ++j) header.push_back("stat_" + std::to_string(j));
  EXPECT_EQ(header.size(), 86u);

  const std::vector<std::vector<std::string>> levels = {
      {"web", "mail", "ocpp", "dns"}, {"tls12", "tls13", "none"}, {"in", "out"}};
  std::ostringstream out;
  csv::write_row(out, header);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::string> row = {std::to_string(i), "192.168.0." + std::to_string(rng.below(250)),
                                    "10.1.1." + std::to_string(rng.below(250))};
    for (auto c : core_numeric_columns()) {
      const std::string name(c);
      if (name == "start_time") row.push_back(std::to_string(i));
      else if (name == "end_time") row.push_back(std::to_string(i + 3));
      else if (name == "duration") row.push_back("3");
      else if (name == "protocol") row.push_back(rng.below(2) ? "6" : "17");
      else if (name.starts_with("min_ps")) row.push_back("40");
      else if (name.starts_with("max_ps")) row.push_back("1500");
      else if (name.starts_with("mean_ps")) row.push_back(std::to_string(40 + rng.below(1400)));
      else row.push_back(std::to_string(rng.below(1000)));
    }
    row.push_back(std::to_string(i));
    for (int k = 0; k < 4; ++k) row.push_back("aa:bb:cc:" + std::to_string(rng.below(99)));
    // Make sure every level occurs.
    for (const auto& lv : levels) row.push_back(lv[(i + rng.below(2)) % lv.size()]);
    for (int j = 0; j < 53; ++j) row.push_back(csv::format_double(rng.normal()));
    csv::write_row(out, row);
  }
  return out.str();
}

// Counts features straight from the CSV text: an all-IPv4 column gives 4,
// a text column gives its distinct values, anything else 1.
std::size_t oracle_feature_count(const std::string& text, const std::set<std::string>& skip) {
  const csv::Table t = csv::parse(text);
  std::size_t d = 0;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    if (skip.contains(t.header[c])) continue;
    bool all_ip = true, all_num = true;
    std::set<std::string> distinct;
    for (const auto& r : t.rows) {
      all_ip = all_ip && parse_ipv4(r[c]).has_value();
      all_num = all_num && csv::parse_double(r[c]).has_value();
      distinct.insert(r[c]);
    }
    d += all_ip ? 4 : all_num ? 1 : distinct.size();
  }
  return d;
}

TEST(EncodingTest, WideTableFeatureCountMatchesEnumeration) {
  TempDir dir;
  const std::string text = wide_table(40, 5);
  write_file(dir.file("wide.csv"), text);
  auto flows = read_flow_csv(dir.file("wide.csv")).flows;
  ASSERT_EQ(flows.size(), 40u);
  flows = drop_unusable_columns(flows, default_drop_list());
  const EncodingSpec spec = fit_encoding(flows);
  const std::set<std::string> skip = {"flow_id", "id", "src_mac", "src_oui", "dst_mac", "dst_oui"};
  EXPECT_EQ(spec.feature_count(), oracle_feature_count(text, skip));
  EXPECT_EQ(spec.feature_count(), 92u);
  EXPECT_EQ(spec.ip_columns.size(), 2u);
  EXPECT_EQ(spec.categorical_columns.size(), 3u);
  EXPECT_EQ(spec.passthrough_columns.size(), 75u);
  const auto names = spec.feature_names();
  EXPECT_EQ(std::set<std::string>(names.begin(), names.end()).size(), names.size());

  const FeatureMatrix m = apply_encoding(spec, flows);
  EXPECT_EQ(m.width(), 92u);
  // One-hot blocks sum to one for in-vocabulary rows.
  for (const auto& cat : spec.categorical_columns) {
    for (std::size_t r = 0; r < m.size(); ++r) {
      double s = 0;
      for (const auto& v : cat.vocabulary) s += m.rows(r, find_feature(m, cat.name + "=" + v));
      EXPECT_EQ(s, 1.0);
    }
  }
}

TEST(EncodingTest, RefitOnShuffledRowsPermutesMatrix) {
  TempDir dir;
  write_file(dir.file("f.csv"), testing::synthetic_flow_csv(30, 10, 5, 8));
  const auto flows = read_flow_csv(dir.file("f.csv")).flows;
  const FeatureMatrix a = apply_encoding(fit_encoding(flows), flows);

  std::vector<std::size_t> perm(flows.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  Rng rng(3);
  rng.shuffle(perm);
  std::vector<LabeledFlow> shuffled;
  for (auto p : perm) shuffled.push_back(flows[p]);
  const EncodingSpec spec_b = fit_encoding(shuffled);
  EXPECT_EQ(spec_b, fit_encoding(flows));
  const FeatureMatrix b = apply_encoding(spec_b, shuffled);
  ASSERT_EQ(a.width(), b.width());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    for (std::size_t j = 0; j < a.width(); ++j) ASSERT_EQ(b.rows(i, j), a.rows(perm[i], j));
  }
}

TEST(StandardizerTest, SmallCases) {
  Matrix two(2, 1);
  two(0, 0) = 0;
  two(1, 0) = 2;
  auto p = fit_standardizer(two);
  EXPECT_EQ(p.mean[0], 1.0);
  EXPECT_EQ(p.scale[0], 1.0);

  Matrix constant(3, 1, 5.0);
  p = fit_standardizer(constant);
  EXPECT_EQ(p.mean[0], 5.0);
  EXPECT_EQ(p.scale[0], 1.0);

  EXPECT_THROW(fit_standardizer(Matrix()), DataError);
  EXPECT_THROW(fit_standardizer(Matrix(1, 3)), DataError);
}

TEST(StandardizerTest, MatchesTwoPassOracle) {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix x(50, 10);
    for (auto& v : x.data()) v = rng.uniform(-100, 100) + 1e3 * trial;
    const auto p = fit_standardizer(x);
    for (std::size_t j = 0; j < 10; ++j) {
      long double s = 0;
      for (std::size_t i = 0; i < 50; ++i) s += x(i, j);
      const long double m = s / 50;
      long double ss = 0;
      for (std::size_t i = 0; i < 50; ++i) ss += (x(i, j) - m) * (x(i, j) - m);
      const double sd = std::sqrt(static_cast<double>(ss / 50));
      EXPECT_NEAR(p.mean[j], static_cast<double>(m), 1e-12 * std::max(1.0, std::fabs(double(m))));
      EXPECT_NEAR(p.scale[j], sd, 1e-12 * sd);
    }
    const Matrix z = standardize(p, x);
    for (std::size_t j = 0; j < 10; ++j) {
      double m = 0, v = 0;
      for (std::size_t i = 0; i < 50; ++i) m += z(i, j);
      m /= 50;
      for (std::size_t i = 0; i < 50; ++i) v += (z(i, j) - m) * (z(i, j) - m);
      EXPECT_LT(std::fabs(m), 1e-9);
      EXPECT_NEAR(v / 50, 1.0, 1e-9);
      for (std::size_t i = 0; i < 50; ++i) {
        EXPECT_NEAR(z(i, j), (x(i, j) - p.mean[j]) / p.scale[j], 1e-12);
      }
    }
  }
}

TEST(StandardizerTest, IdentityAndWidthMismatch) {
  Matrix x(3, 2);
  x(1, 1) = 4;
  const StandardizerParams id{{0, 0}, {1, 1}};
  EXPECT_EQ(standardize(id, x), x);
  const StandardizerParams narrow{{0}, {1}};
  EXPECT_THROW(standardize(narrow, x), DataError);
}

FeatureMatrix indexed(std::size_t n) {
  Matrix m(n, 1);
  for (std::size_t i = 0; i < n; ++i) m(i, 0) = double(i);
  return testing::labeled(m, TrafficClass::Benign);
}

TEST(SplitTest, SizesAndDisjointness) {
  auto s = split_indices(100, {0.2, 1});
  EXPECT_EQ(s.train.size(), 80u);
  EXPECT_EQ(s.test.size(), 20u);
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  all.insert(s.test.begin(), s.test.end());
  EXPECT_EQ(all.size(), 100u);
  EXPECT_TRUE(std::is_sorted(s.test.begin(), s.test.end()));

  s = split_indices(5, {0.2, 1});
  EXPECT_EQ(s.train.size(), 4u);
  EXPECT_EQ(s.test.size(), 1u);
  EXPECT_EQ(split_indices(2, {0.01, 1}).test.size(), 1u);
  EXPECT_EQ(split_indices(2, {0.99, 1}).train.size(), 1u);
  EXPECT_THROW(split_indices(1, {0.2, 1}), DataError);
  EXPECT_THROW(split_indices(10, {0.0, 1}), UsageError);
}

TEST(SplitTest, SeededDeterminism) {
  const auto fm = indexed(100);
  const auto [a_train, a_test] = split_train_test(fm, {0.2, 42});
  const auto [b_train, b_test] = split_train_test(fm, {0.2, 42});
  EXPECT_EQ(a_test.rows, b_test.rows);
  EXPECT_EQ(a_train.row_ids, b_train.row_ids);
  const auto [c_train, c_test] = split_train_test(fm, {0.2, 43});
  EXPECT_NE(a_test.row_ids, c_test.row_ids);
}

}  // namespace
}  // namespace falconc

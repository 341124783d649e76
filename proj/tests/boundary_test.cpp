#include "falconc/boundary.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>

#include "falconc/error.hpp"
#include "falconc/random.hpp"
#include "test_support.hpp"

namespace falconc {
namespace {

ProfileSample sample(double error, TrafficClass cls, std::string tag = "train", std::string id = "") {
  ScenarioLabel label;
  label.traffic_class = cls;
  label.attack = cls == TrafficClass::Benign ? "none" : "UDP Flood";
  return {std::move(tag), std::move(id), label, error};
}

// Union-find over all pairs closer than gap; clusters in ascending order.
std::vector<Interval> oracle_intervals(const std::vector<double>& errors, const RefinedParams& p) {
  std::vector<double> above;
  for (double e : errors) {
    if (e > p.tau) above.push_back(e);
  }
  std::vector<std::size_t> parent(above.size());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  std::function<std::size_t(std::size_t)> find = [&](std::size_t i) {
    return parent[i] == i ? i : parent[i] = find(parent[i]);
  };
  for (std::size_t i = 0; i < above.size(); ++i) {
    for (std::size_t j = 0; j < above.size(); ++j) {
      if (std::fabs(above[i] - above[j]) <= p.gap) parent[find(i)] = find(j);
    }
  }
  std::map<std::size_t, std::pair<double, double>> clusters;
  for (std::size_t i = 0; i < above.size(); ++i) {
    auto [it, fresh] = clusters.try_emplace(find(i), above[i], above[i]);
    it->second.first = std::min(it->second.first, above[i]);
    it->second.second = std::max(it->second.second, above[i]);
  }
  std::vector<Interval> ivs = {{0.0, p.tau}};
  for (const auto& [root, c] : clusters) {
    if (c.second - c.first <= p.max_width) ivs.push_back({std::max(0.0, c.first - p.margin), c.second + p.margin});
  }
  std::sort(ivs.begin(), ivs.end(), [](auto& a, auto& b) { return a.lo < b.lo; });
  std::vector<Interval> merged;
  for (const auto& iv : ivs) {
    if (!merged.empty() && iv.lo <= merged.back().hi) merged.back().hi = std::max(merged.back().hi, iv.hi);
    else merged.push_back(iv);
  }
  return merged;
}

TEST(NaiveTest, ClosedAtTau) {
  const auto b = calibrate_naive(0.6);
  EXPECT_EQ(b.kind, BoundaryKind::Naive);
  EXPECT_EQ(classify(b, 0.6), Verdict::Benign);
  EXPECT_EQ(classify(b, 0.3), Verdict::Benign);
  EXPECT_EQ(classify(b, std::nextafter(0.6, 1.0)), Verdict::Malicious);
  EXPECT_EQ(classify(calibrate_naive(0.5), 0.55), Verdict::Malicious);
  EXPECT_EQ(classify(calibrate_naive(0.6), 0.55), Verdict::Benign);
  EXPECT_EQ(classify(calibrate_naive(1e9), 1e8), Verdict::Benign);
  EXPECT_THROW(calibrate_naive(0.0), UsageError);
  EXPECT_THROW(calibrate_naive(-1.0), UsageError);
}

TEST(ClassifyTest, RejectsBadErrors) {
  const auto b = calibrate_naive(0.6);
  EXPECT_THROW(classify(b, -0.1), DataError);
  EXPECT_THROW(classify(b, std::nan("")), DataError);
}

TEST(RefinedTest, CarvesTheOutlierBand) {
  std::vector<double> errors(60, 0.1);
  for (int i = 0; i < 7; ++i) errors.push_back(1.55 + 0.005 * i);
  const RefinedParams p{0.6, 0.3, 0.05, 0.5};
  const auto b = calibrate_refined(errors, p);
  ASSERT_EQ(b.benign_intervals.size(), 2u);
  EXPECT_EQ(b.benign_intervals[0], (Interval{0.0, 0.6}));
  EXPECT_NEAR(b.benign_intervals[1].lo, 1.50, 1e-12);
  EXPECT_NEAR(b.benign_intervals[1].hi, 1.63, 1e-12);
  EXPECT_EQ(b.benign_intervals, oracle_intervals(errors, p));
  EXPECT_EQ(classify(b, 1.55), Verdict::Benign);
  EXPECT_EQ(classify(b, 0.7), Verdict::Malicious);
}

TEST(RefinedTest, DegenerateCases) {
  const RefinedParams p;
  const std::vector<double> low = {0.1, 0.2, 0.59};
  EXPECT_EQ(calibrate_refined(low, p).benign_intervals, calibrate_naive(p.tau).benign_intervals);

  const std::vector<double> outlier = {0.1, 5.0};
  const auto b = calibrate_refined(outlier, p);
  ASSERT_EQ(b.benign_intervals.size(), 2u);
  EXPECT_NEAR(b.benign_intervals[1].lo, 5.0 - p.margin, 1e-12);
  EXPECT_NEAR(b.benign_intervals[1].hi, 5.0 + p.margin, 1e-12);

  // A chain wider than max_width is not carved.
  std::vector<double> chain;
  for (int i = 0; i < 10; ++i) chain.push_back(2.0 + 0.2 * i);
  EXPECT_EQ(calibrate_refined(chain, p).benign_intervals.size(), 1u);

  EXPECT_THROW(calibrate_refined(std::vector<double>{}, p), DataError);
  EXPECT_THROW(calibrate_refined(low, RefinedParams{0.6, 0.0, 0.05, 0.5}), UsageError);
  EXPECT_THROW(calibrate_refined(low, RefinedParams{0.6, 0.3, -1, 0.5}), UsageError);
}

TEST(RefinedTest, RejectsMaliciousSamples) {
  const std::vector<ProfileSample> samples = {sample(0.1, TrafficClass::Benign),
                                              sample(2.0, TrafficClass::DoS)};
  EXPECT_THROW(calibrate_refined(samples, RefinedParams{}), DataError);
}

TEST(RefinedTest, GuardDropsIntervalsHittingMalicious) {
  const std::vector<double> errors = {0.1, 1.55};
  const std::vector<double> guard = {1.56};
  EXPECT_EQ(calibrate_refined(errors, RefinedParams{}, guard).benign_intervals.size(), 1u);
  EXPECT_EQ(calibrate_refined(errors, RefinedParams{}).benign_intervals.size(), 2u);
}

TEST(RefinedTest, MatchesUnionFindOracle) {
  Rng rng(55);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> errors;
    const std::size_t n = 1 + rng.below(40);
    for (std::size_t i = 0; i < n; ++i) errors.push_back(rng.uniform(0.0, 4.0));
    const RefinedParams p{rng.uniform(0.1, 1.5), rng.uniform(0.01, 0.5), rng.uniform(0.01, 0.2),
                          rng.uniform(0.0, 1.0)};
    const auto b = calibrate_refined(errors, p);
    ASSERT_EQ(b.benign_intervals, oracle_intervals(errors, p)) << "case " << t;
    EXPECT_NO_THROW(b.validate());
  }
}

// Confusion counts straight from the definition.
struct Counts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};
Counts oracle_counts(const DecisionBoundary& b, const ErrorProfile& prof) {
  Counts c;
  for (const auto& s : prof.samples) {
    bool benign_pred = false;
    for (const auto& iv : b.benign_intervals) benign_pred = benign_pred || (iv.lo <= s.error && s.error <= iv.hi);
    const bool mal = s.label->traffic_class != TrafficClass::Benign;
    if (mal && !benign_pred) ++c.tp;
    if (mal && benign_pred) ++c.fn;
    if (!mal && benign_pred) ++c.tn;
    if (!mal && !benign_pred) ++c.fp;
  }
  return c;
}

ErrorProfile accounting_profile() {
  ErrorProfile prof;
  for (int i = 0; i < 58; ++i) prof.samples.push_back(sample(0.1 + 0.001 * (i % 7), TrafficClass::Benign));
  for (int i = 0; i < 7; ++i) prof.samples.push_back(sample(1.55 + 0.005 * i, TrafficClass::Benign));
  for (int i = 0; i < 30; ++i) prof.samples.push_back(sample(3.5 + 0.1 * i, TrafficClass::DoS, "malicious"));
  return prof;
}

std::vector<double> benign_errors(const ErrorProfile& prof) {
  std::vector<double> out;
  for (const auto& s : prof.samples) {
    if (s.label->traffic_class == TrafficClass::Benign) out.push_back(s.error);
  }
  return out;
}

TEST(EvaluateTest, NaiveVersusRefinedAccounting) {
  const auto prof = accounting_profile();
  const auto naive = calibrate_naive(0.6);
  const auto nm = evaluate(naive, prof);
  EXPECT_EQ(nm.tn, 58u);
  EXPECT_EQ(nm.fp, 7u);
  EXPECT_DOUBLE_EQ(nm.benign_accuracy, 58.0 / 65.0);
  EXPECT_EQ(nm.recall, 1.0);

  const auto refined = calibrate_refined(benign_errors(prof), RefinedParams{0.6, 0.3, 0.05, 0.5});
  const auto rm = evaluate(refined, prof);
  EXPECT_EQ(rm.tn, 65u);
  EXPECT_EQ(rm.fp, 0u);
  EXPECT_EQ(rm.benign_accuracy, 1.0);
  EXPECT_EQ(rm.recall, 1.0);

}

TEST(EvaluateTest, SixtyThreeOfSixtyFive) {
  // Band of 5 carved; 2 stragglers form a cluster wider than max_width.
  ErrorProfile prof;
  for (int i = 0; i < 58; ++i) prof.samples.push_back(sample(0.1, TrafficClass::Benign));
  for (int i = 0; i < 5; ++i) prof.samples.push_back(sample(1.55 + 0.0075 * i, TrafficClass::Benign));
  prof.samples.push_back(sample(2.2, TrafficClass::Benign));
  prof.samples.push_back(sample(2.5, TrafficClass::Benign));
  prof.samples.push_back(sample(2.5 + 0.3, TrafficClass::DoS, "malicious"));
  for (int i = 0; i < 20; ++i) prof.samples.push_back(sample(3.5 + i, TrafficClass::DoS, "malicious"));
  const RefinedParams p{0.6, 0.3, 0.05, 0.2};
  const auto refined = calibrate_refined(benign_errors(prof), p);
  const auto m = evaluate(refined, prof);
  const Counts c = oracle_counts(refined, prof);
  EXPECT_EQ(m.tn, 63u);
  EXPECT_EQ(m.fp, 2u);
  EXPECT_EQ(m.tn, c.tn);
  EXPECT_EQ(m.fp, c.fp);
  EXPECT_EQ(m.tp, c.tp);
  EXPECT_EQ(m.fn, c.fn);
  EXPECT_NEAR(m.benign_accuracy, 0.9692, 5e-5);
  EXPECT_EQ(m.recall, 1.0);
}

TEST(EvaluateTest, AllCorrectAndErrors) {
  ErrorProfile prof;
  prof.samples = {sample(0.1, TrafficClass::Benign), sample(5, TrafficClass::DoS)};
  const auto m = evaluate(calibrate_naive(0.6), prof);
  EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_EQ(m.false_positive_rate, 0.0);
  EXPECT_EQ(m.precision, 1.0);
  EXPECT_THROW(evaluate(calibrate_naive(0.6), ErrorProfile{}), DataError);
  prof.samples[0].label.reset();
  EXPECT_THROW(evaluate(calibrate_naive(0.6), prof), DataError);
}

TEST(EvaluateTest, RandomProfilesMatchConfusionOracle) {
  Rng rng(12);
  for (int t = 0; t < 200; ++t) {
    ErrorProfile prof;
    const std::size_t n = 1 + rng.below(60);
    for (std::size_t i = 0; i < n; ++i) {
      prof.samples.push_back(sample(rng.uniform(0, 3), rng.below(3) ? TrafficClass::Benign : TrafficClass::Recon,
                                    rng.below(2) ? "a" : "b"));
    }
    const auto b = calibrate_refined(benign_errors(prof).empty() ? std::vector<double>{0.1} : benign_errors(prof),
                                     RefinedParams{rng.uniform(0.2, 1.5), 0.2, 0.05, 0.5});
    const auto m = evaluate(b, prof);
    const Counts c = oracle_counts(b, prof);
    ASSERT_EQ(m.tp, c.tp);
    ASSERT_EQ(m.fp, c.fp);
    ASSERT_EQ(m.tn, c.tn);
    ASSERT_EQ(m.fn, c.fn);
    EXPECT_EQ(m.total(), n);
    auto r = [](std::size_t a, std::size_t b) { return b ? double(a) / double(b) : 0.0; };
    EXPECT_NEAR(m.accuracy, r(c.tp + c.tn, n), 1e-9);
    EXPECT_NEAR(m.precision, r(c.tp, c.tp + c.fp), 1e-9);
    EXPECT_NEAR(m.recall, r(c.tp, c.tp + c.fn), 1e-9);
    EXPECT_NEAR(m.false_positive_rate, r(c.fp, c.fp + c.tn), 1e-9);
    std::size_t tagged = 0;
    for (const auto& [tag, tm] : m.by_tag) tagged += tm.benign + tm.malicious;
    EXPECT_EQ(tagged, n);
  }
}

TEST(PropertyTest, RefinedNeverWorseAndMonotoneNaive) {
  Rng rng(101);
  for (int t = 0; t < 1000; ++t) {
    ErrorProfile prof;
    std::vector<double> benign;
    const std::size_t nb = 1 + rng.below(50);
    for (std::size_t i = 0; i < nb; ++i) {
      const double e = rng.below(4) ? rng.uniform(0, 0.8) : rng.uniform(0.8, 4.0);
      benign.push_back(e);
      prof.samples.push_back(sample(e, TrafficClass::Benign));
    }
    std::vector<double> malicious;
    for (std::size_t i = 0; i < 1 + rng.below(20); ++i) {
      malicious.push_back(rng.uniform(0, 6));
      prof.samples.push_back(sample(malicious.back(), TrafficClass::DoS));
    }
    const RefinedParams p{rng.uniform(0.2, 1.0), rng.uniform(0.05, 0.5), rng.uniform(0.01, 0.1),
                          rng.uniform(0.0, 1.0)};
    const auto naive = calibrate_naive(p.tau);
    const auto refined = calibrate_refined(benign, p);
    EXPECT_GE(evaluate(refined, prof).benign_accuracy, evaluate(naive, prof).benign_accuracy);

    double carved_top = p.tau;
    for (const auto& iv : refined.benign_intervals) carved_top = std::max(carved_top, iv.hi);
    for (const auto& s : prof.samples) {
      if (s.error > carved_top) {
        EXPECT_EQ(classify(refined, s.error), classify(naive, s.error));
      }
      if (classify(naive, s.error) == Verdict::Benign) {
        EXPECT_EQ(classify(refined, s.error), Verdict::Benign);
      }
    }
    const double a = rng.uniform(0, 2), b = rng.uniform(0, 2);
    if (classify(naive, std::max(a, b)) == Verdict::Benign) {
      EXPECT_EQ(classify(naive, std::min(a, b)), Verdict::Benign);
    }
  }
}

TEST(LabelTest, SamplesAndCsvRoundTrip) {
  testing::TempDir dir;
  std::vector<ProfileSample> samples = {sample(0.1, TrafficClass::Benign, "t", "f1"),
                                        sample(1.0, TrafficClass::DoS, "t", "f2")};
  samples.push_back({"t", "f3", std::nullopt, 0.3});
  const auto labels = label_samples(calibrate_naive(0.6), samples);
  ASSERT_EQ(labels.size(), 3u);
  EXPECT_EQ(labels[1].predicted, Verdict::Malicious);
  EXPECT_FALSE(labels[2].truth);
  write_label_csv(dir.file("l.csv"), labels);
  EXPECT_EQ(read_label_csv(dir.file("l.csv")), labels);
}

TEST(BoundaryJsonTest, RoundTripAndValidation) {
  testing::TempDir dir;
  const std::vector<double> errors = {0.1, 1.55, 1.58};
  const auto b = calibrate_refined(errors, RefinedParams{});
  save_boundary(dir.file("b.json"), b);
  EXPECT_EQ(load_boundary(dir.file("b.json")), b);
  EXPECT_EQ(parse_boundary_json(boundary_json_text(calibrate_naive(0.6))), calibrate_naive(0.6));
  EXPECT_THROW(parse_boundary_json(R"({"kind":"naive","intervals":[[0.1,0.6]],"params":{"tau":0.6}})"),
               DataError);
  EXPECT_THROW(parse_boundary_json(R"({"kind":"refined","intervals":[[0,0.6],[0.5,1]],
                                       "params":{"tau":0.6,"gap":0.3,"margin":0.05,"max_width":0.5}})"),
               DataError);
  EXPECT_THROW(parse_boundary_json("{"), DataError);
}

}  // namespace
}  // namespace falconc

#include "falconc/audit.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <nlohmann/json.hpp>

#include "falconc/error.hpp"
#include "falconc/random.hpp"
#include "test_support.hpp"

namespace falconc {
namespace {

LabelOutcome outcome(std::string id, Verdict v) {
  return {0, std::move(id), v == Verdict::Malicious ? 2.0 : 0.1, v, std::nullopt};
}

IdsDecisionLog mirror(const std::vector<LabelOutcome>& labels) {
  IdsDecisionLog log;
  for (const auto& l : labels) log.entries.push_back({l.flow_id, l.predicted, 1.0, std::nullopt});
  return log;
}

TEST(AuditTest, IdenticalSourcesAgreeFully) {
  std::vector<LabelOutcome> labels;
  for (int i = 0; i < 10; ++i) labels.push_back(outcome("f" + std::to_string(i), i % 3 ? Verdict::Benign : Verdict::Malicious));
  const auto r = audit(mirror(labels), labels);
  EXPECT_EQ(r.joined, 10u);
  EXPECT_EQ(r.agreement_rate, 1.0);
  EXPECT_TRUE(r.false_positive_ids.empty());
  EXPECT_TRUE(r.false_negative_ids.empty());
  EXPECT_TRUE(r.unmatched_ids_log.empty());
}

TEST(AuditTest, TwoFalsePositives) {
  std::vector<LabelOutcome> labels;
  for (int i = 0; i < 10; ++i) labels.push_back(outcome("f" + std::to_string(i), Verdict::Benign));
  auto log = mirror(labels);
  log.entries[3].verdict = Verdict::Malicious;
  log.entries[7].verdict = Verdict::Malicious;
  const auto r = audit(log, labels);
  EXPECT_EQ(r.agreement_rate, 0.8);
  EXPECT_EQ(r.fp, 2u);
  EXPECT_EQ(r.false_positive_ids, (std::vector<std::string>{"f3", "f7"}));
  EXPECT_EQ(r.false_positive_rate, 0.2);
  EXPECT_EQ(r.precision, 0.0);
}

TEST(AuditTest, ErrorsOnEmptyJoinAndDuplicates) {
  const std::vector<LabelOutcome> labels = {outcome("a", Verdict::Benign)};
  IdsDecisionLog log;
  log.entries.push_back({"zzz", Verdict::Benign, 0, std::nullopt});
  EXPECT_THROW(audit(log, labels), DataError);
  log.entries.push_back({"zzz", Verdict::Benign, 0, std::nullopt});
  EXPECT_THROW(log.validate(), DataError);
  const std::vector<LabelOutcome> dup = {outcome("a", Verdict::Benign), outcome("a", Verdict::Benign)};
  EXPECT_THROW(audit(mirror({outcome("a", Verdict::Benign)}), dup), DataError);
}

struct Oracle {
  std::size_t joined = 0, agree = 0, tp = 0, fp = 0, tn = 0, fn = 0;
  std::vector<std::string> fps, fns, only_log, only_labels;
};

Oracle brute(const IdsDecisionLog& log, const std::vector<LabelOutcome>& labels) {
  Oracle o;
  for (const auto& d : log.entries) {
    const LabelOutcome* hit = nullptr;
    for (const auto& l : labels) {
      if (l.flow_id == d.flow_id) hit = &l;
    }
    if (!hit) {
      o.only_log.push_back(d.flow_id);
      continue;
    }
    ++o.joined;
    const bool ids_mal = d.verdict == Verdict::Malicious;
    const bool ref_mal = hit->predicted == Verdict::Malicious;
    o.agree += ids_mal == ref_mal;
    if (ids_mal && ref_mal) ++o.tp;
    if (ids_mal && !ref_mal) {
      ++o.fp;
      o.fps.push_back(d.flow_id);
    }
    if (!ids_mal && ref_mal) {
      ++o.fn;
      o.fns.push_back(d.flow_id);
    }
    if (!ids_mal && !ref_mal) ++o.tn;
  }
  for (const auto& l : labels) {
    bool found = false;
    for (const auto& d : log.entries) found = found || d.flow_id == l.flow_id;
    if (!found) o.only_labels.push_back(l.flow_id);
  }
  for (auto* v : {&o.fps, &o.fns, &o.only_log, &o.only_labels}) std::sort(v->begin(), v->end());
  return o;
}

TEST(AuditTest, RandomLogsMatchBruteForceJoin) {
  Rng rng(500);
  for (int t = 0; t < 20; ++t) {
    std::vector<LabelOutcome> labels;
    IdsDecisionLog log;
    for (int i = 0; i < 500; ++i) {
      const std::string id = "flow-" + std::to_string(i);
      const Verdict ref = rng.below(4) == 0 ? Verdict::Malicious : Verdict::Benign;
      if (rng.below(10) != 0) labels.push_back(outcome(id, ref));
      if (rng.below(10) != 0) {
        Verdict v = rng.below(8) == 0 ? (ref == Verdict::Benign ? Verdict::Malicious : Verdict::Benign) : ref;
        log.entries.push_back({id, v, rng.uniform(0, 10), rng.below(50)});
      }
    }
    rng.shuffle(labels);
    rng.shuffle(log.entries);
    const auto r = audit(log, labels);
    const Oracle o = brute(log, labels);
    EXPECT_EQ(r.joined, o.joined);
    EXPECT_EQ(r.agreements, o.agree);
    EXPECT_EQ(r.tp, o.tp);
    EXPECT_EQ(r.fp, o.fp);
    EXPECT_EQ(r.tn, o.tn);
    EXPECT_EQ(r.fn, o.fn);
    EXPECT_EQ(r.false_positive_ids, o.fps);
    EXPECT_EQ(r.false_negative_ids, o.fns);
    EXPECT_EQ(r.unmatched_ids_log, o.only_log);
    EXPECT_EQ(r.unmatched_ids_labels, o.only_labels);
    EXPECT_EQ(r.joined + r.unmatched_ids_log.size(), log.entries.size());
    EXPECT_EQ(r.tp + r.fp + r.tn + r.fn, r.joined);
    EXPECT_DOUBLE_EQ(r.agreement_rate, double(o.agree) / double(o.joined));
    EXPECT_DOUBLE_EQ(r.recall, double(o.tp) / double(o.tp + o.fn));

    // Row order does not matter.
    rng.shuffle(labels);
    rng.shuffle(log.entries);
    EXPECT_EQ(audit(log, labels), r);
  }
}

TEST(AuditIoTest, ParsesLogAndRendersReport) {
  const auto log = parse_ids_log("flow_id,verdict,decision_time,packets_seen\n"
                                 "a,malicious,0.5,3\nb,benign,1.5,\n");
  ASSERT_EQ(log.entries.size(), 2u);
  EXPECT_EQ(log.entries[0].packets_seen, 3u);
  EXPECT_FALSE(log.entries[1].packets_seen);
  EXPECT_THROW(parse_ids_log("flow_id,verdict\na,benign\n"), DataError);
  EXPECT_THROW(parse_ids_log("flow_id,verdict,decision_time\na,maybe,1\n"), DataError);
  EXPECT_THROW(parse_ids_log("flow_id,verdict,decision_time\na,benign,1\na,benign,2\n"), DataError);

  const std::vector<LabelOutcome> labels = {outcome("a", Verdict::Benign), outcome("b", Verdict::Benign)};
  const auto r = audit(log, labels);
  const auto doc = nlohmann::json::parse(audit_json_text(r));
  EXPECT_EQ(doc.at("joined"), 2);
  EXPECT_EQ(doc.at("false_positive_ids"), nlohmann::json::array({"a"}));
  EXPECT_NE(audit_text_summary(r).find("a"), std::string::npos);
}

}  // namespace
}  // namespace falconc

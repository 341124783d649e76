#include "falconc/audit.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "falconc/csv.hpp"
#include "falconc/error.hpp"

namespace falconc {

void IdsDecisionLog::validate() const {
  std::set<std::string_view> seen;
  for (const auto& e : entries) {
    if (!seen.insert(e.flow_id).second) throw DataError("duplicate flow_id in IDS log: " + e.flow_id);
  }
}

IdsDecisionLog parse_ids_log(std::string_view csv_text) {
  const csv::Table t = csv::parse(csv_text);
  const auto id = t.column("flow_id");
  const auto verdict = t.column("verdict");
  const auto time = t.column("decision_time");
  const auto packets = t.column("packets_seen");
  if (!id || !verdict || !time) throw DataError("IDS log needs flow_id, verdict and decision_time columns");
  IdsDecisionLog log;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const auto when = csv::parse_double(row[*time]);
    if (!when) throw DataError("IDS log row " + std::to_string(r + 2) + ": bad decision_time");
    IdsDecision d{row[*id], parse_verdict(row[*verdict]), *when, std::nullopt};
    if (packets && !row[*packets].empty()) {
      const auto n = csv::parse_int(row[*packets]);
      if (!n || *n < 0) throw DataError("IDS log row " + std::to_string(r + 2) + ": bad packets_seen");
      d.packets_seen = static_cast<std::size_t>(*n);
    }
    log.entries.push_back(std::move(d));
  }
  log.validate();
  return log;
}

IdsDecisionLog read_ids_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open IDS log: " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_ids_log(text.str());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

AuditReport audit(const IdsDecisionLog& ids_log, std::span<const LabelOutcome> labels) {
  ids_log.validate();
  std::unordered_map<std::string_view, Verdict> reference;
  for (const auto& l : labels) {
    if (!reference.emplace(l.flow_id, l.predicted).second) {
      throw DataError("duplicate flow_id in labels: " + l.flow_id);
    }
  }

  AuditReport r;
  std::set<std::string_view> matched;
  for (const auto& e : ids_log.entries) {
    const auto it = reference.find(e.flow_id);
    if (it == reference.end()) {
      r.unmatched_ids_log.push_back(e.flow_id);
      continue;
    }
    matched.insert(e.flow_id);
    ++r.joined;
    const bool ids_flags = e.verdict == Verdict::Malicious;
    const bool truth_malicious = it->second == Verdict::Malicious;
    if (ids_flags && truth_malicious) ++r.tp;
    else if (ids_flags) { ++r.fp; r.false_positive_ids.push_back(e.flow_id); }
    else if (truth_malicious) { ++r.fn; r.false_negative_ids.push_back(e.flow_id); }
    else ++r.tn;
  }
  if (r.joined == 0) throw DataError("no IDS decision joins a labeled flow; check the flow_id key");
  for (const auto& l : labels) {
    if (!matched.contains(l.flow_id)) r.unmatched_ids_labels.push_back(l.flow_id);
  }
  for (auto* list : {&r.false_positive_ids, &r.false_negative_ids, &r.unmatched_ids_log,
                     &r.unmatched_ids_labels}) {
    std::sort(list->begin(), list->end());
  }
  auto ratio = [](std::size_t a, std::size_t b) {
    return b ? static_cast<double>(a) / static_cast<double>(b) : 0.0;
  };
  r.agreements = r.tp + r.tn;
  r.agreement_rate = ratio(r.agreements, r.joined);
  r.precision = ratio(r.tp, r.tp + r.fp);
  r.recall = ratio(r.tp, r.tp + r.fn);
  r.false_positive_rate = ratio(r.fp, r.fp + r.tn);
  return r;
}

std::string audit_json_text(const AuditReport& r) {
  nlohmann::ordered_json doc;
  doc["joined"] = r.joined;
  doc["agreements"] = r.agreements;
  doc["agreement_rate"] = r.agreement_rate;
  doc["confusion"] = {{"tp", r.tp}, {"fp", r.fp}, {"tn", r.tn}, {"fn", r.fn}};
  doc["precision"] = r.precision;
  doc["recall"] = r.recall;
  doc["false_positive_rate"] = r.false_positive_rate;
  doc["false_positive_ids"] = r.false_positive_ids;
  doc["false_negative_ids"] = r.false_negative_ids;
  doc["unmatched_ids_log"] = r.unmatched_ids_log;
  doc["unmatched_ids_labels"] = r.unmatched_ids_labels;
  return doc.dump(2) + "\n";
}

std::string audit_text_summary(const AuditReport& r) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << "IDS audit against full-flow labels\n";
  out << "  joined flows:        " << r.joined << "\n";
  out << "  agreement rate:      " << r.agreement_rate << " (" << r.agreements << "/" << r.joined << ")\n";
  out << "  confusion (malicious positive): TP=" << r.tp << " FP=" << r.fp << " TN=" << r.tn
      << " FN=" << r.fn << "\n";
  out << "  precision:           " << r.precision << "\n";
  out << "  recall:              " << r.recall << "\n";
  out << "  false positive rate: " << r.false_positive_rate << "\n";
  out << "  IDS-only flags (FP): " << r.false_positive_ids.size() << "\n";
  out << "  IDS misses (FN):     " << r.false_negative_ids.size() << "\n";
  out << "  unmatched in IDS log: " << r.unmatched_ids_log.size()
      << ", unmatched in labels: " << r.unmatched_ids_labels.size() << "\n";
  return out.str();
}

}  // namespace falconc

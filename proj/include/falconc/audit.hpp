#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "falconc/boundary.hpp"

namespace falconc {

struct IdsDecision {
  std::string flow_id;
  Verdict verdict = Verdict::Benign;
  double decision_time = 0.0;  // carried as-is, never checked against flow timing
  std::optional<std::size_t> packets_seen;

  bool operator==(const IdsDecision&) const = default;
};

struct IdsDecisionLog {
  std::vector<IdsDecision> entries;

  // Throws DataError on duplicate flow ids.
  void validate() const;
};

// IDS CSV: flow_id,verdict,decision_time[,packets_seen]
IdsDecisionLog read_ids_log(const std::filesystem::path& path);
IdsDecisionLog parse_ids_log(std::string_view csv_text);

// IDS verdicts scored against full-flow labels taken as the reference.
// Malicious is the positive class: a false positive is a flow the IDS
// flagged that the labeler calls benign.
struct AuditReport {
  std::size_t joined = 0;
  std::size_t agreements = 0;
  double agreement_rate = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double false_positive_rate = 0.0;
  std::vector<std::string> false_positive_ids;  // sorted
  std::vector<std::string> false_negative_ids;  // sorted
  std::vector<std::string> unmatched_ids_log;   // sorted
  std::vector<std::string> unmatched_ids_labels;  // sorted

  bool operator==(const AuditReport&) const = default;
};

// Inner join on flow_id. Throws DataError when nothing joins.
AuditReport audit(const IdsDecisionLog& ids_log, std::span<const LabelOutcome> labels);

std::string audit_json_text(const AuditReport& report);
std::string audit_text_summary(const AuditReport& report);

}  // namespace falconc

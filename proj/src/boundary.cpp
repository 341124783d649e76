#include "falconc/boundary.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "falconc/csv.hpp"
#include "falconc/error.hpp"

namespace falconc {

std::string_view to_string(Verdict v) { return v == Verdict::Benign ? "benign" : "malicious"; }

Verdict parse_verdict(std::string_view text) {
  const std::string lower = csv::to_lower(text);
  if (lower == "benign" || lower == "0") return Verdict::Benign;
  if (lower == "malicious" || lower == "1") return Verdict::Malicious;
  throw DataError("unknown verdict: '" + std::string(text) + "'");
}

void DecisionBoundary::validate() const {
  if (benign_intervals.empty()) throw DataError("decision boundary has no benign interval");
  for (std::size_t i = 0; i < benign_intervals.size(); ++i) {
    const Interval& iv = benign_intervals[i];
    if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi) || iv.lo < 0.0 || iv.lo > iv.hi) {
      throw DataError("malformed benign interval");
    }
    if (i > 0 && !(benign_intervals[i - 1].hi < iv.lo)) {
      throw DataError("benign intervals must be sorted and disjoint");
    }
  }
  if (kind == BoundaryKind::Naive &&
      (benign_intervals.size() != 1 || benign_intervals.front().lo != 0.0)) {
    throw DataError("a naive boundary is exactly one interval [0, tau]");
  }
}

DecisionBoundary calibrate_naive(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw UsageError("tau must be positive and finite");
  DecisionBoundary b;
  b.kind = BoundaryKind::Naive;
  b.benign_intervals = {{0.0, tau}};
  b.params.tau = tau;
  return b;
}

namespace {

std::vector<Interval> merge(std::vector<Interval> intervals) {
  std::sort(intervals.begin(), intervals.end(),
            [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  std::vector<Interval> merged;
  for (const auto& iv : intervals) {
    if (!merged.empty() && iv.lo <= merged.back().hi) {
      merged.back().hi = std::max(merged.back().hi, iv.hi);
    } else {
      merged.push_back(iv);
    }
  }
  return merged;
}

}  // namespace

DecisionBoundary calibrate_refined(std::span<const double> errors, const RefinedParams& params,
                                   std::span<const double> malicious_guard) {
  if (!(params.tau > 0.0)) throw UsageError("tau must be positive");
  if (!(params.gap > 0.0) || !(params.margin > 0.0)) throw UsageError("gap and margin must be positive");
  if (!(params.max_width >= 0.0)) throw UsageError("max_width must be non-negative");
  if (errors.empty()) throw DataError("refined calibration needs benign training errors");

  std::vector<double> above;
  for (double e : errors) {
    if (!std::isfinite(e) || e < 0.0) throw DataError("reconstruction errors must be finite and >= 0");
    if (e > params.tau) above.push_back(e);
  }
  std::sort(above.begin(), above.end());

  std::vector<Interval> intervals = {{0.0, params.tau}};
  std::size_t start = 0;
  for (std::size_t i = 1; i <= above.size(); ++i) {
    if (i < above.size() && above[i] - above[i - 1] <= params.gap) continue;
    if (start < above.size()) {
      const double lo = above[start];
      const double hi = above[i - 1];
      if (hi - lo <= params.max_width) {
        const Interval carved{std::max(0.0, lo - params.margin), hi + params.margin};
        const bool hits_malicious = std::any_of(malicious_guard.begin(), malicious_guard.end(),
                                                [&](double m) { return carved.contains(m); });
        if (!hits_malicious) intervals.push_back(carved);
      }
    }
    start = i;
  }

  DecisionBoundary b;
  b.kind = BoundaryKind::Refined;
  b.benign_intervals = merge(std::move(intervals));
  b.params = params;
  return b;
}

DecisionBoundary calibrate_refined(std::span<const ProfileSample> benign_training,
                                   const RefinedParams& params,
                                   std::span<const double> malicious_guard) {
  std::vector<double> errors;
  errors.reserve(benign_training.size());
  for (const auto& s : benign_training) {
    if (!s.label || s.label->traffic_class != TrafficClass::Benign) {
      throw DataError("refined calibration accepts benign training samples only (row '" +
                      s.row_id + "')");
    }
    errors.push_back(s.error);
  }
  return calibrate_refined(errors, params, malicious_guard);
}

Verdict classify(const DecisionBoundary& boundary, double error) {
  if (!std::isfinite(error) || error < 0.0) {
    throw DataError("reconstruction error must be finite and non-negative");
  }
  const auto& ivs = boundary.benign_intervals;
  // First interval whose upper end reaches the error.
  const auto it = std::lower_bound(ivs.begin(), ivs.end(), error,
                                   [](const Interval& iv, double e) { return iv.hi < e; });
  return it != ivs.end() && it->contains(error) ? Verdict::Benign : Verdict::Malicious;
}

double TagMetrics::benign_accuracy() const {
  return benign ? static_cast<double>(benign_correct) / static_cast<double>(benign) : 0.0;
}

MetricsReport evaluate(const DecisionBoundary& boundary, const ErrorProfile& profile) {
  if (profile.samples.empty()) throw DataError("cannot evaluate an empty profile");
  MetricsReport report;
  for (const auto& s : profile.samples) {
    if (!s.label) throw DataError("profile sample '" + s.row_id + "' has no truth label");
    const bool malicious = s.label->traffic_class != TrafficClass::Benign;
    const bool flagged = classify(boundary, s.error) == Verdict::Malicious;
    TagMetrics& tag = report.by_tag[s.tag];
    if (malicious) {
      ++tag.malicious;
      if (flagged) {
        ++tag.malicious_detected;
        ++report.tp;
      } else {
        ++report.fn;
      }
    } else {
      ++tag.benign;
      if (flagged) {
        ++report.fp;
      } else {
        ++tag.benign_correct;
        ++report.tn;
      }
    }
  }
  auto ratio = [](std::size_t num, std::size_t den) {
    return den ? static_cast<double>(num) / static_cast<double>(den) : 0.0;
  };
  report.accuracy = ratio(report.tp + report.tn, report.total());
  report.precision = ratio(report.tp, report.tp + report.fp);
  report.recall = ratio(report.tp, report.tp + report.fn);
  report.false_positive_rate = ratio(report.fp, report.fp + report.tn);
  report.benign_accuracy = ratio(report.tn, report.tn + report.fp);
  return report;
}

std::vector<LabelOutcome> label_samples(const DecisionBoundary& boundary,
                                        std::span<const ProfileSample> samples) {
  std::vector<LabelOutcome> out;
  out.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    LabelOutcome o{i, s.row_id, s.error, classify(boundary, s.error), std::nullopt};
    if (s.label) o.truth = s.label->traffic_class;
    out.push_back(std::move(o));
  }
  return out;
}

std::string label_csv_text(std::span<const LabelOutcome> labels) {
  std::ostringstream out;
  csv::write_row(out, {"flow_id", "error", "predicted", "truth"});
  for (const auto& l : labels) {
    csv::write_row(out, {l.flow_id, csv::format_double(l.error), std::string(to_string(l.predicted)),
                         l.truth ? std::string(to_string(*l.truth)) : std::string{}});
  }
  return out.str();
}

void write_label_csv(const std::filesystem::path& path, std::span<const LabelOutcome> labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path.string());
  out << label_csv_text(labels);
}

std::vector<LabelOutcome> read_label_csv(const std::filesystem::path& path) {
  const csv::Table table = csv::read(path);
  const auto id = table.column("flow_id");
  const auto error = table.column("error");
  const auto predicted = table.column("predicted");
  const auto truth = table.column("truth");
  if (!id || !error || !predicted) {
    throw DataError(path.string() + ": label CSV needs flow_id, error and predicted columns");
  }
  std::vector<LabelOutcome> labels;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto e = csv::parse_double(row[*error]);
    if (!e) throw DataError(path.string() + ": bad error value on row " + std::to_string(r + 2));
    LabelOutcome o{r, row[*id], *e, parse_verdict(row[*predicted]), std::nullopt};
    if (truth && !row[*truth].empty()) o.truth = parse_traffic_class(row[*truth]);
    labels.push_back(std::move(o));
  }
  return labels;
}

std::string boundary_json_text(const DecisionBoundary& boundary) {
  nlohmann::ordered_json doc;
  doc["kind"] = boundary.kind == BoundaryKind::Naive ? "naive" : "refined";
  doc["intervals"] = nlohmann::json::array();
  for (const auto& iv : boundary.benign_intervals) doc["intervals"].push_back({iv.lo, iv.hi});
  nlohmann::ordered_json params;
  params["tau"] = boundary.params.tau;
  if (boundary.kind == BoundaryKind::Refined) {
    params["gap"] = boundary.params.gap;
    params["margin"] = boundary.params.margin;
    params["max_width"] = boundary.params.max_width;
  }
  doc["params"] = params;
  return doc.dump(2) + "\n";
}

DecisionBoundary parse_boundary_json(std::string_view text) {
  DecisionBoundary b;
  try {
    const auto doc = nlohmann::json::parse(text);
    const std::string kind = doc.at("kind").get<std::string>();
    if (kind == "naive") b.kind = BoundaryKind::Naive;
    else if (kind == "refined") b.kind = BoundaryKind::Refined;
    else throw DataError("unknown boundary kind: " + kind);
    for (const auto& iv : doc.at("intervals")) {
      b.benign_intervals.push_back({iv.at(0).get<double>(), iv.at(1).get<double>()});
    }
    const auto& params = doc.at("params");
    b.params.tau = params.at("tau").get<double>();
    if (b.kind == BoundaryKind::Refined) {
      b.params.gap = params.at("gap").get<double>();
      b.params.margin = params.at("margin").get<double>();
      b.params.max_width = params.at("max_width").get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed boundary JSON: ") + e.what());
  }
  b.validate();
  return b;
}

void save_boundary(const std::filesystem::path& path, const DecisionBoundary& boundary) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path.string());
  out << boundary_json_text(boundary);
}

DecisionBoundary load_boundary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open boundary file: " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_boundary_json(text.str());
}

}  // namespace falconc

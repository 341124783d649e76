#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "falconc/autoencoder.hpp"
#include "falconc/flow_ingest.hpp"

namespace falconc {

enum class Verdict { Benign, Malicious };

std::string_view to_string(Verdict v);
Verdict parse_verdict(std::string_view text);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double x) const { return lo <= x && x <= hi; }
  bool operator==(const Interval&) const = default;
};

enum class BoundaryKind { Naive, Refined };

struct RefinedParams {
  double tau = 0.6;
  double gap = 0.3;
  double margin = 0.05;
  double max_width = 0.5;

  bool operator==(const RefinedParams&) const = default;
};

// Closed, sorted, disjoint reconstruction-error intervals labelled benign;
// every other error is malicious.
struct DecisionBoundary {
  BoundaryKind kind = BoundaryKind::Naive;
  std::vector<Interval> benign_intervals;
  RefinedParams params;  // only tau is meaningful for naive boundaries

  void validate() const;
  bool operator==(const DecisionBoundary&) const = default;
};

DecisionBoundary calibrate_naive(double tau);

// Benign training errors above tau are grouped by single linkage (gap);
// clusters no wider than max_width become benign intervals widened by
// margin. Samples labeled non-benign are rejected with DataError.
// malicious_guard, when non-empty, discards any carved interval that
// contains one of those errors.
DecisionBoundary calibrate_refined(std::span<const ProfileSample> benign_training,
                                   const RefinedParams& params,
                                   std::span<const double> malicious_guard = {});
DecisionBoundary calibrate_refined(std::span<const double> benign_training_errors,
                                   const RefinedParams& params,
                                   std::span<const double> malicious_guard = {});

Verdict classify(const DecisionBoundary& boundary, double error);

struct TagMetrics {
  std::size_t benign = 0;
  std::size_t benign_correct = 0;
  std::size_t malicious = 0;
  std::size_t malicious_detected = 0;

  double benign_accuracy() const;
};

// Malicious is the positive class. Undefined ratios (zero denominators)
// are reported as 0.
struct MetricsReport {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double false_positive_rate = 0.0;
  double benign_accuracy = 0.0;  // fraction of benign samples predicted benign
  std::map<std::string, TagMetrics> by_tag;

  std::size_t total() const { return tp + fp + tn + fn; }
};

MetricsReport evaluate(const DecisionBoundary& boundary, const ErrorProfile& profile);

struct LabelOutcome {
  std::size_t index = 0;
  std::string flow_id;
  double error = 0.0;
  Verdict predicted = Verdict::Benign;
  std::optional<TrafficClass> truth;

  bool operator==(const LabelOutcome&) const = default;
};

std::vector<LabelOutcome> label_samples(const DecisionBoundary& boundary,
                                        std::span<const ProfileSample> samples);

// Label CSV: flow_id,error,predicted,truth
std::string label_csv_text(std::span<const LabelOutcome> labels);
void write_label_csv(const std::filesystem::path& path, std::span<const LabelOutcome> labels);
std::vector<LabelOutcome> read_label_csv(const std::filesystem::path& path);

// Boundary JSON: {kind, intervals:[[lo,hi],...], params{tau,gap,margin,max_width}}
std::string boundary_json_text(const DecisionBoundary& boundary);
DecisionBoundary parse_boundary_json(std::string_view text);
void save_boundary(const std::filesystem::path& path, const DecisionBoundary& boundary);
DecisionBoundary load_boundary(const std::filesystem::path& path);

}  // namespace falconc

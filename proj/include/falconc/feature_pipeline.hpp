#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "falconc/flow_ingest.hpp"
#include "falconc/matrix.hpp"

namespace falconc {

struct CategoricalColumn {
  std::string name;
  std::vector<std::string> vocabulary;  // lexicographic

  bool operator==(const CategoricalColumn&) const = default;
};

// How flow columns become numeric features. Each IPv4 column expands to
// four octets, each categorical to a one-hot block, each passthrough to a
// single value. Feature order: ip blocks, categorical blocks, passthrough.
struct EncodingSpec {
  std::vector<std::string> ip_columns;
  std::vector<CategoricalColumn> categorical_columns;
  std::vector<std::string> passthrough_columns;

  std::size_t feature_count() const;
  std::vector<std::string> feature_names() const;

  bool operator==(const EncodingSpec&) const = default;
};

struct FeatureMatrix {
  Matrix rows;
  std::vector<std::string> feature_names;
  std::vector<std::optional<ScenarioLabel>> labels;
  std::vector<std::string> row_ids;

  std::size_t size() const { return rows.rows(); }
  std::size_t width() const { return rows.cols(); }

  FeatureMatrix select(std::span<const std::size_t> indices) const;
};

struct StandardizerParams {
  std::vector<double> mean;
  std::vector<double> scale;  // population standard deviation, 1 for constant columns

  bool operator==(const StandardizerParams&) const = default;
};

struct SplitConfig {
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
  bool operator==(const SplitConfig&) const = default;
};

struct SplitIndices {
  std::vector<std::size_t> train;  // ascending
  std::vector<std::size_t> test;   // ascending
};

// Reads one named column from a flow: the core 5-tuple, timing, counter and
// flag fields, or an extra feature. nullopt when the flow lacks it.
std::optional<FeatureValue> column_value(const FlowRecord& flow, std::string_view name);

// Core numeric columns that always pass through.
std::span<const std::string_view> core_numeric_columns();

EncodingSpec fit_encoding(std::span<const LabeledFlow> flows);
FeatureMatrix apply_encoding(const EncodingSpec& spec, std::span<const LabeledFlow> flows);

StandardizerParams fit_standardizer(const Matrix& training_rows);
Matrix standardize(const StandardizerParams& params, const Matrix& rows);
FeatureMatrix standardize(const StandardizerParams& params, FeatureMatrix matrix);

// |test| = round(n * test_fraction), at least 1 and at most n - 1.
SplitIndices split_indices(std::size_t n, const SplitConfig& config);
std::pair<FeatureMatrix, FeatureMatrix> split_train_test(const FeatureMatrix& matrix,
                                                         const SplitConfig& config);

}  // namespace falconc

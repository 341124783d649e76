#include "falconc/feature_pipeline.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

#include "falconc/csv.hpp"
#include "falconc/error.hpp"
#include "falconc/random.hpp"

namespace falconc {

namespace {

constexpr std::array<std::string_view, 22> kCoreNumeric = {
    "src_port",    "dst_port",    "protocol",   "start_time", "end_time",   "duration",
    "packets_fwd", "packets_bwd", "bytes_fwd",  "bytes_bwd",  "min_ps_fwd", "max_ps_fwd",
    "mean_ps_fwd", "min_ps_bwd",  "max_ps_bwd", "mean_ps_bwd", "syn_count", "ack_count",
    "psh_count",   "rst_count",   "fin_count",  "urg_count"};

std::optional<double> core_numeric(const FlowRecord& f, std::string_view name) {
  auto d = [](auto v) { return static_cast<double>(v); };
  if (name == "src_port") return d(f.src.port);
  if (name == "dst_port") return d(f.dst.port);
  if (name == "protocol") return d(f.protocol);
  if (name == "start_time") return f.start_time;
  if (name == "end_time") return f.end_time;
  if (name == "duration") return f.duration;
  if (name == "packets_fwd") return d(f.fwd.packets);
  if (name == "packets_bwd") return d(f.bwd.packets);
  if (name == "bytes_fwd") return d(f.fwd.bytes);
  if (name == "bytes_bwd") return d(f.bwd.bytes);
  if (name == "min_ps_fwd") return f.fwd.min_size;
  if (name == "max_ps_fwd") return f.fwd.max_size;
  if (name == "mean_ps_fwd") return f.fwd.mean_size;
  if (name == "min_ps_bwd") return f.bwd.min_size;
  if (name == "max_ps_bwd") return f.bwd.max_size;
  if (name == "mean_ps_bwd") return f.bwd.mean_size;
  if (name == "syn_count") return d(f.flags.syn);
  if (name == "ack_count") return d(f.flags.ack);
  if (name == "psh_count") return d(f.flags.psh);
  if (name == "rst_count") return d(f.flags.rst);
  if (name == "fin_count") return d(f.flags.fin);
  if (name == "urg_count") return d(f.flags.urg);
  return std::nullopt;
}

enum class Kind { Ip, Categorical, Numeric };

FeatureValue require_value(const LabeledFlow& lf, const std::string& column) {
  auto v = column_value(lf.flow, column);
  if (!v) throw DataError("flow '" + lf.flow.flow_id + "' lacks column '" + column + "'");
  return std::move(*v);
}

}  // namespace

std::span<const std::string_view> core_numeric_columns() { return kCoreNumeric; }

std::optional<FeatureValue> column_value(const FlowRecord& flow, std::string_view name) {
  if (name == "src_ip") return format_ipv4(flow.src.ip);
  if (name == "dst_ip") return format_ipv4(flow.dst.ip);
  if (auto v = core_numeric(flow, name)) return *v;
  const auto it = flow.extra_features.find(std::string(name));
  if (it == flow.extra_features.end()) return std::nullopt;
  return it->second;
}

std::size_t EncodingSpec::feature_count() const {
  std::size_t n = 4 * ip_columns.size() + passthrough_columns.size();
  for (const auto& c : categorical_columns) n += c.vocabulary.size();
  return n;
}

std::vector<std::string> EncodingSpec::feature_names() const {
  std::vector<std::string> names;
  names.reserve(feature_count());
  for (const auto& c : ip_columns) {
    for (int i = 0; i < 4; ++i) names.push_back(c + "[" + std::to_string(i) + "]");
  }
  for (const auto& c : categorical_columns) {
    for (const auto& v : c.vocabulary) names.push_back(c.name + "=" + v);
  }
  for (const auto& c : passthrough_columns) names.push_back(c);
  return names;
}

EncodingSpec fit_encoding(std::span<const LabeledFlow> flows) {
  if (flows.empty()) throw DataError("cannot fit an encoding on zero flows");

  std::vector<std::string> columns = {"src_ip", "dst_ip"};
  columns.insert(columns.end(), kCoreNumeric.begin(), kCoreNumeric.end());
  std::set<std::string> extras;
  for (const auto& lf : flows) {
    for (const auto& [name, value] : lf.flow.extra_features) extras.insert(name);
  }
  columns.insert(columns.end(), extras.begin(), extras.end());

  EncodingSpec spec;
  for (const auto& column : columns) {
    bool any_number = false;
    bool any_text = false;
    bool all_ip = true;
    std::set<std::string> vocabulary;
    for (const auto& lf : flows) {
      const FeatureValue v = require_value(lf, column);
      if (std::holds_alternative<double>(v)) {
        any_number = true;
        continue;
      }
      const auto& text = std::get<std::string>(v);
      vocabulary.insert(text);
      if (text.empty()) continue;
      any_text = true;
      if (!parse_ipv4(text)) all_ip = false;
    }
    if (any_number && any_text) {
      throw DataError("column '" + column + "' mixes numeric and text values");
    }
    Kind kind = Kind::Numeric;
    if (any_text) kind = all_ip ? Kind::Ip : Kind::Categorical;
    else if (!any_number) kind = Kind::Categorical;  // only empty cells

    switch (kind) {
      case Kind::Ip: spec.ip_columns.push_back(column); break;
      case Kind::Categorical:
        spec.categorical_columns.push_back({column, {vocabulary.begin(), vocabulary.end()}});
        break;
      case Kind::Numeric: spec.passthrough_columns.push_back(column); break;
    }
  }

  const auto names = spec.feature_names();
  if (std::set<std::string>(names.begin(), names.end()).size() != names.size()) {
    throw DataError("encoded feature names are not unique");
  }
  return spec;
}

FeatureMatrix apply_encoding(const EncodingSpec& spec, std::span<const LabeledFlow> flows) {
  FeatureMatrix out;
  out.feature_names = spec.feature_names();
  const std::size_t width = spec.feature_count();
  out.rows = Matrix(flows.size(), width);
  out.labels.reserve(flows.size());
  out.row_ids.reserve(flows.size());

  for (std::size_t r = 0; r < flows.size(); ++r) {
    const LabeledFlow& lf = flows[r];
    auto row = out.rows.row(r);
    std::size_t j = 0;

    for (const auto& column : spec.ip_columns) {
      const FeatureValue v = require_value(lf, column);
      const auto* text = std::get_if<std::string>(&v);
      std::optional<Ipv4> ip = text && text->empty() ? std::optional<Ipv4>(0)
                               : text               ? parse_ipv4(*text)
                                                    : std::nullopt;
      if (!ip) throw DataError("column '" + column + "' holds a non-IPv4 value");
      for (int k = 3; k >= 0; --k) row[j++] = static_cast<double>((*ip >> (8 * k)) & 0xff);
    }

    for (const auto& column : spec.categorical_columns) {
      const FeatureValue v = require_value(lf, column.name);
      const std::string text = std::holds_alternative<double>(v)
                                   ? csv::format_double(std::get<double>(v))
                                   : std::get<std::string>(v);
      const auto it = std::lower_bound(column.vocabulary.begin(), column.vocabulary.end(), text);
      if (it != column.vocabulary.end() && *it == text) {
        row[j + static_cast<std::size_t>(it - column.vocabulary.begin())] = 1.0;
      }
      j += column.vocabulary.size();
    }

    for (const auto& column : spec.passthrough_columns) {
      const FeatureValue v = require_value(lf, column);
      if (const double* d = std::get_if<double>(&v)) {
        row[j++] = *d;
      } else if (std::get<std::string>(v).empty()) {
        row[j++] = 0.0;
      } else {
        throw DataError("column '" + column + "' holds text in a numeric column");
      }
    }

    out.labels.push_back(lf.label);
    out.row_ids.push_back(lf.flow.flow_id);
  }
  return out;
}

FeatureMatrix FeatureMatrix::select(std::span<const std::size_t> indices) const {
  FeatureMatrix out;
  out.rows = rows.select_rows(indices);
  out.feature_names = feature_names;
  out.labels.reserve(indices.size());
  out.row_ids.reserve(indices.size());
  for (std::size_t i : indices) {
    out.labels.push_back(labels.at(i));
    out.row_ids.push_back(row_ids.at(i));
  }
  return out;
}

StandardizerParams fit_standardizer(const Matrix& training_rows) {
  const std::size_t n = training_rows.rows();
  if (n == 0) throw DataError("cannot fit a standardizer on zero rows");
  if (n < 2) throw DataError("standardizer needs at least two rows");
  const std::size_t d = training_rows.cols();
  StandardizerParams params{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = training_rows.row(i);
    for (std::size_t j = 0; j < d; ++j) params.mean[j] += row[j];
  }
  for (double& m : params.mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = training_rows.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      const double delta = row[j] - params.mean[j];
      params.scale[j] += delta * delta;
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    const double sd = std::sqrt(params.scale[j] / static_cast<double>(n));
    // Rounding in the mean can leave a tiny spread on constant columns.
    params.scale[j] = sd > 1e-12 * std::max(1.0, std::abs(params.mean[j])) ? sd : 1.0;
  }
  return params;
}

Matrix standardize(const StandardizerParams& params, const Matrix& rows) {
  if (rows.cols() != params.mean.size() && !rows.empty()) {
    throw DataError("standardizer width " + std::to_string(params.mean.size()) +
                    " does not match matrix width " + std::to_string(rows.cols()));
  }
  Matrix out = rows;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto row = out.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = (row[j] - params.mean[j]) / params.scale[j];
  }
  return out;
}

FeatureMatrix standardize(const StandardizerParams& params, FeatureMatrix matrix) {
  if (matrix.width() != params.mean.size()) {
    throw DataError("standardizer width " + std::to_string(params.mean.size()) +
                    " does not match matrix width " + std::to_string(matrix.width()));
  }
  matrix.rows = standardize(params, matrix.rows);
  return matrix;
}

SplitIndices split_indices(std::size_t n, const SplitConfig& config) {
  if (!(config.test_fraction > 0.0 && config.test_fraction < 1.0)) {
    throw UsageError("test_fraction must lie in (0, 1)");
  }
  if (n < 2) throw DataError("need at least two rows to split, got " + std::to_string(n));
  auto test_count = static_cast<std::size_t>(std::llround(static_cast<double>(n) * config.test_fraction));
  test_count = std::clamp<std::size_t>(test_count, 1, n - 1);

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(config.seed);
  rng.shuffle(order);

  SplitIndices split;
  split.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(test_count));
  split.train.assign(order.begin() + static_cast<std::ptrdiff_t>(test_count), order.end());
  std::sort(split.test.begin(), split.test.end());
  std::sort(split.train.begin(), split.train.end());
  return split;
}

std::pair<FeatureMatrix, FeatureMatrix> split_train_test(const FeatureMatrix& matrix,
                                                         const SplitConfig& config) {
  const SplitIndices split = split_indices(matrix.size(), config);
  return {matrix.select(split.train), matrix.select(split.test)};
}

}  // namespace falconc

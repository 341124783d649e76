#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "falconc/feature_pipeline.hpp"
#include "falconc/matrix.hpp"

namespace falconc {

// Symmetric dense autoencoder d -> H -> L -> H -> d with ReLU after every
// layer. linear_output drops the ReLU on the final layer.
struct Architecture {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 80;
  std::size_t latent_dim = 41;
  bool linear_output = false;

  // Requires 1 <= latent <= hidden <= input. Throws UsageError.
  void validate() const;

  bool operator==(const Architecture&) const = default;
};

// Affine map y = x * W + b with W stored fan_in x fan_out, row-major.
struct DenseLayer {
  std::size_t fan_in = 0;
  std::size_t fan_out = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  double& weight(std::size_t in, std::size_t out) { return weights[in * fan_out + out]; }
  double weight(std::size_t in, std::size_t out) const { return weights[in * fan_out + out]; }

  bool operator==(const DenseLayer&) const = default;
};

inline constexpr std::size_t kLayerCount = 4;

struct AutoencoderParams {
  Architecture arch;
  std::array<DenseLayer, kLayerCount> layers;

  // Parameters with the same shapes and every entry zero.
  static AutoencoderParams zeros(const Architecture& arch);

  bool operator==(const AutoencoderParams&) const = default;
};

// Gradients share the parameter layout.
using Gradients = AutoencoderParams;

struct TrainConfig {
  std::size_t max_epochs = 100;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t early_stop_patience = 10;
  double early_stop_min_delta = 1e-5;
  std::uint64_t seed = 0;

  void validate() const;

  bool operator==(const TrainConfig&) const = default;
};

enum class StopReason { MaxEpochs, EarlyStop };

std::string_view to_string(StopReason reason);
StopReason parse_stop_reason(std::string_view text);

struct TrainingHistory {
  std::vector<double> losses;  // full-pass training MSE after each epoch
  std::size_t stopped_epoch = 0;
  std::size_t best_epoch = 0;  // 1-based epoch whose parameters were returned
  StopReason stop_reason = StopReason::MaxEpochs;

  bool operator==(const TrainingHistory&) const = default;
};

struct AdamState {
  std::array<std::vector<double>, kLayerCount> m_weights, v_weights, m_bias, v_bias;

  static AdamState zeros(const Architecture& arch);
};

struct TrainResult {
  AutoencoderParams params;
  TrainingHistory history;
};

// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
AutoencoderParams init_params(const Architecture& arch, std::uint64_t seed);

std::vector<double> forward(const AutoencoderParams& params, std::span<const double> x);

// Mean over features of the squared reconstruction residual.
double reconstruction_error(const AutoencoderParams& params, std::span<const double> x);

// Per-row errors for a whole matrix.
std::vector<double> reconstruction_errors(const AutoencoderParams& params, const Matrix& rows);

// Mean over all rows of reconstruction_error.
double mean_reconstruction_error(const AutoencoderParams& params, const Matrix& rows);

struct BackwardResult {
  Gradients gradients;
  double loss = 0.0;  // batch-mean MSE
};

// Exact gradient of batch-mean MSE; ReLU'(0) = 0.
BackwardResult backward(const AutoencoderParams& params, const Matrix& data,
                        std::span<const std::size_t> batch_rows);
BackwardResult backward(const AutoencoderParams& params, const Matrix& batch);

// One bias-corrected ADAM update over flat buffers; t is 1-based.
void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m,
                 std::span<double> v, std::size_t t, const TrainConfig& config);

void adam_step(AutoencoderParams& params, const Gradients& gradients, AdamState& state,
               std::size_t t, const TrainConfig& config);

// Mini-batch ADAM on benign rows with a seeded per-epoch shuffle. Stops
// after max_epochs or when the loss has not improved by min_delta for
// patience epochs; returns the parameters of the lowest-loss epoch.
TrainResult train(const FeatureMatrix& benign, const Architecture& arch, const TrainConfig& config);

struct ProfileSample {
  std::string tag;
  std::string row_id;
  std::optional<ScenarioLabel> label;
  double error = 0.0;
};

struct TagSummary {
  std::string tag;
  std::size_t count = 0;
  double min = 0.0;
  double mean = 0.0;
  double max = 0.0;
  double p50 = 0.0;
  double p90 = 0.0;
  double p95 = 0.0;
  double p99 = 0.0;
};

struct ErrorProfile {
  std::vector<ProfileSample> samples;
  std::vector<TagSummary> summaries;  // in first-seen tag order
};

using NamedDataset = std::pair<std::string, FeatureMatrix>;

ErrorProfile profile_errors(const AutoencoderParams& params, std::span<const NamedDataset> datasets);

// Linear-interpolation percentile (q in [0, 100]) of unsorted values.
double percentile(std::vector<double> values, double q);

}  // namespace falconc

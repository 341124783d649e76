#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "falconc/autoencoder.hpp"
#include "falconc/feature_pipeline.hpp"

namespace falconc {

struct SweepConfig {
  std::size_t min_latent = 1;
  std::size_t max_latent = 49;
  std::size_t trials_per_dim = 5;
  std::size_t rolling_window = 5;
  std::size_t hidden_dim = 80;
  bool linear_output = false;
  double holdout_fraction = 0.2;
  TrainConfig train;       // train.seed is the base seed for every trial
  std::size_t threads = 0;  // 0 = hardware concurrency

  void validate() const;
};

struct SweepTrial {
  std::size_t latent_dim = 0;
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  double mean_error = 0.0;

  bool operator==(const SweepTrial&) const = default;
};

struct DimSummary {
  std::size_t latent_dim = 0;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  double std = 0.0;  // population
  double rolling_mean = 0.0;

  bool operator==(const DimSummary&) const = default;
};

struct SweepReport {
  std::vector<SweepTrial> trials;      // ordered by (dim, trial)
  std::vector<DimSummary> summaries;   // ordered by dim
  double grand_mean = 0.0;             // mean of per-dim means over all evaluated dims
  std::size_t recommended_dim = 0;     // argmin per-dim mean, ties to the smaller dim
  std::size_t rolling_window = 0;
  std::vector<std::string> warnings;
};

// Seed for one (dim, trial) training run.
std::uint64_t sweep_trial_seed(std::uint64_t base_seed, std::size_t latent_dim, std::size_t trial);

// Trains trials_per_dim autoencoders per latent dimension on a fixed
// benign training split and scores each on the same held-out benign split.
SweepReport run_sweep(const FeatureMatrix& benign, const SweepConfig& config);

// Centered moving average; the window is truncated at both ends.
std::vector<double> rolling_average(std::span<const double> values, std::size_t window);

std::string sweep_trials_csv_text(const SweepReport& report);
std::string sweep_summary_csv_text(const SweepReport& report);
std::vector<DimSummary> parse_sweep_summary_csv(std::string_view text);
std::vector<SweepTrial> parse_sweep_trials_csv(std::string_view text);

}  // namespace falconc

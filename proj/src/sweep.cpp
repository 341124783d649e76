#include "falconc/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "falconc/csv.hpp"
#include "falconc/error.hpp"
#include "falconc/random.hpp"

namespace falconc {

void SweepConfig::validate() const {
  if (min_latent < 1 || min_latent > max_latent) throw UsageError("latent range must satisfy 1 <= min <= max");
  if (trials_per_dim < 1) throw UsageError("trials_per_dim must be at least 1");
  if (rolling_window < 1) throw UsageError("rolling_window must be at least 1");
  if (hidden_dim < 1) throw UsageError("hidden_dim must be at least 1");
  train.validate();
}

std::uint64_t sweep_trial_seed(std::uint64_t base_seed, std::size_t latent_dim, std::size_t trial) {
  return derive_seed(base_seed, latent_dim, trial);
}

std::vector<double> rolling_average(std::span<const double> values, std::size_t window) {
  if (window < 1) throw UsageError("rolling window must be at least 1");
  const std::size_t n = values.size();
  const std::size_t left = (window - 1) / 2;
  const std::size_t right = window / 2;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= left ? i - left : 0;
    const std::size_t hi = std::min(n - 1, i + right);
    double sum = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) sum += values[j];
    out[i] = sum / static_cast<double>(hi - lo + 1);
  }
  return out;
}

SweepReport run_sweep(const FeatureMatrix& benign, const SweepConfig& config) {
  config.validate();
  const std::size_t d = benign.width();
  if (config.hidden_dim > d) {
    throw UsageError("hidden dim " + std::to_string(config.hidden_dim) + " exceeds input dim " +
                     std::to_string(d));
  }

  SweepReport report;
  report.rolling_window = config.rolling_window;

  std::vector<std::size_t> dims;
  for (std::size_t dim = config.min_latent; dim <= config.max_latent; ++dim) {
    if (dim > config.hidden_dim) {
      report.warnings.push_back("latent dim " + std::to_string(dim) + " exceeds hidden dim " +
                                std::to_string(config.hidden_dim) + "; skipped");
      continue;
    }
    dims.push_back(dim);
  }
  if (dims.empty()) throw UsageError("no latent dimension in range fits the hidden layer");

  // One held-out benign subset shared by every run.
  const SplitIndices split = split_indices(
      benign.size(), {config.holdout_fraction, derive_seed(config.train.seed, "sweep-holdout")});
  const FeatureMatrix train_rows = benign.select(split.train);
  const Matrix holdout = benign.rows.select_rows(split.test);

  for (std::size_t dim : dims) {
    for (std::size_t t = 0; t < config.trials_per_dim; ++t) {
      report.trials.push_back({dim, t, sweep_trial_seed(config.train.seed, dim, t), 0.0});
    }
  }

  std::size_t threads = config.threads ? config.threads : std::thread::hardware_concurrency();
  threads = std::clamp<std::size_t>(threads, 1, report.trials.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < report.trials.size(); i = next++) {
      SweepTrial& trial = report.trials[i];
      try {
        const Architecture arch{d, config.hidden_dim, trial.latent_dim, config.linear_output};
        TrainConfig tc = config.train;
        tc.seed = trial.seed;
        const TrainResult fit = train(train_rows, arch, tc);
        trial.mean_error = mean_reconstruction_error(fit.params, holdout);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<double> means;
  for (std::size_t k = 0; k < dims.size(); ++k) {
    const auto first = report.trials.begin() + static_cast<std::ptrdiff_t>(k * config.trials_per_dim);
    std::vector<double> errors;
    for (auto it = first; it != first + static_cast<std::ptrdiff_t>(config.trials_per_dim); ++it) {
      errors.push_back(it->mean_error);
    }
    DimSummary s;
    s.latent_dim = dims[k];
    s.mean = std::accumulate(errors.begin(), errors.end(), 0.0) / static_cast<double>(errors.size());
    s.min = *std::min_element(errors.begin(), errors.end());
    s.max = *std::max_element(errors.begin(), errors.end());
    double ss = 0.0;
    for (double e : errors) ss += (e - s.mean) * (e - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(errors.size()));
    means.push_back(s.mean);
    report.summaries.push_back(s);
  }
  const auto rolling = rolling_average(means, config.rolling_window);
  for (std::size_t k = 0; k < dims.size(); ++k) report.summaries[k].rolling_mean = rolling[k];
  report.grand_mean = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(means.size());
  // min_element keeps the first minimum, i.e. the smaller dimension.
  report.recommended_dim =
      dims[static_cast<std::size_t>(std::min_element(means.begin(), means.end()) - means.begin())];
  return report;
}

std::string sweep_trials_csv_text(const SweepReport& report) {
  std::ostringstream out;
  csv::write_row(out, {"latent_dim", "trial", "seed", "mean_error"});
  for (const auto& t : report.trials) {
    csv::write_row(out, {std::to_string(t.latent_dim), std::to_string(t.trial), std::to_string(t.seed),
                         csv::format_double(t.mean_error)});
  }
  return out.str();
}

std::string sweep_summary_csv_text(const SweepReport& report) {
  std::ostringstream out;
  csv::write_row(out, {"latent_dim", "mean", "min", "max", "std", "rolling_mean"});
  for (const auto& s : report.summaries) {
    csv::write_row(out, {std::to_string(s.latent_dim), csv::format_double(s.mean),
                         csv::format_double(s.min), csv::format_double(s.max),
                         csv::format_double(s.std), csv::format_double(s.rolling_mean)});
  }
  return out.str();
}

namespace {

double number(const std::string& cell) {
  const auto v = csv::parse_double(cell);
  if (!v) throw DataError("bad numeric cell in sweep CSV: '" + cell + "'");
  return *v;
}

std::size_t column(const csv::Table& t, std::string_view name) {
  const auto c = t.column(name);
  if (!c) throw DataError("sweep CSV lacks column '" + std::string(name) + "'");
  return *c;
}

}  // namespace

std::vector<DimSummary> parse_sweep_summary_csv(std::string_view text) {
  const csv::Table t = csv::parse(text);
  const std::size_t dim = column(t, "latent_dim"), mean = column(t, "mean"), mn = column(t, "min"),
                    mx = column(t, "max"), sd = column(t, "std"), roll = column(t, "rolling_mean");
  std::vector<DimSummary> out;
  for (const auto& row : t.rows) {
    out.push_back({static_cast<std::size_t>(number(row[dim])), number(row[mean]), number(row[mn]),
                   number(row[mx]), number(row[sd]), number(row[roll])});
  }
  return out;
}

std::vector<SweepTrial> parse_sweep_trials_csv(std::string_view text) {
  const csv::Table t = csv::parse(text);
  const std::size_t dim = column(t, "latent_dim"), trial = column(t, "trial"),
                    seed = column(t, "seed"), err = column(t, "mean_error");
  std::vector<SweepTrial> out;
  for (const auto& row : t.rows) {
    out.push_back({static_cast<std::size_t>(number(row[dim])),
                   static_cast<std::size_t>(number(row[trial])), std::stoull(row[seed]),
                   number(row[err])});
  }
  return out;
}

}  // namespace falconc

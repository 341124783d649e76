#include "falconc/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "falconc/error.hpp"
#include "falconc/random.hpp"

namespace falconc {

void Architecture::validate() const {
  if (input_dim == 0 || hidden_dim == 0 || latent_dim == 0) {
    throw UsageError("architecture dimensions must be positive");
  }
  if (latent_dim > hidden_dim) {
    throw UsageError("latent dim " + std::to_string(latent_dim) + " exceeds hidden dim " +
                     std::to_string(hidden_dim));
  }
  if (hidden_dim > input_dim) {
    throw UsageError("hidden dim " + std::to_string(hidden_dim) + " exceeds input dim " +
                     std::to_string(input_dim));
  }
}

void TrainConfig::validate() const {
  if (max_epochs == 0) throw UsageError("max_epochs must be positive");
  if (!(learning_rate > 0.0)) throw UsageError("learning_rate must be positive");
  if (batch_size == 0) throw UsageError("batch_size must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
    throw UsageError("adam betas must lie in (0, 1)");
  }
  if (!(epsilon > 0.0)) throw UsageError("adam epsilon must be positive");
  if (early_stop_patience == 0) throw UsageError("early_stop_patience must be positive");
  if (!(early_stop_min_delta >= 0.0)) throw UsageError("early_stop_min_delta must be non-negative");
}

std::string_view to_string(StopReason reason) {
  return reason == StopReason::EarlyStop ? "early_stop" : "max_epochs";
}

StopReason parse_stop_reason(std::string_view text) {
  if (text == "early_stop") return StopReason::EarlyStop;
  if (text == "max_epochs") return StopReason::MaxEpochs;
  throw DataError("unknown stop reason: " + std::string(text));
}

namespace {

std::array<std::pair<std::size_t, std::size_t>, kLayerCount> layer_shapes(const Architecture& a) {
  return {{{a.input_dim, a.hidden_dim},
           {a.hidden_dim, a.latent_dim},
           {a.latent_dim, a.hidden_dim},
           {a.hidden_dim, a.input_dim}}};
}

constexpr std::array<const char*, kLayerCount> kLayerNames = {"encoder hidden", "latent",
                                                               "decoder hidden", "output"};

bool layer_has_relu(const Architecture& arch, std::size_t layer) {
  return layer + 1 < kLayerCount || !arch.linear_output;
}

// Pre-activations and activations of one sample; act[0] is the input.
struct Trace {
  std::array<std::vector<double>, kLayerCount> pre;
  std::array<std::vector<double>, kLayerCount + 1> act;
};

void run_forward(const AutoencoderParams& params, std::span<const double> x, Trace& trace) {
  const Architecture& arch = params.arch;
  if (x.size() != arch.input_dim) {
    throw DataError("input has " + std::to_string(x.size()) + " features, model expects " +
                    std::to_string(arch.input_dim));
  }
  trace.act[0].assign(x.begin(), x.end());
  for (std::size_t k = 0; k < kLayerCount; ++k) {
    const DenseLayer& layer = params.layers[k];
    const auto& in = trace.act[k];
    auto& z = trace.pre[k];
    z.assign(layer.bias.begin(), layer.bias.end());
    for (std::size_t i = 0; i < layer.fan_in; ++i) {
      const double xi = in[i];
      if (xi == 0.0) continue;
      const double* w = layer.weights.data() + i * layer.fan_out;
      for (std::size_t o = 0; o < layer.fan_out; ++o) z[o] += xi * w[o];
    }
    auto& a = trace.act[k + 1];
    a.resize(z.size());
    const bool relu = layer_has_relu(arch, k);
    for (std::size_t o = 0; o < z.size(); ++o) {
      if (!std::isfinite(z[o])) {
        throw NumericError(std::string("non-finite activation in ") + kLayerNames[k] + " layer");
      }
      a[o] = relu ? std::max(z[o], 0.0) : z[o];
    }
  }
}

double squared_error_sum(std::span<const double> x, std::span<const double> y) {
  double sum = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double r = x[j] - y[j];
    sum += r * r;
  }
  return sum;
}

void check_finite(const Gradients& g) {
  for (std::size_t k = 0; k < kLayerCount; ++k) {
    const auto finite = [](double v) { return std::isfinite(v); };
    if (!std::all_of(g.layers[k].weights.begin(), g.layers[k].weights.end(), finite) ||
        !std::all_of(g.layers[k].bias.begin(), g.layers[k].bias.end(), finite)) {
      throw NumericError(std::string("non-finite gradient in ") + kLayerNames[k] + " layer");
    }
  }
}

}  // namespace

AutoencoderParams AutoencoderParams::zeros(const Architecture& arch) {
  AutoencoderParams p;
  p.arch = arch;
  const auto shapes = layer_shapes(arch);
  for (std::size_t k = 0; k < kLayerCount; ++k) {
    auto [in, out] = shapes[k];
    p.layers[k] = DenseLayer{in, out, std::vector<double>(in * out, 0.0), std::vector<double>(out, 0.0)};
  }
  return p;
}

AdamState AdamState::zeros(const Architecture& arch) {
  AdamState s;
  const auto shapes = layer_shapes(arch);
  for (std::size_t k = 0; k < kLayerCount; ++k) {
    auto [in, out] = shapes[k];
    s.m_weights[k].assign(in * out, 0.0);
    s.v_weights[k].assign(in * out, 0.0);
    s.m_bias[k].assign(out, 0.0);
    s.v_bias[k].assign(out, 0.0);
  }
  return s;
}

AutoencoderParams init_params(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  AutoencoderParams p = AutoencoderParams::zeros(arch);
  Rng rng(seed);
  for (auto& layer : p.layers) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.fan_in + layer.fan_out));
    for (double& w : layer.weights) w = rng.uniform(-limit, limit);
  }
  return p;
}

std::vector<double> forward(const AutoencoderParams& params, std::span<const double> x) {
  Trace trace;
  run_forward(params, x, trace);
  return std::move(trace.act[kLayerCount]);
}

double reconstruction_error(const AutoencoderParams& params, std::span<const double> x) {
  const auto y = forward(params, x);
  return squared_error_sum(x, y) / static_cast<double>(x.size());
}

std::vector<double> reconstruction_errors(const AutoencoderParams& params, const Matrix& rows) {
  std::vector<double> errors(rows.rows());
  Trace trace;
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    run_forward(params, rows.row(i), trace);
    errors[i] = squared_error_sum(rows.row(i), trace.act[kLayerCount]) /
                static_cast<double>(rows.cols());
  }
  return errors;
}

double mean_reconstruction_error(const AutoencoderParams& params, const Matrix& rows) {
  if (rows.empty()) throw DataError("cannot score an empty matrix");
  const auto errors = reconstruction_errors(params, rows);
  return std::accumulate(errors.begin(), errors.end(), 0.0) / static_cast<double>(errors.size());
}

BackwardResult backward(const AutoencoderParams& params, const Matrix& data,
                        std::span<const std::size_t> batch_rows) {
  if (batch_rows.empty()) throw DataError("backward needs a non-empty batch");
  const Architecture& arch = params.arch;
  const std::size_t d = arch.input_dim;
  BackwardResult result{AutoencoderParams::zeros(arch), 0.0};
  const double norm = 1.0 / static_cast<double>(batch_rows.size() * d);

  Trace trace;
  std::array<std::vector<double>, kLayerCount> delta;
  for (std::size_t r : batch_rows) {
    const auto x = data.row(r);
    run_forward(params, x, trace);
    const auto& out = trace.act[kLayerCount];
    result.loss += squared_error_sum(x, out) * norm;

    // Output delta: dL/dz for the last layer.
    auto& top = delta[kLayerCount - 1];
    top.resize(d);
    const bool relu_out = layer_has_relu(arch, kLayerCount - 1);
    for (std::size_t j = 0; j < d; ++j) {
      const double gate = !relu_out || trace.pre[kLayerCount - 1][j] > 0.0 ? 1.0 : 0.0;
      top[j] = 2.0 * (out[j] - x[j]) * norm * gate;
    }

    for (std::size_t k = kLayerCount; k-- > 0;) {
      const DenseLayer& layer = params.layers[k];
      DenseLayer& grad = result.gradients.layers[k];
      const auto& in = trace.act[k];
      const auto& dz = delta[k];
      for (std::size_t o = 0; o < layer.fan_out; ++o) grad.bias[o] += dz[o];
      for (std::size_t i = 0; i < layer.fan_in; ++i) {
        const double xi = in[i];
        if (xi == 0.0) continue;
        double* gw = grad.weights.data() + i * layer.fan_out;
        for (std::size_t o = 0; o < layer.fan_out; ++o) gw[o] += xi * dz[o];
      }
      if (k == 0) break;
      // Propagate to the previous layer's pre-activation (always ReLU).
      auto& below = delta[k - 1];
      below.assign(layer.fan_in, 0.0);
      for (std::size_t i = 0; i < layer.fan_in; ++i) {
        if (!(trace.pre[k - 1][i] > 0.0)) continue;
        const double* w = layer.weights.data() + i * layer.fan_out;
        double sum = 0.0;
        for (std::size_t o = 0; o < layer.fan_out; ++o) sum += w[o] * dz[o];
        below[i] = sum;
      }
    }
  }
  check_finite(result.gradients);
  return result;
}

BackwardResult backward(const AutoencoderParams& params, const Matrix& batch) {
  std::vector<std::size_t> rows(batch.rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return backward(params, batch, rows);
}

void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m,
                 std::span<double> v, std::size_t t, const TrainConfig& config) {
  if (t == 0) throw UsageError("adam step index is 1-based");
  const double b1 = config.beta1;
  const double b2 = config.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    if (!std::isfinite(g)) throw NumericError("non-finite gradient passed to adam");
    m[i] = b1 * m[i] + (1.0 - b1) * g;
    v[i] = b2 * v[i] + (1.0 - b2) * g * g;
    const double m_hat = m[i] / correction1;
    const double v_hat = v[i] / correction2;
    params[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
  }
}

void adam_step(AutoencoderParams& params, const Gradients& gradients, AdamState& state,
               std::size_t t, const TrainConfig& config) {
  for (std::size_t k = 0; k < kLayerCount; ++k) {
    adam_update(params.layers[k].weights, gradients.layers[k].weights, state.m_weights[k],
                state.v_weights[k], t, config);
    adam_update(params.layers[k].bias, gradients.layers[k].bias, state.m_bias[k], state.v_bias[k],
                t, config);
  }
}

TrainResult train(const FeatureMatrix& benign, const Architecture& arch, const TrainConfig& config) {
  arch.validate();
  config.validate();
  const Matrix& data = benign.rows;
  const std::size_t n = data.rows();
  if (n == 0) throw DataError("training needs at least one row");
  if (data.cols() != arch.input_dim) {
    throw DataError("training data has " + std::to_string(data.cols()) +
                    " features, architecture expects " + std::to_string(arch.input_dim));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& label = benign.labels.at(i);
    if (!label || label->traffic_class != TrafficClass::Benign) {
      throw DataError("training row '" + benign.row_ids.at(i) +
                      "' is not labeled benign; the autoencoder trains on benign flows only");
    }
  }

  AutoencoderParams params = init_params(arch, derive_seed(config.seed, "init"));
  AdamState state = AdamState::zeros(arch);
  Rng shuffle_rng(derive_seed(config.seed, "shuffle"));
  const std::size_t batch = std::min(config.batch_size, n);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result{params, {}};
  double best_loss = std::numeric_limits<double>::infinity();
  double reference_loss = std::numeric_limits<double>::infinity();
  std::size_t wait = 0;
  std::size_t step = 0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss = 0.0;
    try {
      for (std::size_t start = 0; start < n; start += batch) {
        const std::size_t end = std::min(start + batch, n);
        const std::span<const std::size_t> rows(order.data() + start, end - start);
        const BackwardResult br = backward(params, data, rows);
        adam_step(params, br.gradients, state, ++step, config);
      }
      loss = mean_reconstruction_error(params, data);
    } catch (const NumericError& e) {
      throw NumericError("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
    }
    if (!std::isfinite(loss)) {
      throw NumericError("training diverged at epoch " + std::to_string(epoch) + ": loss is not finite");
    }
    result.history.losses.push_back(loss);
    result.history.stopped_epoch = epoch;

    if (loss < best_loss) {
      best_loss = loss;
      result.params = params;
      result.history.best_epoch = epoch;
    }
    if (loss < reference_loss - config.early_stop_min_delta) {
      reference_loss = loss;
      wait = 0;
    } else if (++wait >= config.early_stop_patience) {
      result.history.stop_reason = StopReason::EarlyStop;
      break;
    }
  }
  return result;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw DataError("percentile of an empty list");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + (values[hi] - values[lo]) * frac;
}

ErrorProfile profile_errors(const AutoencoderParams& params, std::span<const NamedDataset> datasets) {
  ErrorProfile profile;
  for (const auto& [tag, matrix] : datasets) {
    if (matrix.size() > 0 && matrix.width() != params.arch.input_dim) {
      throw DataError("dataset '" + tag + "' has " + std::to_string(matrix.width()) +
                      " features, model expects " + std::to_string(params.arch.input_dim));
    }
    const auto errors = reconstruction_errors(params, matrix.rows);
    for (std::size_t i = 0; i < errors.size(); ++i) {
      profile.samples.push_back({tag, matrix.row_ids.at(i), matrix.labels.at(i), errors[i]});
    }
    auto it = std::find_if(profile.summaries.begin(), profile.summaries.end(),
                           [&](const TagSummary& s) { return s.tag == tag; });
    if (it == profile.summaries.end()) {
      profile.summaries.push_back({tag});
    }
  }
  for (auto& summary : profile.summaries) {
    std::vector<double> errors;
    for (const auto& s : profile.samples) {
      if (s.tag == summary.tag) errors.push_back(s.error);
    }
    summary.count = errors.size();
    if (errors.empty()) continue;
    summary.min = *std::min_element(errors.begin(), errors.end());
    summary.max = *std::max_element(errors.begin(), errors.end());
    summary.mean = std::accumulate(errors.begin(), errors.end(), 0.0) / static_cast<double>(errors.size());
    summary.p50 = percentile(errors, 50);
    summary.p90 = percentile(errors, 90);
    summary.p95 = percentile(errors, 95);
    summary.p99 = percentile(errors, 99);
  }
  return profile;
}

}  // namespace falconc

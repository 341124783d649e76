#include "falconc/model_io.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "falconc/error.hpp"

namespace falconc {

using ojson = nlohmann::ordered_json;

void ModelFile::validate() const {
  const std::size_t d = params.arch.input_dim;
  params.arch.validate();
  if (encoding.feature_count() != d || standardizer.mean.size() != d ||
      standardizer.scale.size() != d || metadata.feature_count != d) {
    throw DataError("model feature count is inconsistent (architecture d=" + std::to_string(d) +
                    ", encoding d=" + std::to_string(encoding.feature_count()) +
                    ", standardizer d=" + std::to_string(standardizer.mean.size()) +
                    ", metadata d=" + std::to_string(metadata.feature_count) + ")");
  }
  for (double s : standardizer.scale) {
    if (!(s > 0.0)) throw DataError("standardizer scale must be positive");
  }
  const auto expected = AutoencoderParams::zeros(params.arch);
  for (std::size_t k = 0; k < kLayerCount; ++k) {
    const auto& got = params.layers[k];
    const auto& want = expected.layers[k];
    if (got.fan_in != want.fan_in || got.fan_out != want.fan_out ||
        got.weights.size() != want.weights.size() || got.bias.size() != want.bias.size()) {
      throw DataError("layer " + std::to_string(k) + " shape does not match the architecture");
    }
  }
}

FeatureMatrix ModelFile::prepare(std::span<const LabeledFlow> flows) const {
  FeatureMatrix encoded = apply_encoding(encoding, flows);
  if (encoded.width() != params.arch.input_dim) {
    throw DataError("pipeline produced " + std::to_string(encoded.width()) +
                    " features but the model was built for " +
                    std::to_string(params.arch.input_dim));
  }
  return standardize(standardizer, std::move(encoded));
}

std::string model_json_text(const ModelFile& m) {
  ojson doc;
  const Architecture& a = m.params.arch;
  doc["architecture"] = {{"input_dim", a.input_dim},
                         {"hidden_dim", a.hidden_dim},
                         {"latent_dim", a.latent_dim},
                         {"activation", "relu"},
                         {"linear_output", a.linear_output}};
  const TrainConfig& c = m.train_config;
  doc["train_config"] = {{"max_epochs", c.max_epochs},
                         {"learning_rate", c.learning_rate},
                         {"batch_size", c.batch_size},
                         {"beta1", c.beta1},
                         {"beta2", c.beta2},
                         {"epsilon", c.epsilon},
                         {"early_stop_patience", c.early_stop_patience},
                         {"early_stop_min_delta", c.early_stop_min_delta},
                         {"seed", c.seed}};
  ojson categorical = ojson::array();
  for (const auto& col : m.encoding.categorical_columns) {
    categorical.push_back({{"name", col.name}, {"vocabulary", col.vocabulary}});
  }
  doc["encoding_spec"] = {{"ip_columns", m.encoding.ip_columns},
                          {"categorical_columns", categorical},
                          {"passthrough_columns", m.encoding.passthrough_columns}};
  doc["standardizer"] = {{"mean", m.standardizer.mean}, {"scale", m.standardizer.scale}};
  ojson weights = ojson::array();
  for (const auto& layer : m.params.layers) {
    weights.push_back({{"fan_in", layer.fan_in},
                       {"fan_out", layer.fan_out},
                       {"weights", layer.weights},
                       {"bias", layer.bias}});
  }
  doc["weights"] = weights;
  doc["history"] = {{"losses", m.history.losses},
                    {"stopped_epoch", m.history.stopped_epoch},
                    {"best_epoch", m.history.best_epoch},
                    {"stop_reason", to_string(m.history.stop_reason)}};
  doc["metadata"] = {{"seed", m.metadata.seed},
                     {"created", m.metadata.created},
                     {"feature_count", m.metadata.feature_count},
                     {"std_convention", m.metadata.std_convention},
                     {"split", {{"test_fraction", m.metadata.split.test_fraction},
                                {"seed", m.metadata.split.seed}}},
                     {"training_flow_ids", m.metadata.training_flow_ids}};
  return doc.dump(1) + "\n";
}

ModelFile parse_model_json(std::string_view text) {
  ModelFile m;
  try {
    const auto doc = nlohmann::json::parse(text);
    const auto& a = doc.at("architecture");
    Architecture arch;
    arch.input_dim = a.at("input_dim").get<std::size_t>();
    arch.hidden_dim = a.at("hidden_dim").get<std::size_t>();
    arch.latent_dim = a.at("latent_dim").get<std::size_t>();
    arch.linear_output = a.value("linear_output", false);

    const auto& c = doc.at("train_config");
    TrainConfig& tc = m.train_config;
    tc.max_epochs = c.at("max_epochs").get<std::size_t>();
    tc.learning_rate = c.at("learning_rate").get<double>();
    tc.batch_size = c.at("batch_size").get<std::size_t>();
    tc.beta1 = c.at("beta1").get<double>();
    tc.beta2 = c.at("beta2").get<double>();
    tc.epsilon = c.at("epsilon").get<double>();
    tc.early_stop_patience = c.at("early_stop_patience").get<std::size_t>();
    tc.early_stop_min_delta = c.at("early_stop_min_delta").get<double>();
    tc.seed = c.at("seed").get<std::uint64_t>();

    const auto& e = doc.at("encoding_spec");
    m.encoding.ip_columns = e.at("ip_columns").get<std::vector<std::string>>();
    for (const auto& col : e.at("categorical_columns")) {
      m.encoding.categorical_columns.push_back(
          {col.at("name").get<std::string>(), col.at("vocabulary").get<std::vector<std::string>>()});
    }
    m.encoding.passthrough_columns = e.at("passthrough_columns").get<std::vector<std::string>>();

    m.standardizer.mean = doc.at("standardizer").at("mean").get<std::vector<double>>();
    m.standardizer.scale = doc.at("standardizer").at("scale").get<std::vector<double>>();

    m.params.arch = arch;
    const auto& weights = doc.at("weights");
    if (weights.size() != kLayerCount) throw DataError("model must have exactly four layers");
    for (std::size_t k = 0; k < kLayerCount; ++k) {
      auto& layer = m.params.layers[k];
      layer.fan_in = weights[k].at("fan_in").get<std::size_t>();
      layer.fan_out = weights[k].at("fan_out").get<std::size_t>();
      layer.weights = weights[k].at("weights").get<std::vector<double>>();
      layer.bias = weights[k].at("bias").get<std::vector<double>>();
    }

    const auto& h = doc.at("history");
    m.history.losses = h.at("losses").get<std::vector<double>>();
    m.history.stopped_epoch = h.at("stopped_epoch").get<std::size_t>();
    m.history.best_epoch = h.at("best_epoch").get<std::size_t>();
    m.history.stop_reason = parse_stop_reason(h.at("stop_reason").get<std::string>());

    const auto& md = doc.at("metadata");
    m.metadata.seed = md.at("seed").get<std::uint64_t>();
    m.metadata.created = md.value("created", std::string{});
    m.metadata.feature_count = md.at("feature_count").get<std::size_t>();
    m.metadata.std_convention = md.value("std_convention", std::string("population"));
    if (md.contains("split")) {
      m.metadata.split.test_fraction = md["split"].at("test_fraction").get<double>();
      m.metadata.split.seed = md["split"].at("seed").get<std::uint64_t>();
    }
    m.metadata.training_flow_ids =
        md.value("training_flow_ids", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model JSON: ") + e.what());
  }
  m.validate();
  return m;
}

void save_model(const std::filesystem::path& path, const ModelFile& model) {
  model.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path.string());
  out << model_json_text(model);
}

ModelFile load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file: " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_model_json(text.str());
}

std::string utc_timestamp() {
  std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
    now = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
  }
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace falconc

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "falconc/autoencoder.hpp"
#include "falconc/feature_pipeline.hpp"

namespace falconc {

struct ModelMetadata {
  std::uint64_t seed = 0;
  std::string created;  // ISO-8601 UTC, informational only
  std::size_t feature_count = 0;
  std::string std_convention = "population";
  SplitConfig split;
  std::vector<std::string> training_flow_ids;

  bool operator==(const ModelMetadata&) const = default;
};

// Everything needed to score new flows: the encoder, the standardizer and
// the trained network, plus how it was produced.
struct ModelFile {
  TrainConfig train_config;
  EncodingSpec encoding;
  StandardizerParams standardizer;
  AutoencoderParams params;
  TrainingHistory history;
  ModelMetadata metadata;

  // Checks that d agrees across architecture, encoding, standardizer and
  // metadata. Throws DataError.
  void validate() const;

  // Encodes and standardizes flows with this model's pipeline; refuses
  // input whose encoded width differs from the model's d.
  FeatureMatrix prepare(std::span<const LabeledFlow> flows) const;

  bool operator==(const ModelFile&) const = default;
};

std::string model_json_text(const ModelFile& model);
ModelFile parse_model_json(std::string_view text);
void save_model(const std::filesystem::path& path, const ModelFile& model);
ModelFile load_model(const std::filesystem::path& path);

// Current UTC time as ISO-8601, or SOURCE_DATE_EPOCH when set.
std::string utc_timestamp();

}  // namespace falconc

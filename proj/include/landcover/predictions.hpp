#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "landcover/dataset.hpp"

namespace landcover {

/// Per-tile classifier output. decisions[i] == (probabilities[i] >= threshold_used).
struct PredictionRecord {
  std::string record_id;
  std::vector<double> probabilities;
  std::vector<std::uint8_t> decisions;
  double threshold_used = 0.0;
  std::string model_name;

  bool operator==(const PredictionRecord&) const = default;
};

void to_json(nlohmann::json& j, const PredictionRecord& record);
void from_json(const nlohmann::json& j, PredictionRecord& record);

/// Prediction file set: records plus the vocabulary they index.
struct PredictionFile {
  LabelVocabulary vocab;
  std::vector<PredictionRecord> records;
};

/// Writes <out_dir>/predictions.csv (record_id, then p_<class> and d_<class>
/// per class) and <out_dir>/predictions.json (vocabulary + records).
void write_predictions(std::span<const PredictionRecord> records, const LabelVocabulary& vocab,
                       const std::filesystem::path& out_dir);

/// Reads the JSON written by write_predictions. Throws SchemaError when a
/// record's vectors disagree with the vocabulary.
PredictionFile read_predictions_json(const std::filesystem::path& path);

}  // namespace landcover

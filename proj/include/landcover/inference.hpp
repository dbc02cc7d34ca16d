#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "landcover/models.hpp"
#include "landcover/predictions.hpp"
#include "landcover/tiles.hpp"

namespace landcover {

/// Threshold used when neither the caller nor the manifest supplies one.
inline constexpr double kFallbackThreshold = 0.4;

struct SkippedTile {
  std::string record_id;
  std::string reason;
};

struct InferenceResult {
  std::string model_name;
  LabelVocabulary vocab;  // from the checkpoint manifest
  double threshold = kFallbackThreshold;
  std::vector<PredictionRecord> records;  // sorted by record_id
  std::vector<SkippedTile> skipped;
};

struct InferenceOptions {
  std::optional<double> threshold;  // overrides the manifest threshold
  int batch_size = 64;
};

/// Classifies every tile the ledger marks retrieved. Tiles are resized to
/// the checkpoint's input size; tiles that fail to decode are skipped and
/// reported rather than aborting the batch.
InferenceResult predict_tiles(LoadedModel& checkpoint, const std::filesystem::path& tile_cache,
                              const FetchLedger& ledger, const InferenceOptions& options = {});

/// Loads the checkpoint from `checkpoint_path` (.json or .pt) first.
InferenceResult predict_tiles(const std::filesystem::path& checkpoint_path, const std::filesystem::path& tile_cache,
                              const FetchLedger& ledger, const InferenceOptions& options = {});

}  // namespace landcover

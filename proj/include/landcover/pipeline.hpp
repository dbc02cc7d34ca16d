#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "landcover/dataset.hpp"
#include "landcover/evaluation.hpp"
#include "landcover/predictions.hpp"
#include "landcover/report.hpp"
#include "landcover/tiles.hpp"
#include "landcover/training.hpp"

namespace landcover {

inline constexpr std::string_view kToolVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitUsage = 2, kExitData = 3, kExitRuntime = 4 };

/// Maps an exception thrown by a pipeline stage onto the CLI exit codes.
int exit_code_for(const std::exception& error);

struct PipelinePaths {
  std::filesystem::path corpus_dir;
  std::filesystem::path labels;
  std::filesystem::path addresses;
  std::filesystem::path cache_dir = "cache";
  std::filesystem::path output_dir = "out";
};

/// Everything the subcommands read. Loaded from one JSON file whose
/// relative paths resolve against the file's directory.
struct PipelineConfig {
  PipelinePaths paths;

  ColumnMap address_columns;
  char address_delimiter = ',';
  ServiceConfig service;
  std::size_t parallelism = 4;
  double rate_limit = 10.0;

  double val_fraction = kDefaultValFraction;
  std::uint64_t split_seed = 1;

  std::vector<std::string> profiles{"tiny_cnn"};  // trained and evaluated
  TrainingConfig training;
  bool pretrained = true;
  AugmentationConfig augmentation;

  std::optional<double> eval_threshold;  // default: manifest threshold, else 0.5
  TableFormat table_format = TableFormat::Text;
  std::vector<double> sweep_grid = default_threshold_grid();

  std::string profile;                           // model used by calibrate/predict
  std::optional<std::filesystem::path> checkpoint;  // overrides <output>/models/<profile>_best.json
  std::optional<double> threshold;               // predict-time override
  bool render_charts = false;

  nlohmann::json snapshot;  // the merged JSON the fields came from
};

/// Reads the config file and applies "a.b=value" overrides (value parsed as
/// JSON when possible, else taken as a string). Throws ConfigError.
PipelineConfig load_pipeline_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// Same, from an in-memory document; `base_dir` anchors relative paths.
PipelineConfig pipeline_config_from_json(nlohmann::json doc, const std::filesystem::path& base_dir);

struct CorpusSummary {
  std::size_t n_images = 0;
  LabelVocabulary vocab;
  std::vector<std::size_t> counts;
  std::vector<std::string> missing_required;  // required class names absent from the vocabulary
};

CorpusSummary cmd_prepare_data(const PipelineConfig& config);
FetchLedger cmd_fetch(const PipelineConfig& config, MapService* service = nullptr);
std::vector<TrainingHistory> cmd_train(const PipelineConfig& config);

/// With `report_files` non-empty, renders those MetricsReport JSON files
/// instead of evaluating checkpoints.
std::vector<MetricsReport> cmd_evaluate(const PipelineConfig& config,
                                        const std::vector<std::filesystem::path>& report_files = {});
ThresholdSweepResult cmd_calibrate(const PipelineConfig& config);
std::vector<PredictionRecord> cmd_predict(const PipelineConfig& config);
AggregateDistribution cmd_report(const PipelineConfig& config);

/// Checkpoint manifest used by calibrate/predict.
std::filesystem::path selected_checkpoint(const PipelineConfig& config);

}  // namespace landcover

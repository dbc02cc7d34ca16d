#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "landcover/dataset.hpp"
#include "landcover/matrix.hpp"

namespace landcover {

/// Model scores against ground truth for N samples and L labels.
struct PredictionSet {
  ProbabilityMatrix probabilities;
  LabelMatrix truth;
  LabelVocabulary vocab;

  /// Throws ArgumentError if shapes disagree, N == 0, a probability lies
  /// outside [0, 1] or a truth entry is not 0/1.
  void validate() const;
};

/// entry = 1 iff probability >= threshold.
LabelMatrix binarize(const ProbabilityMatrix& probabilities, double threshold);

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;
  std::uint64_t exact_match_rows = 0;
  std::uint64_t rows = 0;
};

/// Pools decisions over all N x L entries.
ConfusionCounts count_decisions(const LabelMatrix& predicted, const LabelMatrix& truth);

/// Ratios in [0, 1] derived from pooled counts. Zero denominators give 0.
struct MicroScores {
  double subset_accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};
MicroScores micro_scores(const ConfusionCounts& counts);

/// Table-ready statistics, all in percent.
struct MetricsReport {
  std::string model_name;
  double threshold = 0.5;
  double accuracy_pct = 0.0;
  double precision_pct = 0.0;
  double recall_pct = 0.0;
  double f1_pct = 0.0;
  double roc_auc_pct = 0.0;
};

void to_json(nlohmann::json& j, const MetricsReport& report);
void from_json(const nlohmann::json& j, MetricsReport& report);

/// Subset accuracy plus micro precision/recall/F1 at `threshold`, and the
/// threshold-free macro ROC-AUC. When no label column admits an AUC the
/// ROC-AUC field is NaN.
MetricsReport compute_metrics(const PredictionSet& preds, double threshold, std::string model_name = {});

struct AucResult {
  double value = 0.5;                       // macro mean over valid labels
  std::vector<double> per_label;            // NaN where the label was skipped
  std::vector<std::size_t> skipped_labels;  // labels lacking a positive or a negative
};

/// One-vs-rest AUC per label (pairwise rank statistic, ties credited 0.5),
/// macro-averaged over labels that have both classes. Throws
/// UndefinedAucError when no label qualifies.
AucResult compute_roc_auc(const PredictionSet& preds);

/// Single-column AUC over scores and binary truth; NaN without both classes.
double binary_auc(std::span<const double> scores, std::span<const std::uint8_t> truth);

struct ThresholdSweepResult {
  std::vector<double> grid;
  std::vector<double> f1_at;  // percent
  double best_threshold = 0.0;
  double best_f1 = 0.0;
};

/// 0.05, 0.10, ..., 0.95.
std::vector<double> default_threshold_grid();

/// Micro-F1 at every grid point; ties go to the smallest threshold.
ThresholdSweepResult sweep_thresholds(const PredictionSet& preds, std::span<const double> grid);

void write_sweep_csv(const std::filesystem::path& out, const ThresholdSweepResult& sweep);

enum class TableFormat { Text, Csv, Latex };

TableFormat parse_table_format(std::string_view name);

/// Columns Model, Accuracy, Precision, Recall, F1, ROC-AUC with two decimals.
std::string render_comparison_table(std::span<const MetricsReport> reports, TableFormat format);

/// Reads back the CSV flavour of render_comparison_table.
std::vector<MetricsReport> parse_comparison_csv(std::string_view text);

}  // namespace landcover

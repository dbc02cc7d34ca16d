#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "landcover/dataset.hpp"
#include "landcover/predictions.hpp"

namespace landcover {

/// Detection counts over a set of prediction records and the two views
/// derived from them: per-image frequency and share of all detections.
struct AggregateDistribution {
  LabelVocabulary vocab;
  std::vector<std::size_t> per_class_count;
  std::size_t n_images = 0;
  std::size_t total_detections = 0;
  std::vector<double> frequency_pct;  // count / n_images * 100
  std::vector<double> share_pct;      // count / total_detections * 100
  bool shares_defined = false;        // false when no detection exists
};

/// Throws SchemaError if a record's decision vector does not match `vocab`.
AggregateDistribution aggregate(std::span<const PredictionRecord> records, const LabelVocabulary& vocab);

struct ChartFiles {
  std::filesystem::path share_csv;
  std::filesystem::path frequency_csv;
  std::vector<std::filesystem::path> rendered;
};

/// Writes share.csv and frequency.csv (descending by value, full precision)
/// into `out_dir`; with `render_charts` also share.svg (pie) and
/// frequency.svg (horizontal bars).
ChartFiles emit_chart_data(const AggregateDistribution& dist, const std::filesystem::path& out_dir,
                           bool render_charts = false);

/// Human-readable summary: shares to one decimal, frequencies to two.
std::string format_distribution(const AggregateDistribution& dist);

}  // namespace landcover

#include "landcover/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "landcover/csv.hpp"
#include "landcover/error.hpp"

namespace landcover {

void PredictionSet::validate() const {
  if (probabilities.rows() == 0) throw ArgumentError("prediction set: no samples");
  if (probabilities.rows() != truth.rows() || probabilities.cols() != truth.cols()) {
    throw ArgumentError("prediction set: probability and truth shapes differ");
  }
  if (!vocab.empty() && vocab.size() != probabilities.cols()) {
    throw ArgumentError("prediction set: vocabulary size does not match label width");
  }
  for (double p : probabilities.values()) {
    if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("prediction set: probability outside [0, 1]");
  }
  for (auto y : truth.values()) {
    if (y > 1) throw ArgumentError("prediction set: truth entry is not 0/1");
  }
}

LabelMatrix binarize(const ProbabilityMatrix& probabilities, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw ArgumentError("binarize: threshold must lie in [0, 1]");
  }
  LabelMatrix out(probabilities.rows(), probabilities.cols());
  auto src = probabilities.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] >= threshold ? 1 : 0;
  return out;
}

ConfusionCounts count_decisions(const LabelMatrix& predicted, const LabelMatrix& truth) {
  if (predicted.rows() != truth.rows() || predicted.cols() != truth.cols()) {
    throw ArgumentError("count_decisions: shape mismatch");
  }
  ConfusionCounts counts;
  counts.rows = predicted.rows();
  for (std::size_t r = 0; r < predicted.rows(); ++r) {
    bool exact = true;
    for (std::size_t c = 0; c < predicted.cols(); ++c) {
      bool p = predicted(r, c) != 0;
      bool t = truth(r, c) != 0;
      if (p && t) ++counts.tp;
      else if (p) ++counts.fp;
      else if (t) ++counts.fn;
      else ++counts.tn;
      exact = exact && (p == t);
    }
    if (exact) ++counts.exact_match_rows;
  }
  return counts;
}

MicroScores micro_scores(const ConfusionCounts& c) {
  auto ratio = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };
  MicroScores s;
  s.subset_accuracy = ratio(static_cast<double>(c.exact_match_rows), static_cast<double>(c.rows));
  s.precision = ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fp));
  s.recall = ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fn));
  // Harmonic mean of precision and recall in count form.
  s.f1 = ratio(2.0 * static_cast<double>(c.tp), static_cast<double>(2 * c.tp + c.fp + c.fn));
  return s;
}

void to_json(nlohmann::json& j, const MetricsReport& r) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  j = nlohmann::json{{"model_name", r.model_name},       {"threshold", r.threshold},
                     {"accuracy_pct", num(r.accuracy_pct)}, {"precision_pct", num(r.precision_pct)},
                     {"recall_pct", num(r.recall_pct)},   {"f1_pct", num(r.f1_pct)},
                     {"roc_auc_pct", num(r.roc_auc_pct)}};
}

void from_json(const nlohmann::json& j, MetricsReport& r) {
  auto num = [&](const char* key) {
    const auto& v = j.at(key);
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
  };
  r.model_name = j.at("model_name").get<std::string>();
  r.threshold = j.at("threshold").get<double>();
  r.accuracy_pct = num("accuracy_pct");
  r.precision_pct = num("precision_pct");
  r.recall_pct = num("recall_pct");
  r.f1_pct = num("f1_pct");
  r.roc_auc_pct = num("roc_auc_pct");
}

MetricsReport compute_metrics(const PredictionSet& preds, double threshold, std::string model_name) {
  preds.validate();
  auto scores = micro_scores(count_decisions(binarize(preds.probabilities, threshold), preds.truth));

  MetricsReport report;
  report.model_name = std::move(model_name);
  report.threshold = threshold;
  report.accuracy_pct = 100.0 * scores.subset_accuracy;
  report.precision_pct = 100.0 * scores.precision;
  report.recall_pct = 100.0 * scores.recall;
  report.f1_pct = 100.0 * scores.f1;
  try {
    report.roc_auc_pct = 100.0 * compute_roc_auc(preds).value;
  } catch (const UndefinedAucError&) {
    report.roc_auc_pct = std::numeric_limits<double>::quiet_NaN();
  }
  return report;
}

double binary_auc(std::span<const double> scores, std::span<const std::uint8_t> truth) {
  if (scores.size() != truth.size()) throw ArgumentError("binary_auc: size mismatch");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Mann-Whitney U with mid-ranks: each tied pair contributes one half.
  double positive_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1 .. j
    for (std::size_t k = i; k < j; ++k) {
      if (truth[order[k]]) {
        positive_rank_sum += mid_rank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::numeric_limits<double>::quiet_NaN();
  double np = static_cast<double>(n_pos);
  double u = positive_rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

AucResult compute_roc_auc(const PredictionSet& preds) {
  preds.validate();
  const std::size_t n = preds.probabilities.rows();
  const std::size_t labels = preds.probabilities.cols();

  AucResult result;
  result.per_label.assign(labels, std::numeric_limits<double>::quiet_NaN());
  std::vector<double> scores(n);
  std::vector<std::uint8_t> truth(n);
  double sum = 0.0;
  std::size_t valid = 0;
  for (std::size_t c = 0; c < labels; ++c) {
    for (std::size_t r = 0; r < n; ++r) {
      scores[r] = preds.probabilities(r, c);
      truth[r] = preds.truth(r, c);
    }
    double auc = binary_auc(scores, truth);
    if (std::isnan(auc)) {
      result.skipped_labels.push_back(c);
      continue;
    }
    result.per_label[c] = auc;
    sum += auc;
    ++valid;
  }
  if (valid == 0) throw UndefinedAucError("roc-auc: no label column has both positive and negative examples");
  result.value = sum / static_cast<double>(valid);
  return result;
}

std::vector<double> default_threshold_grid() {
  std::vector<double> grid;
  for (int k = 1; k <= 19; ++k) grid.push_back(k / 20.0);
  return grid;
}

ThresholdSweepResult sweep_thresholds(const PredictionSet& preds, std::span<const double> grid) {
  preds.validate();
  if (grid.empty()) throw ArgumentError("sweep_thresholds: empty grid");
  ThresholdSweepResult result;
  result.grid.assign(grid.begin(), grid.end());
  std::size_t best = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] >= 0.0 && grid[i] <= 1.0)) throw ArgumentError("sweep_thresholds: grid value outside [0, 1]");
    double f1 = 100.0 * micro_scores(count_decisions(binarize(preds.probabilities, grid[i]), preds.truth)).f1;
    result.f1_at.push_back(f1);
    bool better = f1 > result.f1_at[best] || (f1 == result.f1_at[best] && grid[i] < grid[best]);
    if (better) best = i;
  }
  result.best_threshold = grid[best];
  result.best_f1 = result.f1_at[best];
  return result;
}

void write_sweep_csv(const std::filesystem::path& out, const ThresholdSweepResult& sweep) {
  std::ofstream file(out);
  if (!file) throw LoadError("cannot write " + out.string());
  csv::write_row(file, {"threshold", "f1"});
  for (std::size_t i = 0; i < sweep.grid.size(); ++i) {
    csv::write_row(file, {csv::format_double(sweep.grid[i]), csv::format_double(sweep.f1_at[i])});
  }
}

TableFormat parse_table_format(std::string_view name) {
  if (name == "text") return TableFormat::Text;
  if (name == "csv") return TableFormat::Csv;
  if (name == "latex") return TableFormat::Latex;
  throw ArgumentError("unknown table format '" + std::string(name) + "' (text, csv, latex)");
}

namespace {

std::string fixed2(double v) {
  if (std::isnan(v)) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::vector<std::string> row_cells(const MetricsReport& r) {
  return {r.model_name,     fixed2(r.accuracy_pct), fixed2(r.precision_pct),
          fixed2(r.recall_pct), fixed2(r.f1_pct),   fixed2(r.roc_auc_pct)};
}

const std::vector<std::string> kColumns{"Model", "Accuracy", "Precision", "Recall", "F1", "ROC-AUC"};

}  // namespace

std::string render_comparison_table(std::span<const MetricsReport> reports, TableFormat format) {
  std::ostringstream out;
  switch (format) {
    case TableFormat::Csv: {
      csv::write_row(out, kColumns);
      for (const auto& r : reports) csv::write_row(out, row_cells(r));
      break;
    }
    case TableFormat::Text: {
      std::vector<std::vector<std::string>> rows{kColumns};
      for (const auto& r : reports) rows.push_back(row_cells(r));
      std::vector<std::size_t> width(kColumns.size(), 0);
      for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
      }
      for (const auto& row : rows) {
        std::string line;
        for (std::size_t c = 0; c < row.size(); ++c) {
          if (c > 0) line += ' ';
          // Model column left-aligned, numbers right-aligned.
          std::string pad(width[c] - row[c].size(), ' ');
          line += c == 0 ? row[c] + pad : pad + row[c];
        }
        while (!line.empty() && line.back() == ' ') line.pop_back();
        out << line << '\n';
      }
      break;
    }
    case TableFormat::Latex: {
      out << "\\begin{tabular}{|c||c|c|c|c|c|}\n\\hline\n";
      out << "Model & Accuracy & Precision & Recall & F1 & ROC-AUC\\\\\n\\hline\\hline\n";
      for (const auto& r : reports) {
        auto cells = row_cells(r);
        for (std::size_t c = 0; c < cells.size(); ++c) out << (c ? " & " : "") << cells[c];
        out << " \\\\\n";
      }
      out << "\\hline\n\\end{tabular}\n";
      break;
    }
  }
  return out.str();
}

std::vector<MetricsReport> parse_comparison_csv(std::string_view text) {
  auto table = csv::parse(text);
  if (table.header != kColumns) throw SchemaError("comparison table: unexpected header");
  auto value = [](const std::string& cell) {
    return cell == "n/a" ? std::numeric_limits<double>::quiet_NaN() : csv::parse_double(cell);
  };
  std::vector<MetricsReport> out;
  for (const auto& row : table.rows) {
    if (row.size() != kColumns.size()) throw SchemaError("comparison table: short row");
    MetricsReport r;
    r.model_name = row[0];
    r.accuracy_pct = value(row[1]);
    r.precision_pct = value(row[2]);
    r.recall_pct = value(row[3]);
    r.f1_pct = value(row[4]);
    r.roc_auc_pct = value(row[5]);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace landcover

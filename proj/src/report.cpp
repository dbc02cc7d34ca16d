#include "landcover/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "landcover/csv.hpp"
#include "landcover/error.hpp"

namespace landcover {

namespace fs = std::filesystem;

AggregateDistribution aggregate(std::span<const PredictionRecord> records, const LabelVocabulary& vocab) {
  AggregateDistribution dist;
  dist.vocab = vocab;
  dist.per_class_count.assign(vocab.size(), 0);
  for (const auto& record : records) {
    if (record.decisions.size() != vocab.size()) {
      throw SchemaError("aggregate: record '" + record.record_id + "' has " +
                        std::to_string(record.decisions.size()) + " decisions, vocabulary has " +
                        std::to_string(vocab.size()));
    }
    for (std::size_t c = 0; c < vocab.size(); ++c) dist.per_class_count[c] += record.decisions[c] ? 1 : 0;
  }
  dist.n_images = records.size();
  dist.total_detections = std::accumulate(dist.per_class_count.begin(), dist.per_class_count.end(), std::size_t{0});
  dist.shares_defined = dist.total_detections > 0;

  dist.frequency_pct.assign(vocab.size(), 0.0);
  dist.share_pct.assign(vocab.size(), 0.0);
  for (std::size_t c = 0; c < vocab.size(); ++c) {
    auto count = static_cast<double>(dist.per_class_count[c]);
    if (dist.n_images > 0) dist.frequency_pct[c] = 100.0 * count / static_cast<double>(dist.n_images);
    if (dist.shares_defined) dist.share_pct[c] = 100.0 * count / static_cast<double>(dist.total_detections);
  }
  return dist;
}

namespace {

// Class indices ordered by descending value; equal values keep vocabulary order.
std::vector<std::size_t> descending(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  return order;
}

void write_view(const fs::path& path, const char* column, const LabelVocabulary& vocab,
                const std::vector<double>& values) {
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write " + path.string());
  csv::write_row(out, {"class", column});
  for (std::size_t c : descending(values)) csv::write_row(out, {vocab.name(c), csv::format_double(values[c])});
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

const char* kPalette[] = {"#2e7d32", "#9e9e9e", "#8bc34a", "#795548", "#f44336", "#3f51b5",
                          "#03a9f4", "#ffc107", "#009688", "#e91e63", "#673ab7", "#ff9800",
                          "#607d8b", "#cddc39", "#00bcd4", "#9c27b0", "#4caf50"};

void render_pie(const fs::path& path, const AggregateDistribution& dist) {
  std::ofstream svg(path);
  if (!svg) throw LoadError("cannot write " + path.string());
  const double cx = 200, cy = 200, radius = 160;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\">\n";
  double angle = -M_PI / 2;
  double legend_y = 30;
  std::size_t colour = 0;
  for (std::size_t c : descending(dist.share_pct)) {
    double share = dist.share_pct[c];
    if (share <= 0.0) continue;
    const char* fill = kPalette[colour++ % std::size(kPalette)];
    double sweep = 2 * M_PI * share / 100.0;
    if (share >= 100.0) {
      svg << "<circle cx=\"" << cx << "\" cy=\"" << cy << "\" r=\"" << radius << "\" fill=\"" << fill << "\"/>\n";
    } else {
      double x0 = cx + radius * std::cos(angle), y0 = cy + radius * std::sin(angle);
      double x1 = cx + radius * std::cos(angle + sweep), y1 = cy + radius * std::sin(angle + sweep);
      svg << "<path d=\"M" << cx << ',' << cy << " L" << x0 << ',' << y0 << " A" << radius << ',' << radius
          << " 0 " << (sweep > M_PI ? 1 : 0) << " 1 " << x1 << ',' << y1 << " Z\" fill=\"" << fill << "\"/>\n";
    }
    angle += sweep;
    svg << "<rect x=\"400\" y=\"" << legend_y - 10 << "\" width=\"12\" height=\"12\" fill=\"" << fill << "\"/>"
        << "<text x=\"418\" y=\"" << legend_y << "\" font-size=\"12\">" << dist.vocab.name(c) << ' '
        << fmt("%.1f", share) << "%</text>\n";
    legend_y += 18;
  }
  svg << "</svg>\n";
}

void render_bars(const fs::path& path, const AggregateDistribution& dist) {
  std::ofstream svg(path);
  if (!svg) throw LoadError("cannot write " + path.string());
  const double left = 110, bar_h = 18, gap = 6, width = 480;
  auto order = descending(dist.frequency_pct);
  double height = 20 + static_cast<double>(order.size()) * (bar_h + gap);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"680\" height=\"" << height << "\">\n";
  double y = 10;
  for (std::size_t c : order) {
    double w = width * dist.frequency_pct[c] / 100.0;
    svg << "<text x=\"" << left - 6 << "\" y=\"" << y + 13 << "\" font-size=\"12\" text-anchor=\"end\">"
        << dist.vocab.name(c) << "</text>"
        << "<rect x=\"" << left << "\" y=\"" << y << "\" width=\"" << w << "\" height=\"" << bar_h
        << "\" fill=\"#4a78b0\"/>"
        << "<text x=\"" << left + w + 4 << "\" y=\"" << y + 13 << "\" font-size=\"11\">"
        << fmt("%.2f", dist.frequency_pct[c]) << "%</text>\n";
    y += bar_h + gap;
  }
  svg << "</svg>\n";
}

}  // namespace

ChartFiles emit_chart_data(const AggregateDistribution& dist, const fs::path& out_dir, bool render_charts) {
  fs::create_directories(out_dir);
  ChartFiles files{out_dir / "share.csv", out_dir / "frequency.csv", {}};
  write_view(files.share_csv, "share_pct", dist.vocab, dist.share_pct);
  write_view(files.frequency_csv, "frequency_pct", dist.vocab, dist.frequency_pct);
  if (render_charts) {
    files.rendered.push_back(out_dir / "share.svg");
    render_pie(files.rendered.back(), dist);
    files.rendered.push_back(out_dir / "frequency.svg");
    render_bars(files.rendered.back(), dist);
  }
  return files;
}

std::string format_distribution(const AggregateDistribution& dist) {
  std::ostringstream out;
  out << "images: " << dist.n_images << ", detections: " << dist.total_detections << '\n';
  for (std::size_t c : descending(dist.frequency_pct)) {
    out << "  " << dist.vocab.name(c) << ": " << fmt("%.2f", dist.frequency_pct[c]) << "% of images";
    if (dist.shares_defined) out << ", " << fmt("%.1f", dist.share_pct[c]) << "% of detections";
    out << '\n';
  }
  return out.str();
}

}  // namespace landcover

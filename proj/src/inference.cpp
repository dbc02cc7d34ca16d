#include "landcover/inference.hpp"

#include <algorithm>
#include <iostream>

#include "landcover/error.hpp"
#include "landcover/evaluation.hpp"
#include "landcover/training.hpp"

namespace landcover {

namespace fs = std::filesystem;

InferenceResult predict_tiles(LoadedModel& checkpoint, const fs::path& tile_cache, const FetchLedger& ledger,
                              const InferenceOptions& options) {
  const auto& manifest = checkpoint.manifest;
  double threshold = options.threshold.value_or(manifest.threshold.value_or(kFallbackThreshold));
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ArgumentError("predict_tiles: threshold must lie in [0, 1]");
  if (options.batch_size < 1) throw ArgumentError("predict_tiles: batch_size must be >= 1");

  InferenceResult result;
  result.model_name = manifest.model_name;
  result.vocab = LabelVocabulary(manifest.classes);
  result.threshold = threshold;

  std::vector<const FetchResult*> retrieved;
  for (const auto& r : ledger.results) {
    if (r.status == FetchStatus::Retrieved && r.tile_path) retrieved.push_back(&r);
  }
  std::sort(retrieved.begin(), retrieved.end(),
            [](const FetchResult* a, const FetchResult* b) { return a->record_id < b->record_id; });

  const int input_size = effective_input_size(checkpoint.model.profile, manifest.input_size);
  std::vector<cv::Mat> images;
  std::vector<std::string> ids;
  auto flush = [&] {
    if (images.empty()) return;
    auto probs = to_probability_matrix(predict_probabilities(checkpoint.model, images_to_batch(images)));
    auto decisions = binarize(probs, threshold);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      auto p = probs.row(i);
      auto d = decisions.row(i);
      result.records.push_back({ids[i], {p.begin(), p.end()}, {d.begin(), d.end()}, threshold, manifest.model_name});
    }
    images.clear();
    ids.clear();
  };

  for (const FetchResult* r : retrieved) {
    fs::path path = fs::path(*r->tile_path).is_absolute() ? fs::path(*r->tile_path) : tile_cache / *r->tile_path;
    cv::Mat pixels;
    try {
      pixels = read_rgb(path);
    } catch (const LoadError&) {
      std::cerr << "warning: skipping " << r->record_id << ": tile " << path.string() << " does not decode\n";
      result.skipped.push_back({r->record_id, "tile does not decode: " + path.string()});
      continue;
    }
    images.push_back(resize_image(pixels, input_size));
    ids.push_back(r->record_id);
    if (images.size() == static_cast<std::size_t>(options.batch_size)) flush();
  }
  flush();
  return result;
}

InferenceResult predict_tiles(const fs::path& checkpoint_path, const fs::path& tile_cache, const FetchLedger& ledger,
                              const InferenceOptions& options) {
  auto checkpoint = load_checkpoint(checkpoint_path);
  return predict_tiles(checkpoint, tile_cache, ledger, options);
}

}  // namespace landcover

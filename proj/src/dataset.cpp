#include "landcover/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <unordered_set>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "landcover/csv.hpp"
#include "landcover/error.hpp"

namespace landcover {

namespace fs = std::filesystem;

LabelVocabulary::LabelVocabulary(std::vector<std::string> classes) : classes_(std::move(classes)) {
  std::unordered_set<std::string_view> seen;
  for (const auto& name : classes_) {
    if (name.empty()) throw SchemaError("label vocabulary: empty class name");
    if (!seen.insert(name).second) {
      throw SchemaError("label vocabulary: duplicate class name '" + name + "'");
    }
  }
}

std::optional<std::size_t> LabelVocabulary::index_of(std::string_view name) const {
  auto it = std::find(classes_.begin(), classes_.end(), name);
  if (it == classes_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - classes_.begin());
}

std::span<const std::string_view> required_land_cover_classes() {
  static constexpr std::array<std::string_view, 9> kClasses{
      "trees", "grass", "bare-soil", "pavement", "buildings", "cars", "water", "sand", "sea"};
  return kClasses;
}

// ---------------------------------------------------------------------------
// Image I/O

cv::Mat read_rgb(const fs::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw LoadError("cannot decode image " + path.string());
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  return rgb;
}

cv::Mat decode_rgb(std::span<const unsigned char> bytes) {
  if (bytes.empty()) return {};
  cv::Mat raw(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<unsigned char*>(bytes.data()));
  cv::Mat bgr;
  try {
    bgr = cv::imdecode(raw, cv::IMREAD_COLOR);
  } catch (const cv::Exception&) {
    return {};
  }
  if (bgr.empty()) return {};
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  return rgb;
}

void write_rgb(const fs::path& path, const cv::Mat& pixels) {
  if (pixels.type() != CV_8UC3) throw ArgumentError("write_rgb: expected 8-bit 3-channel pixels");
  cv::Mat bgr;
  cv::cvtColor(pixels, bgr, cv::COLOR_RGB2BGR);
  if (!cv::imwrite(path.string(), bgr)) throw LoadError("cannot write image " + path.string());
}

// ---------------------------------------------------------------------------
// Corpus loading

namespace {

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

bool is_image_extension(std::string ext) {
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  static const std::set<std::string> kExt{".tif", ".tiff", ".png", ".jpg", ".jpeg", ".bmp", ".ppm"};
  return kExt.contains(ext);
}

// stem -> path for every image below `dir`. Stems seen twice map to an empty
// path so a lookup can report the ambiguity.
std::map<std::string, fs::path> index_images(const fs::path& dir) {
  std::map<std::string, fs::path> index;
  if (!fs::is_directory(dir)) throw LoadError("image directory not found: " + dir.string());
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file() || !is_image_extension(entry.path().extension().string())) continue;
    auto [it, inserted] = index.emplace(entry.path().stem().string(), entry.path());
    if (!inserted) it->second.clear();
  }
  return index;
}

}  // namespace

LabelTable load_label_table(const fs::path& label_file) {
  if (!fs::exists(label_file)) throw LoadError("label file not found: " + label_file.string());
  std::string text = csv::read_text(label_file);
  csv::Table table = csv::parse(text, csv::sniff_delimiter(text));
  if (table.header.size() < 2) {
    throw SchemaError("label file " + label_file.string() + ": header needs an id column and at least one class");
  }

  std::vector<std::string> classes;
  for (std::size_t i = 1; i < table.header.size(); ++i) classes.push_back(trim(table.header[i]));
  LabelTable out{LabelVocabulary(std::move(classes)), {}};
  const std::size_t n_classes = out.vocab.size();

  std::unordered_set<std::string> ids;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string id = row.empty() ? std::string{} : trim(row[0]);
    const std::string where = "label file row " + std::to_string(r + 2) + " ('" + id + "')";
    if (row.size() != n_classes + 1) {
      throw SchemaError(where + ": expected " + std::to_string(n_classes) + " labels, found " +
                        std::to_string(row.empty() ? 0 : row.size() - 1));
    }
    if (id.empty()) throw SchemaError(where + ": empty image id");
    if (!ids.insert(id).second) throw SchemaError(where + ": duplicate image id");

    std::vector<std::uint8_t> labels(n_classes);
    for (std::size_t c = 0; c < n_classes; ++c) {
      std::string cell = trim(row[c + 1]);
      if (cell == "1") {
        labels[c] = 1;
      } else if (cell == "0") {
        labels[c] = 0;
      } else {
        throw SchemaError(where + ": label '" + cell + "' for class '" + out.vocab.name(c) + "' is not 0 or 1");
      }
    }
    out.rows.emplace_back(id, std::move(labels));
  }
  return out;
}

Corpus load_corpus(const fs::path& image_dir, const fs::path& label_file) {
  LabelTable table = load_label_table(label_file);
  auto index = index_images(image_dir);

  Corpus corpus{std::move(table.vocab), {}};
  corpus.images.reserve(table.rows.size());
  for (auto& [id, labels] : table.rows) {
    fs::path path = image_dir / id;
    if (!fs::is_regular_file(path)) {
      auto it = index.find(id);
      if (it == index.end()) throw LoadError("image for id '" + id + "' not found under " + image_dir.string());
      if (it->second.empty()) throw LoadError("image id '" + id + "' matches several files under " + image_dir.string());
      path = it->second;
    }
    cv::Mat pixels;
    try {
      pixels = read_rgb(path);
    } catch (const LoadError&) {
      throw LoadError("image for id '" + id + "' does not decode: " + path.string());
    }
    if (pixels.rows != pixels.cols) pixels = resize_image(pixels, std::max(pixels.rows, pixels.cols));
    corpus.images.push_back({std::move(id), std::move(pixels), std::move(labels)});
  }
  std::sort(corpus.images.begin(), corpus.images.end(),
            [](const LabeledImage& a, const LabeledImage& b) { return a.image_id < b.image_id; });
  return corpus;
}

// ---------------------------------------------------------------------------
// Splitting

DatasetSplit split_corpus(std::size_t corpus_size, double val_fraction, std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw ArgumentError("split_corpus: val_fraction must lie in (0, 1), got " + std::to_string(val_fraction));
  }
  if (corpus_size == 0) throw ArgumentError("split_corpus: corpus is empty");

  std::vector<std::size_t> order(corpus_size);
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Fisher-Yates with explicit index draws so the permutation does not
  // depend on the standard library's shuffle implementation.
  std::mt19937_64 rng(seed);
  for (std::size_t i = corpus_size - 1; i > 0; --i) {
    std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(order[i], order[j]);
  }

  auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(corpus_size)));
  DatasetSplit split;
  split.seed = seed;
  split.val_fraction = val_fraction;
  split.val.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  split.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.train.begin(), split.train.end());
  return split;
}

// ---------------------------------------------------------------------------
// Augmentation

std::string_view transform_tag(Transform t) {
  switch (t) {
    case Transform::Identity: return "id";
    case Transform::HorizontalFlip: return "hflip";
    case Transform::VerticalFlip: return "vflip";
    case Transform::Rotate90: return "rot90";
    case Transform::Rotate180: return "rot180";
    case Transform::Rotate270: return "rot270";
  }
  return "?";
}

std::vector<Transform> AugmentationConfig::transforms() const {
  std::vector<Transform> out{Transform::Identity};
  if (horizontal_flip) out.push_back(Transform::HorizontalFlip);
  if (vertical_flip) out.push_back(Transform::VerticalFlip);
  for (int angle : rotations) {
    switch (angle) {
      case 0: break;
      case 90: out.push_back(Transform::Rotate90); break;
      case 180: out.push_back(Transform::Rotate180); break;
      case 270: out.push_back(Transform::Rotate270); break;
      default: throw ArgumentError("augmentation: unsupported rotation " + std::to_string(angle));
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Transform AugmentationConfig::sample(std::mt19937_64& rng) const {
  auto options = transforms();
  return options[static_cast<std::size_t>(rng() % options.size())];
}

cv::Mat apply_transform(const cv::Mat& pixels, Transform transform) {
  bool quarter_turn = transform == Transform::Rotate90 || transform == Transform::Rotate270;
  if (quarter_turn && pixels.rows != pixels.cols) {
    throw ArgumentError("augment: 90/270 degree rotation needs a square image, got " +
                        std::to_string(pixels.rows) + "x" + std::to_string(pixels.cols));
  }
  cv::Mat out;
  switch (transform) {
    case Transform::Identity: out = pixels.clone(); break;
    case Transform::HorizontalFlip: cv::flip(pixels, out, 1); break;
    case Transform::VerticalFlip: cv::flip(pixels, out, 0); break;
    case Transform::Rotate90: cv::rotate(pixels, out, cv::ROTATE_90_COUNTERCLOCKWISE); break;
    case Transform::Rotate180: cv::rotate(pixels, out, cv::ROTATE_180); break;
    case Transform::Rotate270: cv::rotate(pixels, out, cv::ROTATE_90_CLOCKWISE); break;
  }
  return out;
}

LabeledImage augment(const LabeledImage& image, Transform transform) {
  LabeledImage out;
  out.pixels = apply_transform(image.pixels, transform);
  out.labels = image.labels;
  out.image_id = image.image_id;
  if (transform != Transform::Identity) {
    out.image_id += '#';
    out.image_id += transform_tag(transform);
  }
  return out;
}

cv::Mat resize_image(const cv::Mat& pixels, int target) {
  if (target <= 0) throw ArgumentError("resize_image: target must be positive, got " + std::to_string(target));
  if (pixels.empty()) throw ArgumentError("resize_image: empty input");
  if (pixels.rows == target && pixels.cols == target) return pixels.clone();
  cv::Mat out;
  cv::resize(pixels, out, cv::Size(target, target), 0.0, 0.0, cv::INTER_LINEAR);
  return out;
}

// ---------------------------------------------------------------------------
// Distribution

std::vector<std::size_t> class_distribution(std::span<const LabeledImage> corpus, const LabelVocabulary& vocab) {
  std::vector<std::size_t> counts(vocab.size(), 0);
  for (const auto& image : corpus) {
    if (image.labels.size() != vocab.size()) {
      throw SchemaError("class_distribution: image '" + image.image_id + "' has " +
                        std::to_string(image.labels.size()) + " labels, vocabulary has " +
                        std::to_string(vocab.size()));
    }
    for (std::size_t c = 0; c < counts.size(); ++c) counts[c] += image.labels[c] ? 1 : 0;
  }
  return counts;
}

void write_class_distribution_csv(const fs::path& out, const LabelVocabulary& vocab,
                                  std::span<const std::size_t> counts, std::size_t n_images) {
  std::ofstream file(out);
  if (!file) throw LoadError("cannot write " + out.string());
  csv::write_row(file, {"class", "count", "percent_of_images"});
  for (std::size_t c = 0; c < vocab.size(); ++c) {
    double pct = n_images == 0 ? 0.0 : 100.0 * static_cast<double>(counts[c]) / static_cast<double>(n_images);
    csv::write_row(file, {vocab.name(c), std::to_string(counts[c]), csv::format_double(pct)});
  }
}

}  // namespace landcover

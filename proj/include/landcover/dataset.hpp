#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <opencv2/core.hpp>

namespace landcover {

/// Ordered set of land-cover class names. Position i in the vocabulary is
/// position i in every label and probability vector.
class LabelVocabulary {
public:
  LabelVocabulary() = default;
  /// Throws SchemaError on empty or duplicate names.
  explicit LabelVocabulary(std::vector<std::string> classes);

  std::size_t size() const { return classes_.size(); }
  bool empty() const { return classes_.empty(); }
  const std::vector<std::string>& classes() const { return classes_; }
  const std::string& name(std::size_t index) const { return classes_.at(index); }

  std::optional<std::size_t> index_of(std::string_view name) const;
  bool contains(std::string_view name) const { return index_of(name).has_value(); }

  bool operator==(const LabelVocabulary&) const = default;

private:
  std::vector<std::string> classes_;
};

/// Class names the multi-label UC Merced annotation must provide.
std::span<const std::string_view> required_land_cover_classes();

/// An image with its binary label vector. Pixels are 8-bit RGB (CV_8UC3).
struct LabeledImage {
  std::string image_id;
  cv::Mat pixels;
  std::vector<std::uint8_t> labels;
};

struct Corpus {
  LabelVocabulary vocab;
  std::vector<LabeledImage> images;  // sorted by image_id
};

/// Loads the label CSV (header: id column, then one column per class) and
/// decodes each referenced image found anywhere under `image_dir` by file
/// stem. Comma or tab delimiters are accepted. Non-square images are
/// bilinearly resized to their longer side so every corpus image is square.
Corpus load_corpus(const std::filesystem::path& image_dir, const std::filesystem::path& label_file);

/// Parses only the label file. Returns the vocabulary and (id, labels) rows.
struct LabelTable {
  LabelVocabulary vocab;
  std::vector<std::pair<std::string, std::vector<std::uint8_t>>> rows;
};
LabelTable load_label_table(const std::filesystem::path& label_file);

/// Indices into the corpus the split was taken from.
struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::uint64_t seed = 0;
  double val_fraction = 0.2;
};

inline constexpr double kDefaultValFraction = 0.2;

/// Seeded shuffle of [0, corpus_size); the first round(val_fraction * N)
/// shuffled indices form the validation set. Both index lists are returned
/// sorted.
DatasetSplit split_corpus(std::size_t corpus_size, double val_fraction, std::uint64_t seed);

enum class Transform { Identity, HorizontalFlip, VerticalFlip, Rotate90, Rotate180, Rotate270 };

std::string_view transform_tag(Transform t);

struct AugmentationConfig {
  bool horizontal_flip = true;
  bool vertical_flip = true;
  std::vector<int> rotations{0, 90, 180, 270};  // degrees, counter-clockwise

  /// Every transform this configuration may draw, identity first.
  /// Throws ArgumentError for angles outside {0, 90, 180, 270}.
  std::vector<Transform> transforms() const;

  /// Uniform draw over transforms().
  Transform sample(std::mt19937_64& rng) const;
};

/// Applies a flip or rotation to the pixels; labels are copied unchanged and
/// the id gains a "#<tag>" suffix (identity leaves the id alone).
LabeledImage augment(const LabeledImage& image, Transform transform);

/// Pixel-level transform without the label bookkeeping.
cv::Mat apply_transform(const cv::Mat& pixels, Transform transform);

/// Bilinear resize to target x target. Same-size input is returned as an
/// exact copy.
cv::Mat resize_image(const cv::Mat& pixels, int target);

/// Number of images carrying each label, in vocabulary order.
std::vector<std::size_t> class_distribution(std::span<const LabeledImage> corpus,
                                            const LabelVocabulary& vocab);

/// Writes "class,count,percent_of_images" rows for the corpus distribution.
void write_class_distribution_csv(const std::filesystem::path& out, const LabelVocabulary& vocab,
                                  std::span<const std::size_t> counts, std::size_t n_images);

/// Decodes an image file as 8-bit RGB. Throws LoadError.
cv::Mat read_rgb(const std::filesystem::path& path);
/// Decodes an in-memory encoded image as 8-bit RGB; empty Mat on failure.
cv::Mat decode_rgb(std::span<const unsigned char> bytes);
/// Writes 8-bit RGB pixels in the format implied by the extension.
void write_rgb(const std::filesystem::path& path, const cv::Mat& pixels);

}  // namespace landcover

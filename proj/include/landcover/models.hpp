#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>
#include <opencv2/core.hpp>
#include <torch/torch.h>

#include "landcover/dataset.hpp"
#include "landcover/matrix.hpp"

namespace landcover {

enum class Backbone { ResNet50, InceptionV3, MobileNetV3, DenseNet201, WideResNet50, TinyCnn };

struct BackboneProfile {
  Backbone id;
  std::string name;
  int min_input_size;      // smallest accepted square side, in pixels
  int default_input_size;  // side used for training when not overridden
  bool pretrained_available;
};

/// The five transfer-learning backbones plus tiny_cnn, a small network for
/// tests and desk-scale runs.
const std::vector<BackboneProfile>& list_profiles();

/// Throws ArgumentError for an unknown name.
const BackboneProfile& profile_by_name(std::string_view name);

/// Backbone feature extractor followed by one fully connected layer to
/// `num_labels` units and an element-wise sigmoid.
class MultiLabelNetImpl : public torch::nn::Module {
public:
  MultiLabelNetImpl(torch::nn::AnyModule backbone, std::int64_t feature_dim, std::int64_t num_labels);

  /// Raw head outputs for a normalized NCHW float batch.
  torch::Tensor logits(const torch::Tensor& x);
  /// Per-class probabilities in [0, 1].
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Module& backbone() { return *backbone_.ptr(); }
  torch::nn::Linear& head() { return head_; }
  const torch::nn::Linear& head() const { return head_; }

private:
  torch::nn::AnyModule backbone_;
  torch::nn::Linear head_{nullptr};
};
TORCH_MODULE(MultiLabelNet);

struct ModelHandle {
  BackboneProfile profile;
  std::int64_t num_labels = 0;
  std::uint64_t seed = 0;
  bool pretrained_loaded = false;
  MultiLabelNet net{nullptr};

  std::int64_t parameter_count() const;
  std::int64_t trainable_parameter_count() const;
  std::int64_t head_width() const;
};

struct BuildOptions {
  std::uint64_t seed = 0;
  /// Directory holding <profile>.pt backbone weights saved with torch::save.
  /// Falls back to $LANDCOVER_WEIGHTS_DIR when unset.
  std::optional<std::filesystem::path> weights_dir;
};

/// Builds a model with a `num_labels`-wide sigmoid head. With `pretrained`
/// the backbone weights are read from the weights directory when a file for
/// the profile exists; otherwise the seeded random initialization stays and
/// pretrained_loaded is false. Throws ArgumentError when num_labels < 1 or
/// pretrained weights are requested for a profile that has none.
ModelHandle build_model(const BackboneProfile& profile, std::int64_t num_labels, bool pretrained,
                        const BuildOptions& options = {});

/// Excludes (or re-includes) backbone parameters from gradient updates.
void set_backbone_frozen(ModelHandle& model, bool frozen);

/// Stacks equally sized RGB images into a B x S x S x 3 uint8 tensor.
torch::Tensor images_to_batch(std::span<const cv::Mat> images);

/// Converts a B x S x S x 3 batch (uint8 0..255 or float 0..1) to the
/// normalized NCHW float layout the networks consume.
torch::Tensor prepare_input(const torch::Tensor& batch_nhwc);

/// Throws InputSizeError unless `batch_nhwc` is B x S x S x 3 with
/// S >= profile.min_input_size.
void check_input_size(const BackboneProfile& profile, const torch::Tensor& batch_nhwc);

/// Evaluation-mode forward pass without gradient tracking. Returns B x L
/// float probabilities.
torch::Tensor predict_probabilities(ModelHandle& model, const torch::Tensor& batch_nhwc);

ProbabilityMatrix to_probability_matrix(const torch::Tensor& probabilities);

/// Sidecar JSON describing a saved checkpoint.
struct ModelManifest {
  std::string model_name;
  std::string profile;
  std::int64_t num_labels = 0;
  std::vector<std::string> classes;
  std::uint64_t seed = 0;
  int input_size = 0;
  double val_fraction = kDefaultValFraction;
  std::uint64_t split_seed = 0;
  bool pretrained_loaded = false;
  std::optional<double> threshold;
  std::string weights_file;  // file name next to the manifest
};

void to_json(nlohmann::json& j, const ModelManifest& m);
void from_json(const nlohmann::json& j, ModelManifest& m);

/// Writes <stem>.pt (weights) and <stem>.json (manifest). Returns the
/// manifest path.
std::filesystem::path save_checkpoint(ModelHandle& model, ModelManifest manifest, const std::filesystem::path& stem);

ModelManifest read_manifest(const std::filesystem::path& manifest_path);
void write_manifest(const ModelManifest& manifest, const std::filesystem::path& manifest_path);

struct LoadedModel {
  ModelHandle model;
  ModelManifest manifest;
};

/// Accepts either the manifest (.json) or the weights (.pt) path. Throws
/// LoadError when files are missing and SchemaError when the manifest and
/// weights disagree.
LoadedModel load_checkpoint(const std::filesystem::path& path);

/// Manifest path belonging to a checkpoint path given as .json or .pt.
std::filesystem::path manifest_path_for(const std::filesystem::path& path);

}  // namespace landcover

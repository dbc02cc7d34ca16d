#include "landcover/models.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "backbones.hpp"
#include "landcover/csv.hpp"
#include "landcover/error.hpp"

namespace landcover {

namespace fs = std::filesystem;

const std::vector<BackboneProfile>& list_profiles() {
  static const std::vector<BackboneProfile> kProfiles{
      {Backbone::ResNet50, "resnet50", 224, 256, true},
      {Backbone::InceptionV3, "inception_v3", 299, 299, true},
      {Backbone::MobileNetV3, "mobilenet_v3", 224, 256, true},
      {Backbone::DenseNet201, "densenet201", 224, 256, true},
      {Backbone::WideResNet50, "wide_resnet50", 224, 256, true},
      {Backbone::TinyCnn, "tiny_cnn", 32, 64, false},
  };
  return kProfiles;
}

const BackboneProfile& profile_by_name(std::string_view name) {
  for (const auto& p : list_profiles()) {
    if (p.name == name) return p;
  }
  std::string known;
  for (const auto& p : list_profiles()) known += (known.empty() ? "" : ", ") + p.name;
  throw ArgumentError("unknown backbone profile '" + std::string(name) + "' (known: " + known + ")");
}

// ---------------------------------------------------------------------------

MultiLabelNetImpl::MultiLabelNetImpl(torch::nn::AnyModule backbone, std::int64_t feature_dim, std::int64_t num_labels)
    : backbone_(std::move(backbone)) {
  register_module("backbone", backbone_.ptr());
  head_ = register_module("head", torch::nn::Linear(feature_dim, num_labels));
}

torch::Tensor MultiLabelNetImpl::logits(const torch::Tensor& x) {
  return head_(backbone_.forward(x));
}

torch::Tensor MultiLabelNetImpl::forward(const torch::Tensor& x) { return torch::sigmoid(logits(x)); }

std::int64_t ModelHandle::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& p : net->parameters()) n += p.numel();
  return n;
}

std::int64_t ModelHandle::trainable_parameter_count() const {
  std::int64_t n = 0;
  for (const auto& p : net->parameters()) {
    if (p.requires_grad()) n += p.numel();
  }
  return n;
}

std::int64_t ModelHandle::head_width() const { return net->head()->options.out_features(); }

namespace {

std::optional<fs::path> weights_file(const BackboneProfile& profile, const BuildOptions& options) {
  fs::path dir;
  if (options.weights_dir) {
    dir = *options.weights_dir;
  } else if (const char* env = std::getenv("LANDCOVER_WEIGHTS_DIR")) {
    dir = env;
  } else {
    return std::nullopt;
  }
  auto file = dir / (profile.name + ".pt");
  if (!fs::is_regular_file(file)) return std::nullopt;
  return file;
}

}  // namespace

ModelHandle build_model(const BackboneProfile& profile, std::int64_t num_labels, bool pretrained,
                        const BuildOptions& options) {
  if (num_labels < 1) throw ArgumentError("build_model: num_labels must be >= 1");
  if (pretrained && !profile.pretrained_available) {
    throw ArgumentError("build_model: no pretrained weights exist for profile '" + profile.name + "'");
  }

  torch::manual_seed(options.seed);
  auto backbone = detail::make_backbone(profile.id);

  bool loaded = false;
  if (pretrained) {
    if (auto file = weights_file(profile, options)) {
      torch::serialize::InputArchive archive;
      archive.load_from(file->string());
      backbone.ptr->load(archive);
      loaded = true;
    } else {
      std::cerr << "warning: no pretrained weights for " << profile.name
                << " found; using seeded random initialization (seed " << options.seed << ")\n";
    }
  }

  ModelHandle handle{profile, num_labels, options.seed, loaded,
                     MultiLabelNet(std::move(backbone.module), backbone.feature_dim, num_labels)};
  handle.net->eval();
  return handle;
}

void set_backbone_frozen(ModelHandle& model, bool frozen) {
  for (auto& p : model.net->backbone().parameters()) p.set_requires_grad(!frozen);
}

// ---------------------------------------------------------------------------
// Input handling

torch::Tensor images_to_batch(std::span<const cv::Mat> images) {
  if (images.empty()) throw ArgumentError("images_to_batch: no images");
  const int side = images.front().rows;
  auto batch = torch::empty({static_cast<std::int64_t>(images.size()), side, side, 3}, torch::kUInt8);
  for (std::size_t i = 0; i < images.size(); ++i) {
    const cv::Mat& img = images[i];
    if (img.type() != CV_8UC3 || img.rows != side || img.cols != side) {
      throw ArgumentError("images_to_batch: images must be equally sized square 8-bit RGB");
    }
    cv::Mat contiguous = img.isContinuous() ? img : img.clone();
    auto slice = torch::from_blob(contiguous.data, {side, side, 3}, torch::kUInt8);
    batch[static_cast<std::int64_t>(i)].copy_(slice);
  }
  return batch;
}

torch::Tensor prepare_input(const torch::Tensor& batch_nhwc) {
  auto x = batch_nhwc.to(torch::kFloat32);
  if (batch_nhwc.scalar_type() == torch::kUInt8) x = x / 255.0;
  x = x.permute({0, 3, 1, 2}).contiguous();
  // ImageNet channel statistics, shared by every profile.
  static const auto mean = torch::tensor({0.485f, 0.456f, 0.406f}).view({1, 3, 1, 1});
  static const auto stddev = torch::tensor({0.229f, 0.224f, 0.225f}).view({1, 3, 1, 1});
  return (x - mean) / stddev;
}

void check_input_size(const BackboneProfile& profile, const torch::Tensor& batch) {
  if (batch.dim() != 4 || batch.size(3) != 3) {
    throw InputSizeError("input batch must be B x S x S x 3");
  }
  if (batch.size(1) != batch.size(2)) {
    throw InputSizeError("input batch must be square, got " + std::to_string(batch.size(1)) + "x" +
                         std::to_string(batch.size(2)));
  }
  if (batch.size(1) < profile.min_input_size) {
    throw InputSizeError(profile.name + " needs input of at least " + std::to_string(profile.min_input_size) + "x" +
                         std::to_string(profile.min_input_size) + " pixels, got " + std::to_string(batch.size(1)) +
                         "x" + std::to_string(batch.size(2)));
  }
}

torch::Tensor predict_probabilities(ModelHandle& model, const torch::Tensor& batch_nhwc) {
  check_input_size(model.profile, batch_nhwc);
  torch::NoGradGuard no_grad;
  model.net->eval();
  return model.net->forward(prepare_input(batch_nhwc)).contiguous();
}

ProbabilityMatrix to_probability_matrix(const torch::Tensor& probabilities) {
  auto p = probabilities.to(torch::kFloat64).contiguous();
  const auto rows = static_cast<std::size_t>(p.size(0));
  const auto cols = static_cast<std::size_t>(p.size(1));
  ProbabilityMatrix out(rows, cols);
  const double* src = p.data_ptr<double>();
  std::copy(src, src + rows * cols, out.values().begin());
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

void to_json(nlohmann::json& j, const ModelManifest& m) {
  j = nlohmann::json{{"model_name", m.model_name},
                     {"profile", m.profile},
                     {"num_labels", m.num_labels},
                     {"classes", m.classes},
                     {"seed", m.seed},
                     {"input_size", m.input_size},
                     {"val_fraction", m.val_fraction},
                     {"split_seed", m.split_seed},
                     {"pretrained_loaded", m.pretrained_loaded},
                     {"weights_file", m.weights_file}};
  j["threshold"] = m.threshold ? nlohmann::json(*m.threshold) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, ModelManifest& m) {
  j.at("model_name").get_to(m.model_name);
  j.at("profile").get_to(m.profile);
  j.at("num_labels").get_to(m.num_labels);
  j.at("classes").get_to(m.classes);
  m.seed = j.value("seed", std::uint64_t{0});
  j.at("input_size").get_to(m.input_size);
  m.val_fraction = j.value("val_fraction", kDefaultValFraction);
  m.split_seed = j.value("split_seed", std::uint64_t{0});
  m.pretrained_loaded = j.value("pretrained_loaded", false);
  j.at("weights_file").get_to(m.weights_file);
  if (j.contains("threshold") && !j["threshold"].is_null()) m.threshold = j["threshold"].get<double>();
  else m.threshold.reset();
}

fs::path manifest_path_for(const fs::path& path) {
  auto p = path;
  return p.replace_extension(".json");
}

void write_manifest(const ModelManifest& manifest, const fs::path& manifest_path) {
  auto tmp = manifest_path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw LoadError("cannot write " + tmp.string());
    out << nlohmann::json(manifest).dump(2) << '\n';
  }
  fs::rename(tmp, manifest_path);
}

ModelManifest read_manifest(const fs::path& manifest_path) {
  if (!fs::is_regular_file(manifest_path)) throw LoadError("checkpoint manifest not found: " + manifest_path.string());
  try {
    return nlohmann::json::parse(csv::read_text(manifest_path)).get<ModelManifest>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("checkpoint manifest " + manifest_path.string() + ": " + e.what());
  }
}

fs::path save_checkpoint(ModelHandle& model, ModelManifest manifest, const fs::path& stem) {
  if (!stem.parent_path().empty()) fs::create_directories(stem.parent_path());
  auto weights = stem;
  weights += ".pt";
  auto manifest_path = stem;
  manifest_path += ".json";
  torch::save(model.net, weights.string());
  manifest.profile = model.profile.name;
  manifest.num_labels = model.num_labels;
  manifest.seed = model.seed;
  manifest.pretrained_loaded = model.pretrained_loaded;
  manifest.weights_file = weights.filename().string();
  write_manifest(manifest, manifest_path);
  return manifest_path;
}

LoadedModel load_checkpoint(const fs::path& path) {
  auto manifest = read_manifest(manifest_path_for(path));
  if (static_cast<std::int64_t>(manifest.classes.size()) != manifest.num_labels) {
    throw SchemaError("checkpoint manifest: class list length differs from num_labels");
  }
  auto weights = manifest_path_for(path).parent_path() / manifest.weights_file;
  if (!fs::is_regular_file(weights)) throw LoadError("checkpoint weights not found: " + weights.string());

  auto model = build_model(profile_by_name(manifest.profile), manifest.num_labels, false, {manifest.seed, {}});
  model.pretrained_loaded = manifest.pretrained_loaded;
  try {
    torch::load(model.net, weights.string());
  } catch (const c10::Error& e) {
    throw SchemaError("checkpoint weights " + weights.string() + " do not match the manifest: " + e.what_without_backtrace());
  }
  model.net->eval();
  return {std::move(model), std::move(manifest)};
}

}  // namespace landcover

#include "landcover/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <random>

#include "landcover/csv.hpp"
#include "landcover/error.hpp"

namespace landcover {

namespace fs = std::filesystem;

torch::Tensor bce_loss(const torch::Tensor& probabilities, const torch::Tensor& targets) {
  if (probabilities.sizes() != targets.sizes()) throw ArgumentError("bce_loss: shape mismatch");
  auto p = probabilities.clamp(kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
  auto y = targets.to(p.scalar_type());
  return -(y * torch::log(p) + (1.0 - y) * torch::log(1.0 - p)).mean();
}

double compute_loss(const ProbabilityMatrix& probabilities, const LabelMatrix& labels) {
  if (probabilities.rows() != labels.rows() || probabilities.cols() != labels.cols()) {
    throw ArgumentError("compute_loss: shape mismatch");
  }
  if (probabilities.empty()) throw ArgumentError("compute_loss: empty input");
  auto rows = static_cast<std::int64_t>(probabilities.rows());
  auto cols = static_cast<std::int64_t>(probabilities.cols());
  auto p = torch::from_blob(const_cast<double*>(probabilities.values().data()), {rows, cols}, torch::kFloat64);
  auto y = torch::from_blob(const_cast<unsigned char*>(labels.values().data()), {rows, cols}, torch::kUInt8);
  return bce_loss(p, y).item<double>();
}

double default_learning_rate(const BackboneProfile& profile) {
  return profile.id == Backbone::TinyCnn ? 1e-3 : 1e-4;
}

int effective_input_size(const BackboneProfile& profile, int requested) {
  int size = requested > 0 ? requested : profile.default_input_size;
  return std::max(size, profile.min_input_size);
}

namespace {

struct Batch {
  torch::Tensor inputs;  // normalized NCHW
  torch::Tensor targets;
};

Batch make_batch(std::span<const cv::Mat> images, std::span<const std::vector<std::uint8_t>* const> labels) {
  auto inputs = prepare_input(images_to_batch(images));
  const auto width = static_cast<std::int64_t>(labels.front()->size());
  auto targets = torch::empty({static_cast<std::int64_t>(labels.size()), width}, torch::kFloat32);
  auto acc = targets.accessor<float, 2>();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::int64_t c = 0; c < width; ++c) acc[static_cast<std::int64_t>(i)][c] = (*labels[i])[c] ? 1.0f : 0.0f;
  }
  return {inputs, targets};
}

std::string format_loss(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

ProbabilityMatrix predict_corpus(ModelHandle& model, const Corpus& corpus, std::span<const std::size_t> indices,
                                 int input_size, int batch_size) {
  ProbabilityMatrix out(0, static_cast<std::size_t>(model.num_labels));
  for (std::size_t start = 0; start < indices.size(); start += static_cast<std::size_t>(batch_size)) {
    std::size_t end = std::min(indices.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<cv::Mat> images;
    for (std::size_t k = start; k < end; ++k) images.push_back(resize_image(corpus.images.at(indices[k]).pixels, input_size));
    auto probs = to_probability_matrix(predict_probabilities(model, images_to_batch(images)));
    for (std::size_t r = 0; r < probs.rows(); ++r) out.append_row(probs.row(r));
  }
  return out;
}

TrainingHistory train(ModelHandle& model, const Corpus& corpus, const DatasetSplit& split,
                      const TrainingConfig& config, const AugmentationConfig& augment) {
  if (config.epochs < 1) throw ArgumentError("train: epochs must be >= 1");
  if (config.batch_size < 1) throw ArgumentError("train: batch_size must be >= 1");
  const double lr = config.learning_rate.value_or(default_learning_rate(model.profile));
  if (!(lr > 0.0)) throw ArgumentError("train: learning_rate must be positive");
  if (split.train.empty() || split.val.empty()) throw ArgumentError("train: both split halves must be non-empty");
  if (model.head_width() != static_cast<std::int64_t>(corpus.vocab.size())) {
    throw ArgumentError("train: head width " + std::to_string(model.head_width()) + " differs from vocabulary size " +
                        std::to_string(corpus.vocab.size()));
  }

  const int input_size = effective_input_size(model.profile, config.input_size);
  if (config.input_size > 0 && input_size != config.input_size && config.verbose) {
    std::cout << model.profile.name << ": resizing training images to " << input_size << "x" << input_size
              << " (profile minimum)\n";
  }
  const std::string name = config.model_name.empty() ? model.profile.name : config.model_name;
  auto transforms = augment.transforms();  // validates the configuration up front

  // Resize once; augmentation acts on the resized squares.
  std::vector<cv::Mat> resized(corpus.images.size());
  auto resize_all = [&](const std::vector<std::size_t>& idx) {
    for (std::size_t i : idx) resized.at(i) = resize_image(corpus.images.at(i).pixels, input_size);
  };
  resize_all(split.train);
  resize_all(split.val);

  set_backbone_frozen(model, config.freeze_backbone);
  std::vector<torch::Tensor> params;
  for (auto& p : model.net->parameters()) {
    if (p.requires_grad()) params.push_back(p);
  }
  torch::optim::Adam optimizer(params, torch::optim::AdamOptions(lr));

  std::mt19937_64 rng(config.seed);
  torch::manual_seed(config.seed);

  ModelManifest manifest;
  manifest.model_name = name;
  manifest.classes = corpus.vocab.classes();
  manifest.input_size = input_size;
  manifest.val_fraction = split.val_fraction;
  manifest.split_seed = split.seed;

  TrainingHistory history;
  history.model_name = name;
  history.input_size = input_size;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order = split.train;
  const auto bs = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::swap(order[i], order[static_cast<std::size_t>(rng() % (i + 1))]);
    }

    model.net->train();
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0, batch_no = 1; start < order.size(); start += bs, ++batch_no) {
      std::size_t end = std::min(order.size(), start + bs);
      std::vector<cv::Mat> images;
      std::vector<const std::vector<std::uint8_t>*> labels;
      for (std::size_t k = start; k < end; ++k) {
        auto t = transforms[static_cast<std::size_t>(rng() % transforms.size())];
        images.push_back(apply_transform(resized[order[k]], t));
        labels.push_back(&corpus.images[order[k]].labels);
      }
      auto batch = make_batch(images, labels);
      auto loss = bce_loss(model.net->forward(batch.inputs), batch.targets);
      double value = loss.item<double>();
      if (!std::isfinite(value)) {
        throw TrainingError(name + ": non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batch_no));
      }
      optimizer.zero_grad();
      loss.backward();
      optimizer.step();
      loss_sum += value * static_cast<double>(end - start);
      seen += end - start;
    }

    model.net->eval();
    double val_sum = 0.0;
    {
      torch::NoGradGuard no_grad;
      for (std::size_t start = 0; start < split.val.size(); start += bs) {
        std::size_t end = std::min(split.val.size(), start + bs);
        std::vector<cv::Mat> images;
        std::vector<const std::vector<std::uint8_t>*> labels;
        for (std::size_t k = start; k < end; ++k) {
          images.push_back(resized[split.val[k]]);
          labels.push_back(&corpus.images[split.val[k]].labels);
        }
        auto batch = make_batch(images, labels);
        val_sum += bce_loss(model.net->forward(batch.inputs), batch.targets).item<double>() *
                   static_cast<double>(end - start);
      }
    }

    EpochLog log{epoch, loss_sum / static_cast<double>(seen), val_sum / static_cast<double>(split.val.size())};
    if (!std::isfinite(log.val_loss)) {
      throw TrainingError(name + ": non-finite validation loss at epoch " + std::to_string(epoch));
    }
    history.logs.push_back(log);
    if (config.verbose) {
      std::cout << name << " epoch " << epoch << "/" << config.epochs << " train_loss=" << format_loss(log.train_loss)
                << " val_loss=" << format_loss(log.val_loss) << std::endl;
    }
    if (log.val_loss < best_val) {
      best_val = log.val_loss;
      history.best_epoch = epoch;
      history.checkpoint_path = save_checkpoint(model, manifest, config.checkpoint_dir / (name + "_best"));
    }
  }
  history.final_checkpoint_path = save_checkpoint(model, manifest, config.checkpoint_dir / (name + "_final"));
  model.net->eval();
  return history;
}

std::optional<int> detect_overfitting(const TrainingHistory& history, int window) {
  if (window < 1) throw ArgumentError("detect_overfitting: window must be >= 1");
  const auto& logs = history.logs;
  auto diverging = [&](std::size_t i) {  // epoch i+1 compared with epoch i
    return logs[i].val_loss > logs[i - 1].val_loss && logs[i].train_loss < logs[i - 1].train_loss;
  };
  const auto w = static_cast<std::size_t>(window);
  for (std::size_t start = 1; start + w <= logs.size(); ++start) {
    bool all = true;
    for (std::size_t k = 0; k < w && all; ++k) all = diverging(start + k);
    if (all) return logs[start].epoch;
  }
  return std::nullopt;
}

void export_loss_curves(std::span<const TrainingHistory> histories, const fs::path& out) {
  if (!out.parent_path().empty()) fs::create_directories(out.parent_path());
  std::ofstream file(out);
  if (!file) throw LoadError("cannot write " + out.string());
  csv::write_row(file, {"model", "epoch", "train_loss", "val_loss"});
  for (const auto& h : histories) {
    for (const auto& log : h.logs) {
      csv::write_row(file, {h.model_name, std::to_string(log.epoch), csv::format_double(log.train_loss),
                            csv::format_double(log.val_loss)});
    }
  }
}

std::vector<TrainingHistory> read_loss_curves(const fs::path& path) {
  auto table = csv::read_file(path);
  const std::vector<std::string> expected{"model", "epoch", "train_loss", "val_loss"};
  if (table.header != expected) throw SchemaError("loss curve file " + path.string() + ": unexpected header");
  std::vector<TrainingHistory> out;
  std::map<std::string, std::size_t> slot;
  for (const auto& row : table.rows) {
    if (row.size() != 4) throw SchemaError("loss curve file " + path.string() + ": short row");
    auto [it, inserted] = slot.emplace(row[0], out.size());
    if (inserted) {
      out.emplace_back();
      out.back().model_name = row[0];
    }
    out[it->second].logs.push_back(
        {static_cast<int>(csv::parse_double(row[1])), csv::parse_double(row[2]), csv::parse_double(row[3])});
  }
  return out;
}

}  // namespace landcover

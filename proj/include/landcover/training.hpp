#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "landcover/dataset.hpp"
#include "landcover/matrix.hpp"
#include "landcover/models.hpp"

namespace landcover {

inline constexpr double kProbabilityEpsilon = 1e-7;

/// Mean binary cross-entropy over every entry, with probabilities clipped
/// into [eps, 1 - eps]. Differentiable; keeps the dtype of `probabilities`.
torch::Tensor bce_loss(const torch::Tensor& probabilities, const torch::Tensor& targets);

/// Same loss evaluated in double precision on plain matrices.
double compute_loss(const ProbabilityMatrix& probabilities, const LabelMatrix& labels);

struct TrainingConfig {
  int epochs = 10;
  int batch_size = 32;
  std::optional<double> learning_rate;  // default: 1e-3 for tiny_cnn, 1e-4 otherwise
  std::uint64_t seed = 0;
  int input_size = 0;                   // 0: profile default; below the profile minimum: raised to it
  bool freeze_backbone = false;
  std::filesystem::path checkpoint_dir = "checkpoints";
  std::string model_name;               // default: profile name
  bool verbose = true;                  // per-epoch log line on stdout
};

double default_learning_rate(const BackboneProfile& profile);

/// Square side the training and inference paths resize images to.
int effective_input_size(const BackboneProfile& profile, int requested);

struct EpochLog {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;

  bool operator==(const EpochLog&) const = default;
};

struct TrainingHistory {
  std::string model_name;
  std::vector<EpochLog> logs;
  std::filesystem::path checkpoint_path;        // manifest of the best-val-loss weights
  std::filesystem::path final_checkpoint_path;  // manifest of the last epoch's weights
  int best_epoch = 0;
  int input_size = 0;
};

/// Fine-tunes `model` with Adam on the training half of `split`, evaluating
/// the validation half after every epoch. Each training sample gets one
/// transform drawn from `augment` per epoch. Saves <name>_best and
/// <name>_final checkpoints under config.checkpoint_dir. Throws
/// TrainingError on a non-finite loss, ArgumentError on bad configuration.
TrainingHistory train(ModelHandle& model, const Corpus& corpus, const DatasetSplit& split,
                      const TrainingConfig& config, const AugmentationConfig& augment);

/// Runs the model over `indices` of the corpus at `input_size` and returns
/// their probabilities (rows in index order).
ProbabilityMatrix predict_corpus(ModelHandle& model, const Corpus& corpus, std::span<const std::size_t> indices,
                                 int input_size, int batch_size = 64);

/// First 1-based epoch e at which validation loss rises while training loss
/// falls for `window` consecutive epochs starting at e.
std::optional<int> detect_overfitting(const TrainingHistory& history, int window);

/// CSV columns: model, epoch, train_loss, val_loss.
void export_loss_curves(std::span<const TrainingHistory> histories, const std::filesystem::path& out);

/// Reads an exported loss-curve CSV back, grouping rows by model in order of
/// first appearance.
std::vector<TrainingHistory> read_loss_curves(const std::filesystem::path& path);

}  // namespace landcover

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "autoaug/datasets.hpp"
#include "autoaug/pipeline.hpp"
#include "autoaug/policy.hpp"

namespace autoaug {

/// Desk-scale child classifier: one-hidden-layer ReLU perceptron (or softmax
/// regression when hidden = 0) over standardized pixels, trained with momentum
/// SGD, weight decay and a single cosine cycle from learning_rate to 0.
struct ChildConfig {
  int epochs = 10;
  int batch_size = 32;
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  int hidden = 64;
  /// Rescale each standardized input vector to zero mean and unit variance.
  bool input_norm = true;
  /// Baseline flip + pad-crop before the policy, and a fixed Cutout after it.
  bool baseline_augment = false;
  int cutout = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ChildResult {
  double val_accuracy = 0.0;
  double final_train_loss = 0.0;
  std::size_t steps = 0;
  /// FNV-1a of the trained parameters, for bitwise comparisons between runs.
  std::uint64_t weights_digest = 0;
};

/// Learning rate at optimizer step `step` of `total`.
double cosine_lr(double lr0, std::size_t step, std::size_t total);

/// Trains on `train` (augmenting each example per epoch when `policy` or the
/// baseline stages are set) and reports accuracy on `val`. Standardization uses
/// `stats`, computed by the caller from the un-augmented training set.
/// Throws DatasetError on empty splits or a single-class training set.
ChildResult train_child(const LabeledDataset& train, const LabeledDataset& val, const ChannelStats& stats,
                        const Policy* policy, const ChildConfig& cfg);

/// A policy that never applies anything.
Policy identity_policy();

}  // namespace autoaug

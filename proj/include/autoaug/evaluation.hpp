#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "autoaug/child.hpp"
#include "autoaug/datasets.hpp"
#include "autoaug/search.hpp"

namespace autoaug {

/// Validation accuracy of the built-in child trained under `p` with cfg.seed.
double evaluate_policy(const Policy& p, const LabeledDataset& train, const LabeledDataset& val,
                       const ChildConfig& cfg);

/// Built-in child as a search evaluator. The per-call seed replaces cfg.seed.
class ChildEvaluator final : public Evaluator {
 public:
  ChildEvaluator(LabeledDataset train, LabeledDataset val, ChildConfig cfg);

  double evaluate(const Policy& p, std::uint64_t seed) const override;
  std::string id() const override;

  const ChannelStats& stats() const noexcept { return stats_; }
  const ChildConfig& config() const noexcept { return cfg_; }
  const LabeledDataset& train() const noexcept { return train_; }
  const LabeledDataset& val() const noexcept { return val_; }

 private:
  LabeledDataset train_;
  LabeledDataset val_;
  ChildConfig cfg_;
  ChannelStats stats_;
};

/// Sub-policies of the k best distinct token sequences, best first.
/// Ties go to the earlier entry. Throws ArgumentError if fewer than k distinct
/// successful entries exist.
Policy top_k_concat(const SearchLog& log, std::size_t k);

/// Up to `n` distinct sub-policies taken from entries in reward order.
std::vector<SubPolicy> subpolicy_pool(const SearchLog& log, std::size_t n);

/// Keeps operation kinds; redraws every probability and magnitude index.
Policy randomize_prob_mag(const Policy& p, RngStream& rng);

/// Uniform over kinds, probabilities and magnitudes.
Policy sample_random_policy(std::size_t num_sub_policies, RngStream& rng);

struct SweepPoint {
  std::size_t size = 0;
  std::vector<double> errors;  ///< validation error (1 - reward) per repeat
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
};

/// For each size draws `repeats` random subsets of the pool (the whole pool once
/// when size equals the pool size) and evaluates them. Subset draws and
/// evaluation seeds derive from `seed` only.
std::vector<SweepPoint> subpolicy_subset_sweep(std::span<const SubPolicy> pool, std::span<const std::size_t> sizes,
                                               std::size_t repeats, const Evaluator& evaluator, std::uint64_t seed,
                                               int threads = 1);

}  // namespace autoaug

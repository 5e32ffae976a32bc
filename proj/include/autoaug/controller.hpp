#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "autoaug/codec.hpp"
#include "autoaug/rng.hpp"

namespace autoaug {

enum class ControllerOptimizer { adam, sgd };

struct ControllerConfig {
  int embedding_dim = 32;
  int hidden_size = 100;
  double learning_rate = 0.00035;
  double entropy_weight = 0.00001;
  double clip_epsilon = 0.2;
  double baseline_decay = 0.95;
  double init_range = 0.1;
  int ppo_epochs = 1;
  ControllerOptimizer optimizer = ControllerOptimizer::adam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
};

/// One sampled decision sequence plus the log-probabilities it had when sampled.
struct Trajectory {
  TokenSequence tokens{};
  std::array<double, kTokensPerPolicy> log_probs{};
  double reward = 0.0;

  /// Product rule: log of the joint probability is the sum over the 30 decisions.
  double joint_log_prob() const;
};

struct PpoMetrics {
  bool accepted = true;
  std::string diagnostic;
  double mean_reward = 0.0;
  double baseline = 0.0;  ///< baseline used for this batch's advantages
  double surrogate = 0.0;
  double entropy = 0.0;    ///< mean summed head entropy per sequence
  double approx_kl = 0.0;  ///< mean (sampling log-prob - current log-prob)
  double clip_fraction = 0.0;
  double grad_norm = 0.0;
};

/// Per-trajectory pieces of the clipped surrogate, for inspection.
struct SurrogateTerm {
  double ratio;
  double advantage;
  double value;  ///< min(ratio * A, clip(ratio) * A)
  bool clipped;  ///< the clipped branch was selected (no gradient through ratio)
};

/// Contiguous slice of the flat parameter vector.
struct ParamBlock {
  std::string name;
  std::size_t offset;
  std::size_t size;
};

/// One-layer LSTM that emits the 30 policy decisions, trained with PPO.
///
/// Each step's input is the embedding of the previous step's token (a learned
/// start vector at step 0); one softmax head per decision slot. All parameters
/// live in one flat vector so optimizers and gradient checks treat them alike.
class Controller {
 public:
  Controller(const ControllerConfig& cfg, std::uint64_t seed);

  const ControllerConfig& config() const noexcept { return cfg_; }

  std::vector<Trajectory> sample(std::size_t count, RngStream& rng) const;
  Trajectory sample(RngStream& rng) const;

  /// Softmax distribution at every position with `tokens` fed back as inputs.
  std::vector<std::vector<double>> distributions(const TokenSequence& tokens) const;
  /// Log-probabilities of `tokens` under the current parameters.
  std::array<double, kTokensPerPolicy> log_probs(const TokenSequence& tokens) const;

  /// Batch-mean of clipped surrogate plus entropy bonus, with advantages R - baseline.
  /// When `grad` is non-null it receives d(objective)/d(parameters).
  double objective(std::span<const Trajectory> batch, double baseline,
                   std::vector<double>* grad = nullptr) const;

  std::vector<SurrogateTerm> surrogate_terms(std::span<const Trajectory> batch,
                                             double baseline) const;

  /// One PPO step on a batch with rewards attached. A non-finite gradient
  /// leaves the controller untouched and returns accepted = false.
  PpoMetrics ppo_update(std::span<const Trajectory> batch);

  std::span<double> parameters() noexcept { return params_; }
  std::span<const double> parameters() const noexcept { return params_; }
  const std::vector<ParamBlock>& parameter_blocks() const noexcept { return blocks_; }
  const ParamBlock& block(const std::string& name) const;

  std::optional<double> baseline() const noexcept { return baseline_; }
  std::uint64_t step_count() const noexcept { return steps_; }

 private:
  struct Cache;

  void forward(std::span<const TokenSequence> forced, RngStream* rng, std::vector<TokenSequence>* sampled,
               Cache& cache) const;
  double evaluate(std::span<const Trajectory> batch, double baseline, std::vector<double>* grad,
                  std::vector<SurrogateTerm>* terms, double* entropy_out) const;

  ControllerConfig cfg_;
  std::vector<double> params_;
  std::vector<ParamBlock> blocks_;
  std::vector<double> adam_m_;
  std::vector<double> adam_v_;
  std::uint64_t adam_t_ = 0;
  std::optional<double> baseline_;
  std::uint64_t steps_ = 0;
};

}  // namespace autoaug

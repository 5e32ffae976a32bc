#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "autoaug/codec.hpp"
#include "autoaug/controller.hpp"
#include "autoaug/policy.hpp"
#include "autoaug/rng.hpp"

namespace autoaug {

enum class SearchAlgorithm { ppo, random, evolution };

std::string_view algorithm_name(SearchAlgorithm a);
SearchAlgorithm parse_algorithm(std::string_view name);

/// Turns a policy into a reward in [0, 1]. Implementations must be safe to call
/// concurrently and must depend only on (policy, seed).
class Evaluator {
 public:
  virtual ~Evaluator() = default;
  virtual double evaluate(const Policy& p, std::uint64_t seed) const = 0;
  virtual std::string id() const = 0;
};

/// Wraps a function of the policy tokens; handy for synthetic rewards.
class FunctionEvaluator final : public Evaluator {
 public:
  using Fn = std::function<double(const TokenSequence&, std::uint64_t)>;
  FunctionEvaluator(std::string id, Fn fn) : id_(std::move(id)), fn_(std::move(fn)) {}
  double evaluate(const Policy& p, std::uint64_t seed) const override { return fn_(encode_policy(p), seed); }
  std::string id() const override { return id_; }

 private:
  std::string id_;
  Fn fn_;
};

/// Runs fn(0..n-1) on up to `threads` workers. Each index runs exactly once;
/// results must be written to per-index slots by the caller.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

TokenSequence random_search_step(RngStream& rng);

struct Individual {
  TokenSequence tokens{};
  double reward = 0.0;
};

/// Binary tournament (ties keep the first draw), then a single-token mutation.
TokenSequence evolution_step(std::span<const Individual> population, RngStream& rng);

struct SearchConfig {
  SearchAlgorithm algorithm = SearchAlgorithm::ppo;
  std::size_t budget = 500;
  /// Policies proposed per round; also the PPO batch size.
  std::size_t batch_size = 32;
  int threads = 1;
  /// Evolution keeps the most recent `population` successful evaluations.
  std::size_t population = 20;
  std::uint64_t seed = 0;
  ControllerConfig controller;
};

enum class EntryStatus { ok, failed };

struct SearchEntry {
  std::size_t index = 0;
  std::size_t round = 0;
  TokenSequence tokens{};
  std::optional<double> reward;  ///< absent when the evaluation failed twice
  std::uint64_t eval_seed = 0;
  int attempts = 1;
  std::string error;
  double seconds = 0.0;  ///< wall time; kept out of the deterministic log
};

struct RoundMetrics {
  std::size_t round = 0;
  double mean_reward = 0.0;
  double best_reward = 0.0;
  std::size_t failures = 0;
  std::optional<PpoMetrics> ppo;
};

struct SearchLog {
  std::string algorithm;
  std::string evaluator;
  std::uint64_t seed = 0;
  std::vector<SearchEntry> entries;
  std::vector<RoundMetrics> rounds;

  /// Running maximum over successful entries; 0 before the first success.
  std::vector<double> best_so_far() const;
  std::optional<std::size_t> best_index() const;

  /// One JSON object per entry. Contains no wall-clock data.
  std::string to_jsonl() const;
  static SearchLog from_jsonl(std::string_view text);
  void write(const std::filesystem::path& path) const;
  /// Per-entry wall times as JSON lines, for `<log>.timing.jsonl`.
  std::string timing_jsonl() const;
  static SearchLog read(const std::filesystem::path& path);
};

using ProgressFn = std::function<void(const RoundMetrics&)>;

/// Evaluates `cfg.budget` policies in synchronous rounds. Rewards are attributed
/// by entry index, so the log does not depend on the thread count. A failed
/// evaluation is retried once with the same seed, then recorded as failed and
/// left out of controller and population updates.
SearchLog run_search(const SearchConfig& cfg, const Evaluator& evaluator, const ProgressFn& progress = {});

}  // namespace autoaug

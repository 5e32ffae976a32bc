#include "autoaug/evaluation.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "autoaug/errors.hpp"

namespace autoaug {

double evaluate_policy(const Policy& p, const LabeledDataset& train, const LabeledDataset& val,
                       const ChildConfig& cfg) {
  return train_child(train, val, compute_channel_stats(train), &p, cfg).val_accuracy;
}

ChildEvaluator::ChildEvaluator(LabeledDataset train, LabeledDataset val, ChildConfig cfg)
    : train_(std::move(train)), val_(std::move(val)), cfg_(cfg) {
  cfg_.validate();
  if (train_.empty() || val_.empty()) throw DatasetError("child evaluator needs non-empty train and validation sets");
  train_.validate();
  val_.validate();
  if (train_.distinct_labels() < 2) throw DatasetError("training set has a single class");
  stats_ = compute_channel_stats(train_);
}

double ChildEvaluator::evaluate(const Policy& p, std::uint64_t seed) const {
  ChildConfig cfg = cfg_;
  cfg.seed = seed;
  return train_child(train_, val_, stats_, &p, cfg).val_accuracy;
}

std::string ChildEvaluator::id() const {
  return "child-mlp(hidden=" + std::to_string(cfg_.hidden) + ",epochs=" + std::to_string(cfg_.epochs) +
         ",train=" + std::to_string(train_.size()) + ",val=" + std::to_string(val_.size()) + ")";
}

namespace {

// Successful entry indices by reward descending, index ascending.
std::vector<std::size_t> ranked(const SearchLog& log) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < log.entries.size(); ++i) {
    if (log.entries[i].reward) idx.push_back(i);
  }
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return *log.entries[a].reward > *log.entries[b].reward;
  });
  return idx;
}

}  // namespace

Policy top_k_concat(const SearchLog& log, std::size_t k) {
  if (k < 1) throw ArgumentError("k must be >= 1");
  std::set<TokenSequence> seen;
  std::vector<SubPolicy> subs;
  for (std::size_t i : ranked(log)) {
    if (seen.size() == k) break;
    if (!seen.insert(log.entries[i].tokens).second) continue;
    const Policy p = decode_tokens(log.entries[i].tokens);
    subs.insert(subs.end(), p.sub_policies().begin(), p.sub_policies().end());
  }
  if (seen.size() < k) {
    throw ArgumentError("log has " + std::to_string(seen.size()) + " distinct successful policies; need " +
                        std::to_string(k));
  }
  return Policy(std::move(subs));
}

std::vector<SubPolicy> subpolicy_pool(const SearchLog& log, std::size_t n) {
  std::vector<SubPolicy> pool;
  for (std::size_t i : ranked(log)) {
    const Policy p = decode_tokens(log.entries[i].tokens);
    for (const SubPolicy& sp : p.sub_policies()) {
      if (pool.size() == n) return pool;
      if (std::find(pool.begin(), pool.end(), sp) == pool.end()) pool.push_back(sp);
    }
  }
  return pool;
}

Policy randomize_prob_mag(const Policy& p, RngStream& rng) {
  std::vector<SubPolicy> subs(p.sub_policies().begin(), p.sub_policies().end());
  for (SubPolicy& sp : subs) {
    for (OperationSpec& op : sp.ops) {
      op.prob_index = static_cast<int>(rng.uniform_int(kProbLevels));
      op.mag_index = static_cast<int>(rng.uniform_int(kMagLevels));
    }
  }
  return Policy(std::move(subs));
}

Policy sample_random_policy(std::size_t num_sub_policies, RngStream& rng) {
  if (num_sub_policies < 1) throw ArgumentError("a policy needs at least one sub-policy");
  std::vector<SubPolicy> subs(num_sub_policies);
  for (SubPolicy& sp : subs) {
    for (OperationSpec& op : sp.ops) {
      op.kind = op_from_index(static_cast<int>(rng.uniform_int(kNumOpKinds)));
      op.prob_index = static_cast<int>(rng.uniform_int(kProbLevels));
      op.mag_index = static_cast<int>(rng.uniform_int(kMagLevels));
    }
  }
  return Policy(std::move(subs));
}

std::vector<SweepPoint> subpolicy_subset_sweep(std::span<const SubPolicy> pool, std::span<const std::size_t> sizes,
                                               std::size_t repeats, const Evaluator& evaluator, std::uint64_t seed,
                                               int threads) {
  if (pool.empty()) throw ArgumentError("sub-policy pool is empty");
  if (repeats < 1) throw ArgumentError("repeats must be >= 1");
  struct Job {
    std::size_t point;
    Policy policy;
    std::uint64_t seed;
  };
  std::vector<SweepPoint> points;
  std::vector<Job> jobs;
  for (std::size_t si = 0; si < sizes.size(); ++si) {
    const std::size_t size = sizes[si];
    if (size < 1 || size > pool.size()) {
      throw ArgumentError("subset size " + std::to_string(size) + " outside [1, " + std::to_string(pool.size()) + "]");
    }
    points.push_back(SweepPoint{size, {}, 0.0, 0.0, 0.0});
    const std::size_t reps = size == pool.size() ? 1 : repeats;
    for (std::size_t r = 0; r < reps; ++r) {
      RngStream rng(derive_seed(seed, size, r), 0);
      std::vector<std::size_t> idx(pool.size());
      std::iota(idx.begin(), idx.end(), 0);
      for (std::size_t i = 0; i < size; ++i) std::swap(idx[i], idx[i + rng.uniform_int(pool.size() - i)]);
      std::vector<SubPolicy> subs;
      for (std::size_t i = 0; i < size; ++i) subs.push_back(pool[idx[i]]);
      // Repeat r uses the same child seed at every size.
      jobs.push_back(Job{si, Policy(std::move(subs)), derive_seed(seed, 0, r)});
    }
  }
  std::vector<double> rewards(jobs.size());
  parallel_for(jobs.size(), threads, [&](std::size_t j) { rewards[j] = evaluator.evaluate(jobs[j].policy, jobs[j].seed); });
  for (std::size_t j = 0; j < jobs.size(); ++j) points[jobs[j].point].errors.push_back(1.0 - rewards[j]);
  for (SweepPoint& p : points) {
    p.mean = std::accumulate(p.errors.begin(), p.errors.end(), 0.0) / static_cast<double>(p.errors.size());
    p.min = *std::min_element(p.errors.begin(), p.errors.end());
    p.max = *std::max_element(p.errors.begin(), p.errors.end());
  }
  return points;
}

}  // namespace autoaug

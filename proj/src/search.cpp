#include "autoaug/search.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <deque>
#include <exception>
#include <mutex>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "autoaug/errors.hpp"

namespace autoaug {

std::string_view algorithm_name(SearchAlgorithm a) {
  switch (a) {
    case SearchAlgorithm::ppo: return "ppo";
    case SearchAlgorithm::random: return "random";
    case SearchAlgorithm::evolution: return "evolution";
  }
  return "?";
}

SearchAlgorithm parse_algorithm(std::string_view name) {
  if (name == "ppo") return SearchAlgorithm::ppo;
  if (name == "random") return SearchAlgorithm::random;
  if (name == "evolution") return SearchAlgorithm::evolution;
  throw ArgumentError("unknown search algorithm '" + std::string(name) + "'");
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(threads, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::mutex error_mu;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i; !failed && (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
          failed = true;
        }
      }
    });
  }
  pool.clear();
  if (error) std::rethrow_exception(error);
}

TokenSequence random_search_step(RngStream& rng) { return random_tokens(rng); }

TokenSequence evolution_step(std::span<const Individual> population, RngStream& rng) {
  if (population.empty()) throw ArgumentError("evolution needs a non-empty population");
  const Individual& a = population[rng.uniform_int(population.size())];
  const Individual& b = population[rng.uniform_int(population.size())];
  const Individual& parent = b.reward > a.reward ? b : a;
  return mutate(parent.tokens, rng);
}

std::vector<double> SearchLog::best_so_far() const {
  std::vector<double> out;
  out.reserve(entries.size());
  double best = 0.0;
  bool any = false;
  for (const SearchEntry& e : entries) {
    if (e.reward && (!any || *e.reward > best)) {
      best = *e.reward;
      any = true;
    }
    out.push_back(best);
  }
  return out;
}

std::optional<std::size_t> SearchLog::best_index() const {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].reward && (!best || *entries[i].reward > *entries[*best].reward)) best = i;
  }
  return best;
}

namespace {

nlohmann::json ppo_json(const PpoMetrics& m) {
  return {{"accepted", m.accepted},     {"diagnostic", m.diagnostic}, {"baseline", m.baseline},
          {"surrogate", m.surrogate},   {"entropy", m.entropy},       {"approx_kl", m.approx_kl},
          {"clip_fraction", m.clip_fraction}, {"grad_norm", m.grad_norm}};
}

PpoMetrics ppo_from_json(const nlohmann::json& j) {
  PpoMetrics m;
  m.accepted = j.value("accepted", true);
  m.diagnostic = j.value("diagnostic", "");
  m.baseline = j.value("baseline", 0.0);
  m.surrogate = j.value("surrogate", 0.0);
  m.entropy = j.value("entropy", 0.0);
  m.approx_kl = j.value("approx_kl", 0.0);
  m.clip_fraction = j.value("clip_fraction", 0.0);
  m.grad_norm = j.value("grad_norm", 0.0);
  m.mean_reward = j.value("mean_reward", 0.0);
  return m;
}

}  // namespace

std::string SearchLog::to_jsonl() const {
  std::string out;
  nlohmann::json header = {{"type", "header"}, {"algorithm", algorithm}, {"evaluator", evaluator}, {"seed", seed}};
  out += header.dump() + "\n";
  std::size_t r = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const SearchEntry& e = entries[i];
    nlohmann::json j = {{"type", "entry"},
                        {"index", e.index},
                        {"round", e.round},
                        {"tokens", e.tokens},
                        {"policy", serialize_policy(decode_tokens(e.tokens))},
                        {"reward", e.reward ? nlohmann::json(*e.reward) : nlohmann::json(nullptr)},
                        {"status", e.reward ? "ok" : "failed"},
                        {"seed", e.eval_seed},
                        {"attempts", e.attempts}};
    if (!e.error.empty()) j["error"] = e.error;
    out += j.dump() + "\n";
    const bool round_end = i + 1 == entries.size() || entries[i + 1].round != e.round;
    if (round_end && r < rounds.size() && rounds[r].round == e.round) {
      const RoundMetrics& m = rounds[r++];
      nlohmann::json rj = {{"type", "round"},         {"round", m.round},       {"mean_reward", m.mean_reward},
                           {"best_reward", m.best_reward}, {"failures", m.failures}};
      if (m.ppo) rj["ppo"] = ppo_json(*m.ppo);
      out += rj.dump() + "\n";
    }
  }
  return out;
}

SearchLog SearchLog::from_jsonl(std::string_view text) {
  SearchLog log;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const std::string type = j.value("type", "entry");
      if (type == "header") {
        log.algorithm = j.value("algorithm", "");
        log.evaluator = j.value("evaluator", "");
        log.seed = j.value("seed", std::uint64_t{0});
      } else if (type == "round") {
        RoundMetrics m;
        m.round = j.at("round").get<std::size_t>();
        m.mean_reward = j.value("mean_reward", 0.0);
        m.best_reward = j.value("best_reward", 0.0);
        m.failures = j.value("failures", std::size_t{0});
        if (j.contains("ppo")) {
          m.ppo = ppo_from_json(j["ppo"]);
          m.ppo->mean_reward = m.mean_reward;
        }
        log.rounds.push_back(m);
      } else if (type == "entry") {
        SearchEntry e;
        e.index = j.at("index").get<std::size_t>();
        e.round = j.value("round", std::size_t{0});
        const auto toks = j.at("tokens").get<std::vector<int>>();
        if (toks.size() != kTokensPerPolicy) throw DecodeError("entry must hold 30 tokens");
        std::copy(toks.begin(), toks.end(), e.tokens.begin());
        validate_tokens(e.tokens);
        if (!j.at("reward").is_null()) e.reward = j.at("reward").get<double>();
        e.eval_seed = j.value("seed", std::uint64_t{0});
        e.attempts = j.value("attempts", 1);
        e.error = j.value("error", "");
        log.entries.push_back(e);
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(lineno, std::string("bad search log record: ") + e.what());
    } catch (const DecodeError& e) {
      throw ParseError(lineno, e.what());
    }
  }
  return log;
}

void SearchLog::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  out << to_jsonl();
  if (!out) throw std::runtime_error("cannot write " + path.string());
  std::ofstream timing(path.string() + ".timing.jsonl", std::ios::binary);
  timing << timing_jsonl();
}

std::string SearchLog::timing_jsonl() const {
  std::string out;
  for (const SearchEntry& e : entries) {
    out += nlohmann::json{{"index", e.index}, {"seconds", e.seconds}}.dump() + "\n";
  }
  return out;
}

SearchLog SearchLog::read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_jsonl(ss.str());
}

SearchLog run_search(const SearchConfig& cfg, const Evaluator& evaluator, const ProgressFn& progress) {
  if (cfg.budget < 1) throw ArgumentError("search budget must be >= 1");
  if (cfg.batch_size < 1) throw ArgumentError("search batch size must be >= 1");
  if (cfg.population < 1) throw ArgumentError("evolution population must be >= 1");

  SearchLog log;
  log.algorithm = std::string(algorithm_name(cfg.algorithm));
  log.evaluator = evaluator.id();
  log.seed = cfg.seed;

  std::optional<Controller> controller;
  if (cfg.algorithm == SearchAlgorithm::ppo) controller.emplace(cfg.controller, derive_seed(cfg.seed, 1));
  RngStream proposal_rng(derive_seed(cfg.seed, 2), 0);
  std::deque<Individual> population;

  std::size_t round = 0;
  while (log.entries.size() < cfg.budget) {
    const std::size_t start = log.entries.size();
    const std::size_t count = std::min(cfg.batch_size, cfg.budget - start);

    std::vector<Trajectory> trajectories;
    std::vector<TokenSequence> proposals(count);
    switch (cfg.algorithm) {
      case SearchAlgorithm::ppo:
        trajectories = controller->sample(count, proposal_rng);
        for (std::size_t i = 0; i < count; ++i) proposals[i] = trajectories[i].tokens;
        break;
      case SearchAlgorithm::random:
        for (auto& t : proposals) t = random_search_step(proposal_rng);
        break;
      case SearchAlgorithm::evolution: {
        const std::vector<Individual> pop(population.begin(), population.end());
        for (auto& t : proposals) t = pop.empty() ? random_search_step(proposal_rng) : evolution_step(pop, proposal_rng);
        break;
      }
    }

    std::vector<SearchEntry> batch(count);
    for (std::size_t i = 0; i < count; ++i) {
      batch[i].index = start + i;
      batch[i].round = round;
      batch[i].tokens = proposals[i];
      batch[i].eval_seed = derive_seed(cfg.seed, 3, start + i);
    }
    parallel_for(count, cfg.threads, [&](std::size_t i) {
      SearchEntry& e = batch[i];
      const Policy policy = decode_tokens(e.tokens);
      const auto t0 = std::chrono::steady_clock::now();
      for (e.attempts = 1; e.attempts <= 2; ++e.attempts) {
        try {
          const double r = evaluator.evaluate(policy, e.eval_seed);
          if (!std::isfinite(r) || r < 0.0 || r > 1.0) throw ProtocolError("reward outside [0, 1]");
          e.reward = r;
          e.error.clear();
          break;
        } catch (const std::exception& ex) {
          e.error = ex.what();
        }
      }
      e.attempts = std::min(e.attempts, 2);
      e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    });

    RoundMetrics m;
    m.round = round;
    double sum = 0.0;
    std::size_t ok = 0;
    std::vector<Trajectory> rewarded;
    for (std::size_t i = 0; i < count; ++i) {
      const SearchEntry& e = batch[i];
      if (!e.reward) {
        ++m.failures;
        continue;
      }
      sum += *e.reward;
      m.best_reward = ok == 0 ? *e.reward : std::max(m.best_reward, *e.reward);
      ++ok;
      if (controller) {
        trajectories[i].reward = *e.reward;
        rewarded.push_back(trajectories[i]);
      }
      if (cfg.algorithm == SearchAlgorithm::evolution) {
        population.push_back(Individual{e.tokens, *e.reward});
        if (population.size() > cfg.population) population.pop_front();
      }
    }
    m.mean_reward = ok ? sum / static_cast<double>(ok) : 0.0;
    if (controller && !rewarded.empty()) m.ppo = controller->ppo_update(rewarded);

    std::move(batch.begin(), batch.end(), std::back_inserter(log.entries));
    log.rounds.push_back(m);
    if (progress) progress(m);
    ++round;
  }
  return log;
}

}  // namespace autoaug

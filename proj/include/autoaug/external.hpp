#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "autoaug/policy.hpp"
#include "autoaug/search.hpp"

namespace autoaug {

inline constexpr std::chrono::milliseconds kDefaultWorkerTimeout{10 * 60 * 1000};

struct EvalRequest {
  std::uint64_t id = 0;
  Policy policy;
  std::uint64_t seed = 0;
  std::uint64_t train_size = 0;
};

struct EvalResponse {
  std::uint64_t id = 0;
  std::optional<double> reward;
  std::string error;
};

/// {"id":..,"policy":[[[kind,prob,mag],[kind,prob,mag]],...],"seed":..,"train_size":..}
std::string encode_request(const EvalRequest& r);
/// Throws ProtocolError on malformed input.
EvalRequest decode_request(const std::string& line);
std::string encode_response(const EvalResponse& r);
/// Throws ProtocolError on malformed JSON, a missing reward, or a reward outside [0, 1].
EvalResponse decode_response(const std::string& line);

/// A child process speaking the protocol over its stdin/stdout, one line each way.
class WorkerProcess {
 public:
  explicit WorkerProcess(std::vector<std::string> argv);
  ~WorkerProcess();
  WorkerProcess(const WorkerProcess&) = delete;
  WorkerProcess& operator=(const WorkerProcess&) = delete;

  /// Sends one line and waits for one line back. Throws ProtocolError on timeout
  /// (the worker is killed) or if the worker exits.
  std::string round_trip(const std::string& line, std::chrono::milliseconds timeout);
  bool alive() const noexcept { return pid_ > 0; }
  void terminate();

 private:
  void write_all(const std::string& data);
  std::string read_line(std::chrono::milliseconds timeout);

  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

/// Sends the policy, checks the echoed id and returns the reward.
double external_evaluate(const Policy& p, WorkerProcess& worker, std::uint64_t id, std::uint64_t seed,
                         std::uint64_t train_size, std::chrono::milliseconds timeout = kDefaultWorkerTimeout);

/// Evaluator backed by a pool of worker processes, one per concurrent call.
/// A worker that times out or misbehaves is discarded and replaced on demand.
class ExternalEvaluator final : public Evaluator {
 public:
  ExternalEvaluator(std::vector<std::string> argv, std::uint64_t train_size,
                    std::chrono::milliseconds timeout = kDefaultWorkerTimeout);
  ~ExternalEvaluator() override;

  double evaluate(const Policy& p, std::uint64_t seed) const override;
  std::string id() const override;

 private:
  std::vector<std::string> argv_;
  std::uint64_t train_size_;
  std::chrono::milliseconds timeout_;
  mutable std::mutex mu_;
  mutable std::vector<std::unique_ptr<WorkerProcess>> idle_;
  mutable std::uint64_t next_id_ = 0;
};

}  // namespace autoaug

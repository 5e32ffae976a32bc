#include "autoaug/external.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>

#include <nlohmann/json.hpp>

#include "autoaug/errors.hpp"

namespace autoaug {

std::string encode_request(const EvalRequest& r) {
  nlohmann::json j = {{"id", r.id}, {"policy", policy_to_json(r.policy)}, {"seed", r.seed}, {"train_size", r.train_size}};
  return j.dump();
}

EvalRequest decode_request(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    return EvalRequest{j.at("id").get<std::uint64_t>(), policy_from_json(j.at("policy")),
                       j.value("seed", std::uint64_t{0}), j.value("train_size", std::uint64_t{0})};
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed request: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ProtocolError(std::string("malformed request: ") + e.what());
  } catch (const ParseError& e) {
    throw ProtocolError(std::string("malformed request: ") + e.what());
  }
}

std::string encode_response(const EvalResponse& r) {
  nlohmann::json j = {{"id", r.id}};
  if (r.reward) j["reward"] = *r.reward;
  if (!r.error.empty()) j["error"] = r.error;
  return j.dump();
}

EvalResponse decode_response(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed response: ") + e.what());
  }
  if (!j.is_object() || !j.contains("id") || !j["id"].is_number_unsigned()) {
    throw ProtocolError("response lacks a numeric id: " + line);
  }
  EvalResponse r;
  r.id = j["id"].get<std::uint64_t>();
  if (j.contains("error") && j["error"].is_string()) r.error = j["error"].get<std::string>();
  if (j.contains("reward")) {
    if (!j["reward"].is_number()) throw ProtocolError("reward is not a number: " + line);
    const double v = j["reward"].get<double>();
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) throw ProtocolError("reward outside [0, 1]: " + line);
    r.reward = v;
  }
  if (!r.reward && r.error.empty()) throw ProtocolError("response has neither reward nor error: " + line);
  return r;
}

WorkerProcess::WorkerProcess(std::vector<std::string> argv) {
  if (argv.empty()) throw ArgumentError("worker command is empty");
  // Writing to a dead worker must surface as an error, not kill this process.
  ::signal(SIGPIPE, SIG_IGN);
  int in_pipe[2], out_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw ProtocolError(std::string("pipe: ") + std::strerror(errno));
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw ProtocolError(std::string("pipe: ") + std::strerror(errno));
  }
  std::vector<char*> cargv;
  for (std::string& a : argv) cargv.push_back(a.data());
  cargv.push_back(nullptr);
  const pid_t pid = ::fork();
  if (pid < 0) throw ProtocolError(std::string("fork: ") + std::strerror(errno));
  if (pid == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::execvp(cargv[0], cargv.data());
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
}

WorkerProcess::~WorkerProcess() { terminate(); }

void WorkerProcess::terminate() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  to_child_ = from_child_ = -1;
  if (pid_ > 0) {
    int status = 0;
    // Closing stdin lets a well-behaved worker exit; give it a moment before killing.
    for (int i = 0; i < 20; ++i) {
      if (::waitpid(pid_, &status, WNOHANG) == pid_) {
        pid_ = -1;
        return;
      }
      ::usleep(5000);
    }
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, &status, 0);
    pid_ = -1;
  }
}

void WorkerProcess::write_all(const std::string& data) {
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::write(to_child_, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(std::string("write to worker failed: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

std::string WorkerProcess::read_line(std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) throw ProtocolError("worker timed out after " + std::to_string(timeout.count()) + " ms");
    pollfd pfd{from_child_, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(left.count(), 1 << 30)));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(std::string("poll failed: ") + std::strerror(errno));
    }
    if (rc == 0) continue;
    char chunk[4096];
    const ssize_t n = ::read(from_child_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(std::string("read from worker failed: ") + std::strerror(errno));
    }
    if (n == 0) throw ProtocolError("worker closed its output");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

std::string WorkerProcess::round_trip(const std::string& line, std::chrono::milliseconds timeout) {
  if (!alive()) throw ProtocolError("worker is not running");
  try {
    write_all(line + "\n");
    return read_line(timeout);
  } catch (const ProtocolError&) {
    terminate();
    throw;
  }
}

double external_evaluate(const Policy& p, WorkerProcess& worker, std::uint64_t id, std::uint64_t seed,
                         std::uint64_t train_size, std::chrono::milliseconds timeout) {
  const std::string reply = worker.round_trip(encode_request(EvalRequest{id, p, seed, train_size}), timeout);
  const EvalResponse r = decode_response(reply);
  if (r.id != id) {
    throw ProtocolError("response id " + std::to_string(r.id) + " does not match request " + std::to_string(id));
  }
  if (!r.reward) throw ProtocolError("worker reported an error: " + r.error);
  return *r.reward;
}

ExternalEvaluator::ExternalEvaluator(std::vector<std::string> argv, std::uint64_t train_size,
                                     std::chrono::milliseconds timeout)
    : argv_(std::move(argv)), train_size_(train_size), timeout_(timeout) {
  if (argv_.empty()) throw ArgumentError("worker command is empty");
}

ExternalEvaluator::~ExternalEvaluator() = default;

double ExternalEvaluator::evaluate(const Policy& p, std::uint64_t seed) const {
  std::unique_ptr<WorkerProcess> worker;
  std::uint64_t id = 0;
  {
    std::lock_guard lock(mu_);
    id = next_id_++;
    if (!idle_.empty()) {
      worker = std::move(idle_.back());
      idle_.pop_back();
    }
  }
  if (!worker) worker = std::make_unique<WorkerProcess>(argv_);
  // On any exception the worker is dropped rather than returned to the pool.
  const double r = external_evaluate(p, *worker, id, seed, train_size_, timeout_);
  std::lock_guard lock(mu_);
  idle_.push_back(std::move(worker));
  return r;
}

std::string ExternalEvaluator::id() const {
  std::string cmd;
  for (const std::string& a : argv_) cmd += (cmd.empty() ? "" : " ") + a;
  return "external(" + cmd + ")";
}

}  // namespace autoaug

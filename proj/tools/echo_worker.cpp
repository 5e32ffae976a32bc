// Scripted stand-in for an external evaluator. Reads one request per line on
// stdin and answers on stdout according to --mode:
//   constant      reward = --reward
//   policy        reward = share of operations that are Invert with non-zero probability
//   out-of-range  reward = 1.2
//   malformed     writes a line that is not JSON
//   wrong-id      echoes id + 1
//   sleep         sleeps --sleep-ms before answering with --reward
//   exit          exits without answering
// Malformed requests get {"id":..,"error":..} and the stream continues.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "autoaug/errors.hpp"
#include "autoaug/external.hpp"

int main(int argc, char** argv) {
  CLI::App app{"scripted evaluator stub"};
  std::string mode = "constant";
  double reward = 0.5;
  int sleep_ms = 0;
  app.add_option("--mode", mode)->check(
      CLI::IsMember({"constant", "policy", "out-of-range", "malformed", "wrong-id", "sleep", "exit"}));
  app.add_option("--reward", reward);
  app.add_option("--sleep-ms", sleep_ms);
  CLI11_PARSE(app, argc, argv);

  std::string line;
  while (std::getline(std::cin, line)) {
    if (line.empty()) continue;
    autoaug::EvalResponse resp;
    try {
      const autoaug::EvalRequest req = autoaug::decode_request(line);
      resp.id = req.id;
      if (mode == "exit") return 0;
      if (mode == "malformed") {
        std::cout << "this is not json" << std::endl;
        continue;
      }
      if (mode == "sleep") std::this_thread::sleep_for(std::chrono::milliseconds(sleep_ms));
      if (mode == "wrong-id") resp.id = req.id + 1;
      if (mode == "out-of-range") {
        std::cout << nlohmann::json{{"id", resp.id}, {"reward", 1.2}}.dump() << std::endl;
        continue;
      }
      if (mode == "policy") {
        int hits = 0, total = 0;
        for (const auto& sp : req.policy.sub_policies()) {
          for (const auto& op : sp.ops) {
            ++total;
            hits += op.kind == autoaug::OpKind::Invert && op.prob_index > 0;
          }
        }
        resp.reward = static_cast<double>(hits) / total;
      } else {
        resp.reward = reward;
      }
    } catch (const autoaug::ProtocolError& e) {
      try {
        resp.id = nlohmann::json::parse(line).value("id", std::uint64_t{0});
      } catch (const nlohmann::json::exception&) {
        resp.id = 0;
      }
      resp.error = e.what();
    }
    std::cout << autoaug::encode_response(resp) << std::endl;
  }
  return 0;
}

#include "doctest.h"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "autoaug/image_io.hpp"
#include "autoaug/policy.hpp"
#include "autoaug/search.hpp"
#include "support.hpp"

using namespace autoaug;
using autoaug::testing::CommandResult;
using autoaug::testing::run_command;
using nlohmann::json;

namespace {

std::string cli() { return std::string("'") + AUTOAUG_CLI_PATH + "'"; }

std::string cifar_policy() { return (autoaug::testing::policy_dir() / "reduced_cifar10.txt").string(); }

json last_json_line(const std::string& text) {
  std::istringstream in(text);
  std::string line, last;
  while (std::getline(in, line)) {
    if (!line.empty()) last = line;
  }
  return json::parse(last);
}

json error_of(const CommandResult& r) { return last_json_line(r.out); }

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("policy show and validate") {
    const CommandResult show = run_command(cli() + " policy show " + cifar_policy());
    CHECK(show.exit_code == 0);
    CHECK(show.out.find("0\t(Invert,0.1,7)&(Contrast,0.2,6)") != std::string::npos);
    CHECK(last_json_line(show.out)["sub_policies"] == 25);
    const CommandResult v = run_command(cli() + " policy validate " + cifar_policy());
    CHECK(v.exit_code == 0);
    CHECK(json::parse(v.out)["valid"] == true);
  }

  TEST_CASE("errors are one JSON line with a nonzero exit") {
    const auto dir = autoaug::testing::temp_dir("cli_err");
    std::ofstream(dir / "bad.txt") << "(Invert,0.1,7)&(Contrast,0.2,6)\n(Invert,0.3,12)&(Invert,0.1,1)\n";
    const CommandResult bad = run_command(cli() + " policy validate " + (dir / "bad.txt").string() + " 2>&1");
    CHECK(bad.exit_code == 1);
    const json e = error_of(bad);
    CHECK(e["error"]["type"] == "parse");
    CHECK(e["error"]["message"].get<std::string>().find("line 2") != std::string::npos);

    const CommandResult usage = run_command(cli() + " search --algo grid --out x 2>&1");
    CHECK(usage.exit_code == 2);
    CHECK(error_of(usage)["error"]["type"] == "usage");

    const CommandResult missing = run_command(cli() + " policy show /nonexistent/p.txt 2>&1");
    CHECK(missing.exit_code == 1);
    CHECK(error_of(missing)["error"].contains("message"));

    const CommandResult none = run_command(cli() + " 2>&1");
    CHECK(none.exit_code == 2);
  }

  TEST_CASE("augment is deterministic across thread counts") {
    const auto dir = autoaug::testing::temp_dir("cli_aug");
    std::filesystem::create_directories(dir / "in");
    for (int i = 0; i < 12; ++i) {
      write_image(dir / "in" / ("img" + std::to_string(i) + ".png"), autoaug::testing::random_image(32, 32, i));
    }
    std::vector<std::string> outputs;
    for (int threads : {1, 4}) {
      const auto out = dir / ("out" + std::to_string(threads));
      const CommandResult r = run_command(cli() + " augment --policy " + cifar_policy() + " --input " +
                                          (dir / "in").string() + " --output " + out.string() +
                                          " --seed 5 --baseline cifar --cutout 16 --threads " + std::to_string(threads));
      REQUIRE(r.exit_code == 0);
      CHECK(json::parse(r.out)["images"] == 12);
      std::string all;
      for (int i = 0; i < 12; ++i) all += autoaug::testing::read_text(out / ("img" + std::to_string(i) + ".png"));
      outputs.push_back(all);
    }
    CHECK(outputs[0] == outputs[1]);
  }

  TEST_CASE("search, concat and ablate on the synthetic task") {
    const auto dir = autoaug::testing::temp_dir("cli_search");
    const std::string log = (dir / "log.jsonl").string();
    const std::string small = " --train 100 --val 100 --epochs 2 --hidden 16";
    const CommandResult s = run_command(cli() + " search --algo random --budget 12 --batch 6 --seed 3 --out " + log +
                                        small + " 2>/dev/null");
    REQUIRE(s.exit_code == 0);
    const json summary = json::parse(s.out);
    CHECK(summary["entries"] == 12);
    CHECK(std::filesystem::exists(log + ".timing.jsonl"));
    CHECK(std::filesystem::exists(log + ".stats.json"));
    const SearchLog parsed = SearchLog::read(log);
    CHECK(parsed.entries.size() == 12);
    CHECK(parsed.evaluator.find("child-mlp") != std::string::npos);

    const std::string out = (dir / "top.txt").string();
    const CommandResult c = run_command(cli() + " concat --log " + log + " --k 2 --out " + out);
    REQUIRE(c.exit_code == 0);
    CHECK(read_policy_file(out).size() == 10);

    const CommandResult a = run_command(cli() + " ablate --mode randomize --policy " + out + " --repeats 2 --seed 1" +
                                        small);
    REQUIRE(a.exit_code == 0);
    const json rep = json::parse(a.out);
    CHECK(rep["variant_rewards"].size() == 2);
    CHECK(rep.contains("policy_reward"));

    const CommandResult sw = run_command(cli() + " ablate --mode subset-sweep --log " + log +
                                         " --pool 6 --sizes 1,3,6 --repeats 2 --seed 1" + small);
    REQUIRE(sw.exit_code == 0);
    const json sweep = json::parse(sw.out)["sweep"];
    CHECK(sweep.size() == 3);
  }

  TEST_CASE("search through the external stub") {
    const auto dir = autoaug::testing::temp_dir("cli_ext");
    const std::string log = (dir / "log.jsonl").string();
    const CommandResult s = run_command(cli() + " search --algo ppo --budget 8 --batch 4 --out " + log +
                                        " --worker '" + ECHO_WORKER_PATH + " --mode constant --reward 0.25' 2>/dev/null");
    REQUIRE(s.exit_code == 0);
    CHECK(json::parse(s.out)["best_reward"] == 0.25);
  }

  TEST_CASE("grid and bench") {
    const auto dir = autoaug::testing::temp_dir("cli_grid");
    write_image(dir / "in.png", autoaug::testing::random_image(32, 32, 1));
    const CommandResult g = run_command(cli() + " grid --policy " + cifar_policy() + " --image " +
                                        (dir / "in.png").string() + " --cols 4 --out " + (dir / "grid.png").string());
    REQUIRE(g.exit_code == 0);
    CHECK(json::parse(g.out)["width"] == 128);
    CHECK(json::parse(g.out)["height"] == 32 * 25);
    CHECK(std::filesystem::exists(dir / "grid.png.txt"));

    const CommandResult b = run_command(cli() + " bench --policy " + cifar_policy() + " --size 32 --count 300 --threads 2");
    REQUIRE(b.exit_code == 0);
    const json rep = json::parse(b.out);
    CHECK(rep["deterministic"] == true);
    CHECK(rep["per_op"].size() == 16);
  }
}

// Command-line front end: augment, search, policy, concat, ablate, grid, bench.
// Failures print one JSON line {"error":{"type":..,"message":..}} on stderr and
// exit non-zero (2 for usage errors, 1 otherwise).

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "autoaug/bench.hpp"
#include "autoaug/child.hpp"
#include "autoaug/codec.hpp"
#include "autoaug/datasets.hpp"
#include "autoaug/errors.hpp"
#include "autoaug/evaluation.hpp"
#include "autoaug/external.hpp"
#include "autoaug/image_io.hpp"
#include "autoaug/pipeline.hpp"
#include "autoaug/policy.hpp"
#include "autoaug/search.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace autoaug;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Options shared by `search` and `ablate` for building an evaluator.
struct EvalOptions {
  std::string dataset = "synth";
  std::string invariances = "invert";
  std::size_t train = 200;
  std::size_t val = 200;
  int classes = 10;
  std::size_t reduce = 4000;
  double train_fraction = 0.9;
  int epochs = 10;
  int hidden = 64;
  int child_batch = 32;
  double lr = 0.01;
  std::string worker;
  int timeout_s = 600;
};

void add_eval_options(CLI::App* cmd, EvalOptions& o) {
  cmd->add_option("--dataset", o.dataset, "synth, a CIFAR-10 .bin file, or an image manifest");
  cmd->add_option("--invariances", o.invariances, "synthetic task: comma list of invert,shear,rotate or none");
  cmd->add_option("--train", o.train, "synthetic training images");
  cmd->add_option("--val", o.val, "synthetic validation images");
  cmd->add_option("--classes", o.classes, "synthetic classes (2..10)");
  cmd->add_option("--reduce", o.reduce, "real datasets: examples kept before the split");
  cmd->add_option("--train-fraction", o.train_fraction, "real datasets: training share of the reduced set");
  cmd->add_option("--epochs", o.epochs, "child epochs");
  cmd->add_option("--hidden", o.hidden, "child hidden units (0 = softmax regression)");
  cmd->add_option("--child-batch", o.child_batch, "child mini-batch size");
  cmd->add_option("--lr", o.lr, "child initial learning rate");
  cmd->add_option("--worker", o.worker, "external evaluator command line (replaces the built-in child)");
  cmd->add_option("--timeout", o.timeout_s, "external evaluator timeout in seconds");
}

std::vector<std::string> split_words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

struct BuiltEvaluator {
  std::unique_ptr<Evaluator> evaluator;
  std::optional<ChannelStats> stats;
};

BuiltEvaluator make_evaluator(const EvalOptions& o, std::uint64_t seed) {
  BuiltEvaluator out;
  if (!o.worker.empty()) {
    out.evaluator = std::make_unique<ExternalEvaluator>(split_words(o.worker), o.train,
                                                        std::chrono::milliseconds(o.timeout_s * 1000LL));
    return out;
  }
  LabeledDataset train, val;
  if (o.dataset == "synth") {
    SynthOptions so;
    so.train = o.train;
    so.val = o.val;
    so.test = 0;
    so.num_classes = o.classes;
    so.invariances = Invariances::parse(o.invariances);
    SynthSplits s = synth_invariance(so, seed);
    train = std::move(s.train);
    val = std::move(s.val);
  } else {
    const fs::path path = o.dataset;
    LabeledDataset all = path.extension() == ".bin" ? load_cifar10_binary(path) : load_image_directory(path);
    all = reduce_dataset(all, std::min(o.reduce, all.size()), seed);
    std::tie(train, val) = split_dataset(all, o.train_fraction, derive_seed(seed, 1));
  }
  ChildConfig cfg;
  cfg.epochs = o.epochs;
  cfg.hidden = o.hidden;
  cfg.batch_size = o.child_batch;
  cfg.learning_rate = o.lr;
  auto child = std::make_unique<ChildEvaluator>(std::move(train), std::move(val), cfg);
  out.stats = child->stats();
  out.evaluator = std::move(child);
  return out;
}

std::vector<fs::path> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DatasetError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png" || ext == ".ppm") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

json sweep_json(const std::vector<SweepPoint>& pts) {
  json arr = json::array();
  for (const SweepPoint& p : pts) {
    arr.push_back({{"size", p.size}, {"mean_error", p.mean}, {"min_error", p.min}, {"max_error", p.max},
                   {"errors", p.errors}});
  }
  return arr;
}

std::vector<std::size_t> parse_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      out.push_back(std::stoul(item));
    } catch (const std::exception&) {
      throw UsageError("bad size list '" + s + "'");
    }
  }
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"AutoAugment policy search and augmentation toolkit"};
  app.require_subcommand(1);

  // augment
  auto* aug = app.add_subcommand("augment", "apply a policy to every image in a directory");
  std::string aug_policy, aug_in, aug_out, aug_baseline = "none";
  std::uint64_t aug_seed = 0;
  int aug_cutout = 0, aug_threads = 1;
  std::size_t aug_batch = 32;
  aug->add_option("--policy", aug_policy, "policy file")->required();
  aug->add_option("--input", aug_in, "input directory of .png/.ppm images")->required();
  aug->add_option("--output", aug_out, "output directory")->required();
  aug->add_option("--seed", aug_seed, "random seed")->required();
  aug->add_option("--baseline", aug_baseline, "flip + pad-crop stage")->check(CLI::IsMember({"cifar", "none"}));
  aug->add_option("--cutout", aug_cutout, "fixed Cutout side in pixels (0 = off)");
  aug->add_option("--threads", aug_threads, "worker threads");
  aug->add_option("--batch", aug_batch, "mini-batch size for SamplePairing partners");

  // search
  auto* srch = app.add_subcommand("search", "search for an augmentation policy");
  std::string algo = "ppo", log_path;
  std::size_t budget = 500, batch = 32, population = 20;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string optimizer = "adam";
  EvalOptions srch_eval;
  srch->add_option("--algo", algo, "ppo, random or evolution")->check(CLI::IsMember({"ppo", "random", "evolution"}));
  srch->add_option("--budget", budget, "policies to evaluate");
  srch->add_option("--seed", seed, "random seed");
  srch->add_option("--out", log_path, "search log (JSON lines)")->required();
  srch->add_option("--batch", batch, "policies per round (PPO batch)");
  srch->add_option("--population", population, "evolution population");
  srch->add_option("--threads", threads, "evaluation threads");
  srch->add_option("--optimizer", optimizer, "controller optimizer")->check(CLI::IsMember({"adam", "sgd"}));
  add_eval_options(srch, srch_eval);

  // policy show|validate
  auto* pol = app.add_subcommand("policy", "inspect policy files");
  pol->require_subcommand(1);
  std::string show_file, validate_file;
  auto* show = pol->add_subcommand("show", "print a policy");
  show->add_option("file", show_file)->required();
  auto* validate = pol->add_subcommand("validate", "check a policy file");
  validate->add_option("file", validate_file)->required();

  // concat
  auto* cat = app.add_subcommand("concat", "concatenate the best policies of a search log");
  std::string cat_log, cat_out;
  std::size_t cat_k = 5;
  cat->add_option("--log", cat_log)->required();
  cat->add_option("--k", cat_k);
  cat->add_option("--out", cat_out)->required();

  // ablate
  auto* abl = app.add_subcommand("ablate", "randomization and sub-policy count ablations");
  std::string mode, abl_policy, abl_log, sizes_text = "1,2,5,10,20";
  std::size_t repeats = 20, pool_size = 50, subs = 25;
  std::uint64_t abl_seed = 0;
  int abl_threads = 1;
  EvalOptions abl_eval;
  abl->add_option("--mode", mode)->required()->check(CLI::IsMember({"randomize", "random-policy", "subset-sweep"}));
  abl->add_option("--policy", abl_policy, "policy under study / sub-policy pool");
  abl->add_option("--log", abl_log, "search log providing the sub-policy pool (subset-sweep)");
  abl->add_option("--repeats", repeats, "randomizations, random policies, or subsets per size");
  abl->add_option("--pool", pool_size, "sub-policies taken from --log");
  abl->add_option("--sizes", sizes_text, "subset sizes, comma separated");
  abl->add_option("--subs", subs, "sub-policies per random policy when no --policy is given");
  abl->add_option("--seed", abl_seed);
  abl->add_option("--threads", abl_threads);
  add_eval_options(abl, abl_eval);

  // grid
  auto* grid = app.add_subcommand("grid", "render sub-policy applications as an image grid");
  std::string grid_policy, grid_image, grid_out;
  int cols = 4;
  std::uint64_t grid_seed = 0;
  grid->add_option("--policy", grid_policy)->required();
  grid->add_option("--image", grid_image)->required();
  grid->add_option("--cols", cols);
  grid->add_option("--out", grid_out)->required();
  grid->add_option("--seed", grid_seed);

  // bench
  auto* bch = app.add_subcommand("bench", "throughput of policy application");
  std::string bench_policy;
  int size = 32, bench_threads = 1;
  std::size_t count = 10000;
  std::uint64_t bench_seed = 0;
  bch->add_option("--policy", bench_policy)->required();
  bch->add_option("--size", size);
  bch->add_option("--count", count);
  bch->add_option("--threads", bench_threads);
  bch->add_option("--seed", bench_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  if (*aug) {
    const Policy p = read_policy_file(aug_policy);
    AugmentPipeline pl;
    pl.flip_pad_crop = aug_baseline == "cifar";
    pl.policy = p;
    pl.cutout = aug_cutout;
    if (aug_batch < 1) throw UsageError("--batch must be >= 1");
    const auto files = list_images(aug_in);
    std::vector<ImageBuffer> images;
    for (const auto& f : files) images.push_back(read_image(f));
    fs::create_directories(aug_out);
    parallel_for(images.size(), aug_threads, [&](std::size_t i) {
      const std::size_t b0 = i / aug_batch * aug_batch;
      const std::size_t b1 = std::min(images.size(), b0 + aug_batch);
      const BatchContext ctx{std::span<const ImageBuffer>(images).subspan(b0, b1 - b0), i - b0};
      RngStream rng(aug_seed, i);
      const ImageBuffer out = run_pipeline(pl, images[i], rng, ctx);
      write_image(fs::path(aug_out) / files[i].filename().replace_extension(".png"), out);
    });
    std::cout << json{{"images", images.size()}, {"output", aug_out}}.dump() << "\n";
    return 0;
  }

  if (*srch) {
    SearchConfig cfg;
    cfg.algorithm = parse_algorithm(algo);
    cfg.budget = budget;
    cfg.batch_size = batch;
    cfg.population = population;
    cfg.threads = threads;
    cfg.seed = seed;
    cfg.controller.optimizer = optimizer == "sgd" ? ControllerOptimizer::sgd : ControllerOptimizer::adam;
    BuiltEvaluator ev = make_evaluator(srch_eval, derive_seed(seed, 99));
    const SearchLog log = run_search(cfg, *ev.evaluator, [](const RoundMetrics& m) {
      json j = {{"round", m.round}, {"mean_reward", m.mean_reward}, {"best_reward", m.best_reward},
                {"failures", m.failures}};
      std::cerr << j.dump() << "\n";
    });
    log.write(log_path);
    if (ev.stats) {
      std::ofstream(log_path + ".stats.json") << ev.stats->to_json() << "\n";
    }
    json summary = {{"log", log_path}, {"entries", log.entries.size()}};
    if (const auto best = log.best_index()) {
      summary["best_reward"] = *log.entries[*best].reward;
      summary["best_policy"] = serialize_policy(decode_tokens(log.entries[*best].tokens));
    }
    std::cout << summary.dump() << "\n";
    return 0;
  }

  if (*show) {
    const Policy p = read_policy_file(show_file);
    std::map<std::string, int> kinds;
    for (std::size_t i = 0; i < p.size(); ++i) {
      std::cout << i << "\t" << format_sub_policy(p[i]) << "\n";
      for (const auto& op : p[i].ops) ++kinds[std::string(op_name(op.kind))];
    }
    std::cout << json{{"sub_policies", p.size()}, {"operation_counts", kinds}}.dump() << "\n";
    return 0;
  }

  if (*validate) {
    const Policy p = read_policy_file(validate_file);
    std::cout << json{{"valid", true}, {"sub_policies", p.size()}}.dump() << "\n";
    return 0;
  }

  if (*cat) {
    const SearchLog log = SearchLog::read(cat_log);
    const Policy p = top_k_concat(log, cat_k);
    write_policy_file(cat_out, p);
    std::cout << json{{"sub_policies", p.size()}, {"out", cat_out}}.dump() << "\n";
    return 0;
  }

  if (*abl) {
    BuiltEvaluator ev = make_evaluator(abl_eval, derive_seed(abl_seed, 99));
    const std::uint64_t eval_seed = derive_seed(abl_seed, 5);
    json report = {{"mode", mode}, {"evaluator", ev.evaluator->id()}};
    if (mode == "randomize" || mode == "random-policy") {
      std::optional<Policy> base;
      if (!abl_policy.empty()) base = read_policy_file(abl_policy);
      if (mode == "randomize" && !base) throw UsageError("--mode randomize needs --policy");
      std::vector<Policy> variants;
      for (std::size_t r = 0; r < repeats; ++r) {
        RngStream rng(derive_seed(abl_seed, 6), r);
        variants.push_back(mode == "randomize" ? randomize_prob_mag(*base, rng)
                                               : sample_random_policy(base ? base->size() : subs, rng));
      }
      std::vector<double> rewards(variants.size());
      parallel_for(variants.size(), abl_threads,
                   [&](std::size_t i) { rewards[i] = ev.evaluator->evaluate(variants[i], eval_seed); });
      double mean = 0.0;
      for (double r : rewards) mean += r;
      mean /= std::max<std::size_t>(rewards.size(), 1);
      report["variant_rewards"] = rewards;
      report["variant_mean_reward"] = mean;
      if (base) report["policy_reward"] = ev.evaluator->evaluate(*base, eval_seed);
    } else {
      std::vector<SubPolicy> pool;
      if (!abl_log.empty()) {
        pool = subpolicy_pool(SearchLog::read(abl_log), pool_size);
      } else if (!abl_policy.empty()) {
        const Policy p = read_policy_file(abl_policy);
        pool.assign(p.sub_policies().begin(), p.sub_policies().end());
      } else {
        throw UsageError("--mode subset-sweep needs --log or --policy");
      }
      std::vector<std::size_t> sizes = parse_sizes(sizes_text);
      sizes.erase(std::remove_if(sizes.begin(), sizes.end(), [&](std::size_t s) { return s > pool.size(); }),
                  sizes.end());
      report["pool_size"] = pool.size();
      report["sweep"] = sweep_json(subpolicy_subset_sweep(pool, sizes, repeats, *ev.evaluator, abl_seed, abl_threads));
    }
    std::cout << report.dump(2) << "\n";
    return 0;
  }

  if (*grid) {
    const Policy p = read_policy_file(grid_policy);
    const std::vector<ImageBuffer> images = {read_image(grid_image)};
    const GridResult g = render_grid(p, images, grid_seed, cols);
    write_grid(grid_out, g);
    std::cout << json{{"out", grid_out}, {"width", g.image.width()}, {"height", g.image.height()}}.dump() << "\n";
    return 0;
  }

  if (*bch) {
    const BenchReport rep = bench(read_policy_file(bench_policy), size, count, bench_threads, bench_seed);
    std::cout << rep.to_json() << "\n";
    return 0;
  }
  return 0;
}

void report_error(const char* type, const std::string& message) {
  std::cerr << json{{"error", {{"type", type}, {"message", message}}}}.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const UsageError& e) {
    report_error("usage", e.what());
    return 2;
  } catch (const ParseError& e) {
    report_error("parse", e.what());
  } catch (const DecodeError& e) {
    report_error("decode", e.what());
  } catch (const DatasetError& e) {
    report_error("dataset", e.what());
  } catch (const ProtocolError& e) {
    report_error("protocol", e.what());
  } catch (const ArgumentError& e) {
    report_error("argument", e.what());
  } catch (const std::exception& e) {
    report_error("runtime", e.what());
  }
  return 1;
}

#include "autoaug/bench.hpp"

#include <chrono>

#include <nlohmann/json.hpp>

#include "autoaug/errors.hpp"
#include "autoaug/search.hpp"

namespace autoaug {
namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::vector<ImageBuffer> random_images(int size, std::size_t n, std::uint64_t seed) {
  std::vector<ImageBuffer> out;
  for (std::size_t i = 0; i < n; ++i) {
    RngStream rng(derive_seed(seed, 7), i);
    ImageBuffer img(size, size);
    for (auto& v : img.data()) v = static_cast<std::uint8_t>(rng.next_u64() >> 56);
    out.push_back(std::move(img));
  }
  return out;
}

std::uint64_t combine(const std::vector<std::uint64_t>& digests) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint64_t d : digests) {
    h ^= d;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::string BenchReport::to_json() const {
  nlohmann::json ops = nlohmann::json::array();
  for (const OpTiming& t : per_op) {
    ops.push_back({{"op", t.name}, {"calls", t.calls}, {"seconds", t.seconds}, {"us_per_call", t.micros_per_call}});
  }
  nlohmann::json j = {{"image_size", image_size},
                      {"count", count},
                      {"threads", threads},
                      {"single_thread", {{"seconds", single_seconds}, {"images_per_second", single_per_second},
                                         {"images_per_minute", single_per_second * 60.0}}},
                      {"multi_thread", {{"seconds", multi_seconds}, {"images_per_second", multi_per_second}}},
                      {"deterministic", deterministic},
                      {"output_digest", output_digest},
                      {"per_op", ops}};
  return j.dump(2);
}

BenchReport bench(const Policy& p, int image_size, std::size_t count, int threads, std::uint64_t seed) {
  if (count < 1) throw ArgumentError("bench count must be >= 1");
  if (image_size < 1) throw ArgumentError("bench image size must be >= 1");
  if (threads < 1) throw ArgumentError("bench threads must be >= 1");
  BenchReport rep;
  rep.image_size = image_size;
  rep.count = count;
  rep.threads = threads;
  const std::vector<ImageBuffer> pool = random_images(image_size, std::min<std::size_t>(count, 64), seed);
  // Mini-batches of the pool serve as SamplePairing partners.
  auto run_one = [&](std::size_t i) {
    RngStream rng(seed, i);
    const BatchContext ctx{pool, i % pool.size()};
    return image_digest(apply_policy(p, pool[i % pool.size()], rng, ctx));
  };

  std::vector<std::uint64_t> single(count), multi(count);
  auto t0 = Clock::now();
  for (std::size_t i = 0; i < count; ++i) single[i] = run_one(i);
  rep.single_seconds = since(t0);
  t0 = Clock::now();
  parallel_for(count, threads, [&](std::size_t i) { multi[i] = run_one(i); });
  rep.multi_seconds = since(t0);
  rep.single_per_second = static_cast<double>(count) / std::max(rep.single_seconds, 1e-9);
  rep.multi_per_second = static_cast<double>(count) / std::max(rep.multi_seconds, 1e-9);
  rep.deterministic = single == multi;
  rep.output_digest = combine(single);

  const std::size_t per_op_calls = std::min<std::size_t>(count, 2000);
  for (int k = 0; k < kNumOpKinds; ++k) {
    const OperationSpec op{op_from_index(k), 10, 5};
    OpTiming t;
    t.name = std::string(op_name(op.kind));
    t0 = Clock::now();
    for (std::size_t i = 0; i < per_op_calls; ++i) {
      RngStream rng(seed, i);
      const BatchContext ctx{pool, i % pool.size()};
      (void)apply_operation(op, pool[i % pool.size()], rng, ctx);
    }
    t.seconds = since(t0);
    t.calls = per_op_calls;
    t.micros_per_call = t.seconds * 1e6 / static_cast<double>(per_op_calls);
    rep.per_op.push_back(t);
  }
  return rep;
}

}  // namespace autoaug

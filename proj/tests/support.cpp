#include "support.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include <nlohmann/json.hpp>

#include "autoaug/controller.hpp"
#include "autoaug/ops.hpp"

namespace autoaug::testing {

std::filesystem::path source_dir() { return AUTOAUG_SOURCE_DIR; }
std::filesystem::path oracle_dir() { return source_dir() / "tests" / "data" / "oracle"; }
std::filesystem::path policy_dir() { return source_dir() / "data" / "policies"; }

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + p.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::string read_text(const std::filesystem::path& p) {
  const auto b = read_bytes(p);
  return {b.begin(), b.end()};
}

ImageBuffer random_image(int w, int h, std::uint64_t seed) {
  RngStream rng(seed, 0xfeed);
  ImageBuffer img(w, h);
  for (auto& v : img.data()) v = static_cast<std::uint8_t>(rng.next_u64() >> 56);
  return img;
}

std::filesystem::path temp_dir(const std::string& tag) {
  static int counter = 0;
  const auto dir = std::filesystem::temp_directory_path() /
                   ("autoaug_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

namespace {

ImageBuffer apply_named(const std::string& op, const ImageBuffer& img, const nlohmann::json& p) {
  if (op == "invert") return invert(img);
  if (op == "solarize") return solarize(img, p.get<int>());
  if (op == "posterize") return posterize(img, p.get<int>());
  if (op == "equalize") return equalize(img);
  if (op == "autocontrast") return autocontrast(img);
  if (op == "contrast") return enhance(img, EnhanceKind::contrast, p.get<double>());
  if (op == "color") return enhance(img, EnhanceKind::color, p.get<double>());
  if (op == "brightness") return enhance(img, EnhanceKind::brightness, p.get<double>());
  if (op == "sharpness") return enhance(img, EnhanceKind::sharpness, p.get<double>());
  if (op == "shear_x") return affine(img, AffineKind::shear_x, p.get<double>());
  if (op == "shear_y") return affine(img, AffineKind::shear_y, p.get<double>());
  if (op == "translate_x") return affine(img, AffineKind::translate_x, p.get<double>());
  if (op == "translate_y") return affine(img, AffineKind::translate_y, p.get<double>());
  if (op == "rotate") return affine(img, AffineKind::rotate, p.get<double>());
  throw std::runtime_error("unknown fixture op " + op);
}

}  // namespace

std::vector<OracleCaseResult> run_oracle_fixtures() {
  const auto dir = oracle_dir();
  const auto manifest = nlohmann::json::parse(read_text(dir / "manifest.json"));
  std::vector<OracleCaseResult> results;
  for (const auto& set : manifest.at("sets")) {
    const int w = set.at("width");
    const int h = set.at("height");
    const std::size_t n = set.at("count");
    const auto inputs = read_bytes(dir / set.at("inputs").get<std::string>());
    const std::size_t sz = static_cast<std::size_t>(w) * h * 3;
    if (inputs.size() != n * sz) throw std::runtime_error("fixture input size mismatch");
    for (const auto& c : set.at("cases")) {
      const auto expected = read_bytes(dir / c.at("output").get<std::string>());
      if (expected.size() != n * sz) throw std::runtime_error("fixture output size mismatch");
      OracleCaseResult r{set.at("name"), c.at("op"), n, 0, 0};
      for (std::size_t i = 0; i < n; ++i) {
        const ImageBuffer img(w, h, std::vector<std::uint8_t>(inputs.begin() + i * sz, inputs.begin() + (i + 1) * sz));
        const ImageBuffer out = apply_named(r.op, img, c.at("params")[i]);
        std::size_t bad = 0;
        for (std::size_t k = 0; k < sz; ++k) bad += out.data()[k] != expected[i * sz + k];
        r.mismatched_bytes += bad;
        r.mismatched_images += bad > 0;
      }
      results.push_back(r);
    }
  }
  return results;
}

CommandResult run_command(const std::string& cmd, bool merge_stderr) {
  CommandResult r;
  const std::string full = merge_stderr ? cmd + " 2>&1" : cmd;
  FILE* pipe = ::popen(full.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

GradCheckResult controller_gradient_check(std::uint64_t seed, int embedding, int hidden, double step) {
  ControllerConfig cfg;
  cfg.embedding_dim = embedding;
  cfg.hidden_size = hidden;
  cfg.entropy_weight = 0.01;  // large enough that the entropy path shows up in the gradient
  Controller c(cfg, seed);
  RngStream rng(seed, 77);
  std::vector<Trajectory> batch = c.sample(6, rng);
  for (auto& t : batch) t.reward = rng.uniform();
  // Move away from the sampling parameters so ratios differ from 1.
  for (double& p : c.parameters()) p += 0.02 * rng.normal();

  std::vector<double> analytic;
  c.objective(batch, 0.5, &analytic);
  auto params = c.parameters();
  std::vector<double> numeric(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + step;
    const double up = c.objective(batch, 0.5);
    params[i] = keep - step;
    const double down = c.objective(batch, 0.5);
    params[i] = keep;
    numeric[i] = (up - down) / (2.0 * step);
  }

  GradCheckResult r;
  r.parameters = params.size();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double d = std::fabs(analytic[i] - numeric[i]);
    r.max_abs = std::max(r.max_abs, d);
    r.max_elem_rel = std::max(r.max_elem_rel, d / std::max({std::fabs(analytic[i]), std::fabs(numeric[i]), 1e-6}));
  }
  for (const ParamBlock& b : c.parameter_blocks()) {
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t i = b.offset; i < b.offset + b.size; ++i) {
      diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
      na += analytic[i] * analytic[i];
      nn += numeric[i] * numeric[i];
    }
    const double denom = std::sqrt(std::max(na, nn));
    const double rel = denom > 0.0 ? std::sqrt(diff) / denom : 0.0;
    if (rel >= r.max_block_rel) {
      r.max_block_rel = rel;
      r.worst_block = b.name;
    }
  }
  return r;
}

}  // namespace autoaug::testing

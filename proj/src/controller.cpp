#include "autoaug/controller.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <utility>

#include <Eigen/Dense>

#include "autoaug/errors.hpp"

namespace autoaug {
namespace {

using Eigen::MatrixXd;
using CMap = Eigen::Map<const MatrixXd>;

constexpr std::array<const char*, 3> kSlotNames = {"kind", "prob", "mag"};

enum Block : std::size_t {
  kStart,
  kEmbed0,
  kEmbed1,
  kEmbed2,
  kInputWeights,
  kRecurrentWeights,
  kGateBias,
  kHeadW0,
  kHeadB0,
  kHeadW1,
  kHeadB1,
  kHeadW2,
  kHeadB2,
  kNumBlocks
};

constexpr std::size_t embed_block(std::size_t slot) { return kEmbed0 + slot; }
constexpr std::size_t head_weight_block(std::size_t slot) { return kHeadW0 + 2 * slot; }
constexpr std::size_t head_bias_block(std::size_t slot) { return kHeadB0 + 2 * slot; }

int vocab(std::size_t slot) { return vocab_size(static_cast<TokenSlot>(slot)); }

MatrixXd sigmoid(const MatrixXd& x) {
  return (1.0 + (-x.array()).exp()).inverse().matrix();
}

// Column-wise log-softmax.
MatrixXd log_softmax(const MatrixXd& z) {
  MatrixXd out(z.rows(), z.cols());
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    const double m = z.col(j).maxCoeff();
    const double lse = m + std::log((z.col(j).array() - m).exp().sum());
    out.col(j) = z.col(j).array() - lse;
  }
  return out;
}

using Shape = std::pair<Eigen::Index, Eigen::Index>;

std::array<Shape, kNumBlocks> block_shapes(Eigen::Index e, Eigen::Index h) {
  std::array<Shape, kNumBlocks> s{};
  s[kStart] = {e, 1};
  for (std::size_t k = 0; k < 3; ++k) {
    s[embed_block(k)] = {e, vocab(k)};
    s[head_weight_block(k)] = {vocab(k), h};
    s[head_bias_block(k)] = {vocab(k), 1};
  }
  s[kInputWeights] = {4 * h, e};
  s[kRecurrentWeights] = {4 * h, h};
  s[kGateBias] = {4 * h, 1};
  return s;
}

// The flat vector gives no alignment guarantee, and vectorized reductions peel
// differently depending on the start address. Owned copies keep the arithmetic
// independent of where the heap placed the parameters.
std::vector<MatrixXd> unpack(const std::vector<double>& flat, const std::vector<ParamBlock>& blocks,
                             const std::array<Shape, kNumBlocks>& shapes) {
  std::vector<MatrixXd> out(kNumBlocks);
  for (std::size_t b = 0; b < kNumBlocks; ++b) {
    out[b] = CMap(flat.data() + blocks[b].offset, shapes[b].first, shapes[b].second);
  }
  return out;
}

}  // namespace

double Trajectory::joint_log_prob() const {
  return std::accumulate(log_probs.begin(), log_probs.end(), 0.0);
}

struct Controller::Cache {
  std::size_t batch = 0;
  std::vector<MatrixXd> x, in_gate, forget_gate, cell_input, out_gate, cell, cell_tanh, hidden, logp;
};

Controller::Controller(const ControllerConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  if (cfg.embedding_dim < 1 || cfg.hidden_size < 1) {
    throw ArgumentError("controller dimensions must be positive");
  }
  if (cfg.ppo_epochs < 1) throw ArgumentError("ppo_epochs must be >= 1");
  const std::size_t e = static_cast<std::size_t>(cfg.embedding_dim);
  const std::size_t h = static_cast<std::size_t>(cfg.hidden_size);
  std::size_t offset = 0;
  auto add = [&](std::string name, std::size_t size) {
    blocks_.push_back(ParamBlock{std::move(name), offset, size});
    offset += size;
  };
  add("start", e);
  for (std::size_t s = 0; s < 3; ++s) add(std::string("embed.") + kSlotNames[s], e * vocab(s));
  add("lstm.input_weights", 4 * h * e);
  add("lstm.recurrent_weights", 4 * h * h);
  add("lstm.bias", 4 * h);
  for (std::size_t s = 0; s < 3; ++s) {
    add(std::string("head.") + kSlotNames[s] + ".weight", vocab(s) * h);
    add(std::string("head.") + kSlotNames[s] + ".bias", vocab(s));
  }
  params_.resize(offset);
  RngStream rng(seed, 0);
  for (double& p : params_) p = rng.uniform(-cfg.init_range, cfg.init_range);
  adam_m_.assign(offset, 0.0);
  adam_v_.assign(offset, 0.0);
}

const ParamBlock& Controller::block(const std::string& name) const {
  for (const ParamBlock& b : blocks_) {
    if (b.name == name) return b;
  }
  throw ArgumentError("no parameter block named " + name);
}

void Controller::forward(std::span<const TokenSequence> forced, RngStream* rng,
                         std::vector<TokenSequence>* sampled, Cache& cache) const {
  const Eigen::Index e = cfg_.embedding_dim;
  const Eigen::Index h = cfg_.hidden_size;
  const std::size_t batch = rng ? sampled->size() : forced.size();
  const Eigen::Index b = static_cast<Eigen::Index>(batch);
  const std::vector<MatrixXd> w = unpack(params_, blocks_, block_shapes(e, h));
  const MatrixXd& start = w[kStart];
  const MatrixXd& wx = w[kInputWeights];
  const MatrixXd& wh = w[kRecurrentWeights];
  const MatrixXd& bias = w[kGateBias];

  cache.batch = batch;
  for (auto* v : {&cache.x, &cache.in_gate, &cache.forget_gate, &cache.cell_input, &cache.out_gate,
                  &cache.cell, &cache.cell_tanh, &cache.hidden, &cache.logp}) {
    v->assign(kTokensPerPolicy, MatrixXd());
  }

  auto token_at = [&](std::size_t t, std::size_t j) {
    return rng ? (*sampled)[j][t] : forced[j][t];
  };

  MatrixXd hidden = MatrixXd::Zero(h, b);
  MatrixXd cell = MatrixXd::Zero(h, b);
  for (std::size_t t = 0; t < kTokensPerPolicy; ++t) {
    const std::size_t slot = t % 3;
    MatrixXd x(e, b);
    if (t == 0) {
      x = start.replicate(1, b);
    } else {
      const std::size_t prev = (t - 1) % 3;
      const MatrixXd& emb = w[embed_block(prev)];
      for (std::size_t j = 0; j < batch; ++j) x.col(j) = emb.col(token_at(t - 1, j));
    }
    MatrixXd gates = wx * x + wh * hidden;
    gates.colwise() += bias.col(0);
    MatrixXd ig = sigmoid(gates.topRows(h));
    MatrixXd fg = sigmoid(gates.middleRows(h, h));
    MatrixXd gg = gates.middleRows(2 * h, h).array().tanh().matrix();
    MatrixXd og = sigmoid(gates.bottomRows(h));
    cell = (fg.array() * cell.array() + ig.array() * gg.array()).matrix();
    MatrixXd ct = cell.array().tanh().matrix();
    hidden = (og.array() * ct.array()).matrix();

    const Eigen::Index v = vocab(slot);
    const MatrixXd& hw = w[head_weight_block(slot)];
    const MatrixXd& hb = w[head_bias_block(slot)];
    MatrixXd logits = hw * hidden;
    logits.colwise() += hb.col(0);
    MatrixXd lp = log_softmax(logits);

    if (rng) {
      for (std::size_t j = 0; j < batch; ++j) {
        const double u = rng->uniform();
        double cum = 0.0;
        int choice = static_cast<int>(v) - 1;
        for (Eigen::Index k = 0; k < v; ++k) {
          cum += std::exp(lp(k, static_cast<Eigen::Index>(j)));
          if (u < cum) {
            choice = static_cast<int>(k);
            break;
          }
        }
        (*sampled)[j][t] = choice;
      }
    }

    cache.x[t] = std::move(x);
    cache.in_gate[t] = std::move(ig);
    cache.forget_gate[t] = std::move(fg);
    cache.cell_input[t] = std::move(gg);
    cache.out_gate[t] = std::move(og);
    cache.cell[t] = cell;
    cache.cell_tanh[t] = std::move(ct);
    cache.hidden[t] = hidden;
    cache.logp[t] = std::move(lp);
  }
}

std::vector<Trajectory> Controller::sample(std::size_t count, RngStream& rng) const {
  std::vector<TokenSequence> sampled(count);
  if (count == 0) return {};
  Cache cache;
  forward({}, &rng, &sampled, cache);
  std::vector<Trajectory> out(count);
  for (std::size_t j = 0; j < count; ++j) {
    out[j].tokens = sampled[j];
    for (std::size_t t = 0; t < kTokensPerPolicy; ++t) {
      out[j].log_probs[t] = cache.logp[t](sampled[j][t], static_cast<Eigen::Index>(j));
    }
  }
  return out;
}

Trajectory Controller::sample(RngStream& rng) const { return sample(1, rng).front(); }

std::vector<std::vector<double>> Controller::distributions(const TokenSequence& tokens) const {
  validate_tokens(tokens);
  Cache cache;
  const std::array<TokenSequence, 1> batch = {tokens};
  forward(batch, nullptr, nullptr, cache);
  std::vector<std::vector<double>> out(kTokensPerPolicy);
  for (std::size_t t = 0; t < kTokensPerPolicy; ++t) {
    const auto& lp = cache.logp[t];
    out[t].resize(static_cast<std::size_t>(lp.rows()));
    for (Eigen::Index k = 0; k < lp.rows(); ++k) out[t][k] = std::exp(lp(k, 0));
  }
  return out;
}

std::array<double, kTokensPerPolicy> Controller::log_probs(const TokenSequence& tokens) const {
  validate_tokens(tokens);
  Cache cache;
  const std::array<TokenSequence, 1> batch = {tokens};
  forward(batch, nullptr, nullptr, cache);
  std::array<double, kTokensPerPolicy> out{};
  for (std::size_t t = 0; t < kTokensPerPolicy; ++t) out[t] = cache.logp[t](tokens[t], 0);
  return out;
}

double Controller::evaluate(std::span<const Trajectory> batch, double baseline,
                            std::vector<double>* grad, std::vector<SurrogateTerm>* terms,
                            double* entropy_out) const {
  if (batch.empty()) throw ArgumentError("PPO batch must not be empty");
  const std::size_t n = batch.size();
  const Eigen::Index nb = static_cast<Eigen::Index>(n);
  std::vector<TokenSequence> tokens(n);
  for (std::size_t j = 0; j < n; ++j) {
    validate_tokens(batch[j].tokens);
    tokens[j] = batch[j].tokens;
  }
  Cache cache;
  forward(tokens, nullptr, nullptr, cache);

  const double eps = cfg_.clip_epsilon;
  const double beta = cfg_.entropy_weight;
  std::vector<double> coef(n);
  double surrogate_sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double new_lp = 0.0;
    for (std::size_t t = 0; t < kTokensPerPolicy; ++t) {
      new_lp += cache.logp[t](tokens[j][t], static_cast<Eigen::Index>(j));
    }
    const double ratio = std::exp(new_lp - batch[j].joint_log_prob());
    const double adv = batch[j].reward - baseline;
    const double unclipped = ratio * adv;
    const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps) * adv;
    const bool use_unclipped = unclipped <= clipped;
    const double value = use_unclipped ? unclipped : clipped;
    coef[j] = use_unclipped ? ratio * adv : 0.0;
    surrogate_sum += value;
    if (terms) terms->push_back(SurrogateTerm{ratio, adv, value, !use_unclipped});
  }

  // Per-step entropies and d(objective)/d(logits).
  std::vector<MatrixXd> dlogits(kTokensPerPolicy);
  double entropy_sum = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t t = 0; t < kTokensPerPolicy; ++t) {
    const MatrixXd& lp = cache.logp[t];
    const MatrixXd prob = lp.array().exp().matrix();
    const Eigen::RowVectorXd ent = -(prob.array() * lp.array()).colwise().sum();
    entropy_sum += ent.sum();
    if (grad) {
      MatrixXd d(lp.rows(), nb);
      for (Eigen::Index j = 0; j < nb; ++j) {
        // coef * (onehot - p) - beta * p * (log p + H)
        d.col(j) = -coef[j] * prob.col(j) -
                   beta * (prob.col(j).array() * (lp.col(j).array() + ent(j))).matrix();
        d(tokens[j][t], j) += coef[j];
      }
      dlogits[t] = d * inv_n;
    }
  }
  if (entropy_out) *entropy_out = entropy_sum * inv_n;

  if (grad) {
    const Eigen::Index e = cfg_.embedding_dim;
    const Eigen::Index h = cfg_.hidden_size;
    const auto shapes = block_shapes(e, h);
    const std::vector<MatrixXd> w = unpack(params_, blocks_, shapes);
    std::vector<MatrixXd> gw(kNumBlocks);
    for (std::size_t b = 0; b < kNumBlocks; ++b) gw[b] = MatrixXd::Zero(shapes[b].first, shapes[b].second);
    const MatrixXd& wx = w[kInputWeights];
    const MatrixXd& wh = w[kRecurrentWeights];
    MatrixXd& g_start = gw[kStart];
    MatrixXd& g_wx = gw[kInputWeights];
    MatrixXd& g_wh = gw[kRecurrentWeights];
    MatrixXd& g_bias = gw[kGateBias];

    MatrixXd dh_next = MatrixXd::Zero(h, nb);
    MatrixXd dc_next = MatrixXd::Zero(h, nb);
    const MatrixXd zeros = MatrixXd::Zero(h, nb);
    for (std::size_t t = kTokensPerPolicy; t-- > 0;) {
      const std::size_t slot = t % 3;
      const MatrixXd& hw = w[head_weight_block(slot)];
      MatrixXd& g_hw = gw[head_weight_block(slot)];
      MatrixXd& g_hb = gw[head_bias_block(slot)];
      const MatrixXd& dz = dlogits[t];
      g_hw.noalias() += dz * cache.hidden[t].transpose();
      g_hb += dz.rowwise().sum();

      const MatrixXd dh = hw.transpose() * dz + dh_next;
      const auto& ig = cache.in_gate[t].array();
      const auto& fg = cache.forget_gate[t].array();
      const auto& gg = cache.cell_input[t].array();
      const auto& og = cache.out_gate[t].array();
      const auto& ct = cache.cell_tanh[t].array();
      const MatrixXd& c_prev = t > 0 ? cache.cell[t - 1] : zeros;
      const MatrixXd& h_prev = t > 0 ? cache.hidden[t - 1] : zeros;

      const MatrixXd dc = (dh.array() * og * (1.0 - ct.square()) + dc_next.array()).matrix();
      MatrixXd dgates(4 * h, nb);
      dgates.topRows(h) = (dc.array() * gg * ig * (1.0 - ig)).matrix();
      dgates.middleRows(h, h) = (dc.array() * c_prev.array() * fg * (1.0 - fg)).matrix();
      dgates.middleRows(2 * h, h) = (dc.array() * ig * (1.0 - gg.square())).matrix();
      dgates.bottomRows(h) = (dh.array() * ct * og * (1.0 - og)).matrix();
      dc_next = (dc.array() * fg).matrix();

      g_wx.noalias() += dgates * cache.x[t].transpose();
      g_wh.noalias() += dgates * h_prev.transpose();
      g_bias += dgates.rowwise().sum();
      const MatrixXd dx = wx.transpose() * dgates;
      dh_next = wh.transpose() * dgates;
      if (t == 0) {
        g_start += dx.rowwise().sum();
      } else {
        const std::size_t prev = (t - 1) % 3;
        MatrixXd& g_emb = gw[embed_block(prev)];
        for (Eigen::Index j = 0; j < nb; ++j) g_emb.col(tokens[j][t - 1]) += dx.col(j);
      }
    }
    grad->resize(params_.size());
    for (std::size_t b = 0; b < kNumBlocks; ++b) {
      std::copy(gw[b].data(), gw[b].data() + gw[b].size(), grad->begin() + static_cast<std::ptrdiff_t>(blocks_[b].offset));
    }
  }
  return surrogate_sum * inv_n + beta * entropy_sum * inv_n;
}

double Controller::objective(std::span<const Trajectory> batch, double baseline,
                             std::vector<double>* grad) const {
  return evaluate(batch, baseline, grad, nullptr, nullptr);
}

std::vector<SurrogateTerm> Controller::surrogate_terms(std::span<const Trajectory> batch,
                                                       double baseline) const {
  std::vector<SurrogateTerm> terms;
  evaluate(batch, baseline, nullptr, &terms, nullptr);
  return terms;
}

PpoMetrics Controller::ppo_update(std::span<const Trajectory> batch) {
  if (batch.empty()) throw ArgumentError("PPO batch must not be empty");
  PpoMetrics m;
  double reward_sum = 0.0;
  for (const Trajectory& tr : batch) reward_sum += tr.reward;
  m.mean_reward = reward_sum / static_cast<double>(batch.size());
  if (!std::isfinite(m.mean_reward)) {
    m.accepted = false;
    m.diagnostic = "non-finite reward in batch";
    return m;
  }
  const double baseline = baseline_.value_or(m.mean_reward);
  m.baseline = baseline;

  std::vector<double> grad;
  std::vector<double> params_before = params_;
  std::vector<double> m_before = adam_m_;
  std::vector<double> v_before = adam_v_;
  const std::uint64_t t_before = adam_t_;
  for (int epoch = 0; epoch < cfg_.ppo_epochs; ++epoch) {
    std::vector<SurrogateTerm> terms;
    double entropy = 0.0;
    const double obj = evaluate(batch, baseline, &grad, &terms, &entropy);
    double norm2 = 0.0;
    bool finite = std::isfinite(obj);
    for (double gi : grad) {
      norm2 += gi * gi;
      finite = finite && std::isfinite(gi);
    }
    if (!finite) {
      params_ = std::move(params_before);
      adam_m_ = std::move(m_before);
      adam_v_ = std::move(v_before);
      adam_t_ = t_before;
      m.accepted = false;
      m.diagnostic = "non-finite gradient in PPO epoch " + std::to_string(epoch) + "; update rejected";
      return m;
    }
    if (epoch == 0) {
      m.entropy = entropy;
      m.grad_norm = std::sqrt(norm2);
      double kl = 0.0;
      double surrogate = 0.0;
      std::size_t clipped = 0;
      for (std::size_t j = 0; j < terms.size(); ++j) {
        kl -= std::log(terms[j].ratio);
        surrogate += terms[j].value;
        if (std::fabs(terms[j].ratio - 1.0) > cfg_.clip_epsilon) ++clipped;
      }
      m.approx_kl = kl / static_cast<double>(terms.size());
      m.surrogate = surrogate / static_cast<double>(terms.size());
      m.clip_fraction = static_cast<double>(clipped) / static_cast<double>(terms.size());
    }
    // Gradient ascent on the objective.
    if (cfg_.optimizer == ControllerOptimizer::sgd) {
      for (std::size_t i = 0; i < params_.size(); ++i) params_[i] += cfg_.learning_rate * grad[i];
    } else {
      ++adam_t_;
      const double b1 = cfg_.adam_beta1;
      const double b2 = cfg_.adam_beta2;
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(adam_t_));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(adam_t_));
      for (std::size_t i = 0; i < params_.size(); ++i) {
        adam_m_[i] = b1 * adam_m_[i] + (1.0 - b1) * grad[i];
        adam_v_[i] = b2 * adam_v_[i] + (1.0 - b2) * grad[i] * grad[i];
        const double mhat = adam_m_[i] / c1;
        const double vhat = adam_v_[i] / c2;
        params_[i] += cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.adam_epsilon);
      }
    }
  }
  baseline_ = cfg_.baseline_decay * baseline + (1.0 - cfg_.baseline_decay) * m.mean_reward;
  ++steps_;
  return m;
}

}  // namespace autoaug

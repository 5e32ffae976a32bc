#include "autoaug/child.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

#include <Eigen/Dense>

#include "autoaug/errors.hpp"

namespace autoaug {
namespace {

using MatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic>;
using VectorF = Eigen::Matrix<float, Eigen::Dynamic, 1>;

struct Layer {
  MatrixF w, vw;
  VectorF b, vb;
};

void init_layer(Layer& l, int out, int in, RngStream& rng) {
  const double limit = std::sqrt(6.0 / (in + out));
  l.w.resize(out, in);
  for (Eigen::Index j = 0; j < l.w.cols(); ++j) {
    for (Eigen::Index i = 0; i < l.w.rows(); ++i) l.w(i, j) = static_cast<float>(rng.uniform(-limit, limit));
  }
  l.b = VectorF::Zero(out);
  l.vw = MatrixF::Zero(out, in);
  l.vb = VectorF::Zero(out);
}

void sgd_step(Layer& l, const MatrixF& gw, const VectorF& gb, float lr, float mu, float wd) {
  l.vw = mu * l.vw + gw + wd * l.w;
  l.vb = mu * l.vb + gb;
  l.w -= lr * l.vw;
  l.b -= lr * l.vb;
}

// Columns of `logits` become softmax probabilities in place; returns summed NLL of `labels`.
float softmax_nll(MatrixF& logits, const std::vector<int>& labels) {
  float loss = 0.0f;
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    auto col = logits.col(j);
    const float m = col.maxCoeff();
    col = (col.array() - m).exp();
    const float s = col.sum();
    col /= s;
    loss -= std::log(std::max(col(labels[static_cast<std::size_t>(j)]), 1e-30f));
  }
  return loss;
}

std::uint64_t digest_floats(std::uint64_t h, const float* p, std::size_t n) {
  const auto* bytes = reinterpret_cast<const unsigned char*>(p);
  for (std::size_t i = 0; i < n * sizeof(float); ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Mlp {
 public:
  Mlp(int inputs, int hidden, int classes, RngStream& rng) : hidden_(hidden) {
    if (hidden > 0) {
      init_layer(l1_, hidden, inputs, rng);
      init_layer(l2_, classes, hidden, rng);
    } else {
      init_layer(l2_, classes, inputs, rng);
    }
  }

  MatrixF logits(const MatrixF& x, MatrixF* h) const {
    if (hidden_ == 0) return (l2_.w * x).colwise() + l2_.b;
    *h = ((l1_.w * x).colwise() + l1_.b).cwiseMax(0.0f);
    return (l2_.w * *h).colwise() + l2_.b;
  }

  float train_batch(const MatrixF& x, const std::vector<int>& labels, float lr, float mu, float wd) {
    MatrixF h;
    MatrixF p = logits(x, &h);
    const float loss = softmax_nll(p, labels);
    const float inv_b = 1.0f / static_cast<float>(x.cols());
    for (Eigen::Index j = 0; j < p.cols(); ++j) p(labels[static_cast<std::size_t>(j)], j) -= 1.0f;
    p *= inv_b;
    const MatrixF& a = hidden_ > 0 ? h : x;
    const MatrixF g2 = p * a.transpose();
    const VectorF gb2 = p.rowwise().sum();
    if (hidden_ > 0) {
      MatrixF dh = l2_.w.transpose() * p;
      dh = dh.cwiseProduct((h.array() > 0.0f).cast<float>().matrix());
      const MatrixF g1 = dh * x.transpose();
      const VectorF gb1 = dh.rowwise().sum();
      sgd_step(l1_, g1, gb1, lr, mu, wd);
    }
    sgd_step(l2_, g2, gb2, lr, mu, wd);
    return loss;
  }

  int predict_into(const MatrixF& x, std::vector<int>& out) const {
    MatrixF h;
    const MatrixF z = logits(x, &h);
    out.resize(static_cast<std::size_t>(z.cols()));
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      Eigen::Index best = 0;
      z.col(j).maxCoeff(&best);
      out[static_cast<std::size_t>(j)] = static_cast<int>(best);
    }
    return static_cast<int>(z.cols());
  }

  std::uint64_t digest() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const Layer* l : {&l1_, &l2_}) {
      h = digest_floats(h, l->w.data(), static_cast<std::size_t>(l->w.size()));
      h = digest_floats(h, l->b.data(), static_cast<std::size_t>(l->b.size()));
    }
    return h;
  }

 private:
  int hidden_;
  Layer l1_, l2_;
};

// Zero mean, unit variance per example (column).
void normalize_columns(MatrixF& x) {
  const auto d = static_cast<float>(x.rows());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    auto col = x.col(j);
    const float mean = col.sum() / d;
    col.array() -= mean;
    const float var = col.squaredNorm() / d;
    col /= std::sqrt(var + 1e-5f);
  }
}

void check_split(const LabeledDataset& d, const char* name) {
  if (d.empty()) throw DatasetError(std::string(name) + " split is empty");
  d.validate();
}

}  // namespace

void ChildConfig::validate() const {
  if (epochs < 1) throw ArgumentError("child epochs must be >= 1");
  if (batch_size < 1) throw ArgumentError("child batch size must be >= 1");
  if (hidden < 0) throw ArgumentError("child hidden size must be >= 0");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ArgumentError("child learning rate must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw ArgumentError("child momentum must be in [0, 1)");
  if (weight_decay < 0.0) throw ArgumentError("child weight decay must be >= 0");
  if (cutout < 0) throw ArgumentError("child cutout must be >= 0");
}

double cosine_lr(double lr0, std::size_t step, std::size_t total) {
  if (total == 0) return lr0;
  return 0.5 * lr0 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(total)));
}

Policy identity_policy() {
  return Policy({SubPolicy{{OperationSpec{OpKind::Invert, 0, 0}, OperationSpec{OpKind::Invert, 0, 0}}}});
}

ChildResult train_child(const LabeledDataset& train, const LabeledDataset& val, const ChannelStats& stats,
                        const Policy* policy, const ChildConfig& cfg) {
  cfg.validate();
  check_split(train, "training");
  check_split(val, "validation");
  if (train.distinct_labels() < 2) throw DatasetError("training set has a single class");
  if (!val.images.front().same_shape(train.images.front())) {
    throw DatasetError("training and validation images differ in size");
  }
  const int classes = std::max(train.num_classes, val.num_classes);
  const std::size_t n = train.size();
  const int dim = static_cast<int>(train.images.front().bytes().size());

  AugmentPipeline pipeline;
  pipeline.flip_pad_crop = cfg.baseline_augment;
  if (policy) pipeline.policy = *policy;
  pipeline.cutout = cfg.cutout;

  RngStream init_rng(derive_seed(cfg.seed, 1), 0);
  RngStream shuffle_rng(derive_seed(cfg.seed, 2), 0);
  const std::uint64_t augment_seed = derive_seed(cfg.seed, 3);
  Mlp model(dim, cfg.hidden, classes, init_rng);

  // Un-augmented inputs are standardized once and reused.
  MatrixF base(dim, static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) standardize_into(train.images[i], stats, base.col(i).data());
  if (cfg.input_norm) normalize_columns(base);

  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  const std::size_t batches_per_epoch = (n + bs - 1) / bs;
  const std::size_t total = batches_per_epoch * static_cast<std::size_t>(cfg.epochs);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<ImageBuffer> batch_images;
  std::vector<int> labels;
  MatrixF x;
  ChildResult result;
  std::size_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.uniform_int(i)]);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t b = std::min(bs, n - start);
      x.resize(dim, static_cast<Eigen::Index>(b));
      labels.resize(b);
      if (pipeline.empty()) {
        for (std::size_t j = 0; j < b; ++j) {
          x.col(j) = base.col(order[start + j]);
          labels[j] = train.labels[order[start + j]];
        }
      } else {
        batch_images.clear();
        for (std::size_t j = 0; j < b; ++j) batch_images.push_back(train.images[order[start + j]]);
        for (std::size_t j = 0; j < b; ++j) {
          RngStream rng(augment_seed, static_cast<std::uint64_t>(epoch) * n + start + j);
          const BatchContext ctx{batch_images, j};
          const ImageBuffer aug = run_pipeline(pipeline, batch_images[j], rng, ctx);
          standardize_into(aug, stats, x.col(j).data());
          labels[j] = train.labels[order[start + j]];
        }
        if (cfg.input_norm) normalize_columns(x);
      }
      const auto lr = static_cast<float>(cosine_lr(cfg.learning_rate, step, total));
      epoch_loss += model.train_batch(x, labels, lr, static_cast<float>(cfg.momentum),
                                      static_cast<float>(cfg.weight_decay));
      ++step;
    }
    result.final_train_loss = epoch_loss / static_cast<double>(n);
  }
  result.steps = step;

  std::size_t correct = 0;
  std::vector<int> pred;
  for (std::size_t start = 0; start < val.size(); start += 256) {
    const std::size_t b = std::min<std::size_t>(256, val.size() - start);
    x.resize(dim, static_cast<Eigen::Index>(b));
    for (std::size_t j = 0; j < b; ++j) standardize_into(val.images[start + j], stats, x.col(j).data());
    if (cfg.input_norm) normalize_columns(x);
    model.predict_into(x, pred);
    for (std::size_t j = 0; j < b; ++j) correct += pred[j] == val.labels[start + j];
  }
  result.val_accuracy = static_cast<double>(correct) / static_cast<double>(val.size());
  result.weights_digest = model.digest();
  return result;
}

}  // namespace autoaug

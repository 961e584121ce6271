#include "oodlab/synthetic.hpp"

#include <cmath>

#include "oodlab/random.hpp"

namespace oodlab {

namespace {

constexpr Index kNoisyAxes = 6;

Vector noise(Rng& rng, Index dim, double sigma) {
  Vector v(dim);
  for (Index d = 0; d < dim; ++d) v[d] = rng.normal() * (d < kNoisyAxes ? sigma : 0.05 * sigma);
  return v;
}

void attach_passes(FeatureSet& set, const ClassifierHead& head, const SyntheticOptions& o, Rng& rng) {
  const double keep = 1.0 - o.dropout;
  for (int t = 0; t < o.passes; ++t) {
    Matrix masked = set.features;
    for (Index i = 0; i < masked.rows(); ++i) {
      for (Index d = 0; d < masked.cols(); ++d) masked(i, d) = rng.uniform() < keep ? masked(i, d) / keep : 0.0;
    }
    set.passes.push_back(head.logits(masked));
  }
}

// Stand-ins for trained confidence heads: cosine to the nearest class mean plus a little noise.
void attach_external(FeatureSet& set, const Matrix& means, Rng& rng) {
  Vector conf(set.size());
  for (Index i = 0; i < set.size(); ++i) {
    const Vector h = set.features.row(i).transpose();
    double best = -1.0;
    for (Index c = 0; c < means.rows(); ++c) best = std::max(best, h.dot(means.row(c).transpose()) / (h.norm() * means.row(c).norm()));
    conf[i] = best + 0.01 * rng.normal();
  }
  set.external["Confidence"] = conf;
  set.external["Abstention"] = (1.0 - conf.array()).matrix();
}

Matrix unit(const Matrix& m) {
  Matrix out = m;
  for (Index i = 0; i < out.rows(); ++i) out.row(i).normalize();
  return out;
}

}  // namespace

SyntheticBenchmark make_synthetic(const SyntheticOptions& o) {
  require(o.dim > kNoisyAxes, ErrorKind::InvalidConfig, "synthetic benchmark needs more than 6 dimensions");
  require(o.clip_dim >= 4, ErrorKind::InvalidConfig, "synthetic CLIP dimension must be at least 4");
  Rng rng(o.seed);
  const double a = o.separation * o.sigma;
  Matrix means = Matrix::Zero(2, o.dim);
  means(0, 0) = a;
  means(1, 1) = a;

  SyntheticBenchmark b;
  b.head.weights = means * (o.logit_scale / (a * a));
  b.head.bias = Vector::Zero(2);

  auto id_set = [&](Index n, const std::string& name, double flip) {
    FeatureSet s;
    s.dataset_id = name;
    s.features.resize(n, o.dim);
    Labels labels(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      const int y = static_cast<int>(i % 2) + 1;
      s.features.row(i) = (means.row(y - 1).transpose() + noise(rng, o.dim, o.sigma)).transpose();
      labels[static_cast<std::size_t>(i)] = (flip > 0.0 && rng.uniform() < flip) ? 3 - y : y;
    }
    s.labels = std::move(labels);
    s.logits = b.head.logits(s.features);
    return s;
  };

  b.train = id_set(o.n_train, "train", 0.0);
  b.validation = id_set(o.n_validation, "validation", o.label_noise);
  b.test = id_set(o.n_test, "test", o.label_noise);
  const Vector midpoint = 0.5 * (means.row(0) + means.row(1)).transpose();
  for (std::size_t j = 0; j < o.ood_shifts.size(); ++j) {
    FeatureSet s;
    s.dataset_id = o.ood_shifts.size() == 1 ? "ood" : "ood-" + std::to_string(j + 1);
    s.features.resize(o.n_ood, o.dim);
    for (Index i = 0; i < o.n_ood; ++i) {
      Vector h = midpoint + noise(rng, o.dim, o.sigma);
      h[kNoisyAxes] += o.ood_shifts[j] * o.sigma;
      s.features.row(i) = h.transpose();
    }
    s.labels = Labels(static_cast<std::size_t>(o.n_ood), kOodLabel);
    s.logits = b.head.logits(s.features);
    b.ood.push_back(std::move(s));
  }

  if (o.passes > 0) {
    attach_passes(b.test, b.head, o, rng);
    attach_passes(b.validation, b.head, o, rng);
    for (FeatureSet& s : b.ood) attach_passes(s, b.head, o, rng);
  }
  attach_external(b.test, means, rng);
  attach_external(b.validation, means, rng);
  for (FeatureSet& s : b.ood) attach_external(s, means, rng);

  // CLIP-like embeddings: class clusters around e_1, e_2; OOD clusters drift toward e_3.
  const Index cd = o.clip_dim;
  Matrix protos = Matrix::Zero(2, cd);
  protos(0, 0) = 1.0;
  protos(1, 1) = 1.0;
  protos.col(cd - 1).setConstant(0.2);
  b.clip_id.dataset_id = "test";
  b.clip_id.text_prototypes = unit(protos);
  b.clip_id.embeddings.resize(o.clip_rows, cd);
  Labels clip_labels(static_cast<std::size_t>(o.clip_rows));
  for (Index i = 0; i < o.clip_rows; ++i) {
    const int y = static_cast<int>(i % 2) + 1;
    Vector z = Vector::Zero(cd);
    z[y - 1] = 1.0;
    for (Index d = 0; d < cd; ++d) z[d] += 0.25 * rng.normal();
    b.clip_id.embeddings.row(i) = z.normalized().transpose();
    clip_labels[static_cast<std::size_t>(i)] = y;
  }
  b.clip_id.labels = std::move(clip_labels);
  for (std::size_t j = 0; j < b.ood.size(); ++j) {
    EmbeddingSet e;
    e.dataset_id = b.ood[j].dataset_id;
    e.embeddings.resize(o.clip_rows, cd);
    const double drift = o.ood_shifts[j] / 6.0;
    for (Index i = 0; i < o.clip_rows; ++i) {
      Vector z = Vector::Zero(cd);
      z[0] = z[1] = std::sqrt(0.5);
      z[2] = drift;
      for (Index d = 0; d < cd; ++d) z[d] += 0.25 * rng.normal();
      e.embeddings.row(i) = z.normalized().transpose();
    }
    b.clip_ood.push_back(std::move(e));
  }
  return b;
}

}  // namespace oodlab

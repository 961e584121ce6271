#include "oodlab/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "oodlab/random.hpp"
#include "oodlab/registry.hpp"

namespace oodlab {

namespace {

void check_probs(const Eigen::Ref<const Vector>& p) {
  require(p.size() > 0, ErrorKind::InvalidInput, "empty probability vector");
  require(p.allFinite(), ErrorKind::InvalidInput, "probability vector is not finite");
  require(p.minCoeff() >= -1e-12 && p.maxCoeff() <= 1.0 + 1e-12, ErrorKind::InvalidInput,
          "probabilities must lie in [0, 1]");
  require(std::abs(p.sum() - 1.0) <= 1e-8, ErrorKind::InvalidInput,
          "probabilities must sum to 1");
}

Vector sorted_descending(const Eigen::Ref<const Vector>& p) {
  Vector s = p;
  std::sort(s.data(), s.data() + s.size(), std::greater<>());
  return s;
}

}  // namespace

void HyperParams::validate() const {
  require(gen_gamma > 0.0 && gen_gamma < 1.0, ErrorKind::InvalidConfig, "gen_gamma must lie in (0, 1)");
  require(ren_alpha > 0.0 && ren_alpha < 1.0, ErrorKind::InvalidConfig, "ren_alpha must lie in (0, 1)");
  require(!top_m || *top_m >= 1, ErrorKind::InvalidConfig, "top_m must be at least 1");
  require(temperature > 0.0 && std::isfinite(temperature), ErrorKind::InvalidConfig,
          "temperature must be positive");
  require(nnguide_alpha > 0.0 && nnguide_alpha < 1.0, ErrorKind::InvalidConfig,
          "nnguide_alpha must lie in (0, 1)");
  require(norm_order == 1 || norm_order == 2, ErrorKind::InvalidConfig, "norm_order must be 1 or 2");
  require(!kpca_sigma || *kpca_sigma > 0.0, ErrorKind::InvalidConfig, "kpca_sigma must be positive");
}

Index HyperParams::resolved_top_m(Index num_classes) const {
  if (!top_m) return std::min<Index>(num_classes, 100);
  require(*top_m <= num_classes, ErrorKind::InvalidConfig,
          "top_m = " + std::to_string(*top_m) + " exceeds the class count " + std::to_string(num_classes));
  return *top_m;
}

void HyperParams::set(std::string_view name, double value) {
  if (name == "gen_gamma") gen_gamma = value;
  else if (name == "ren_alpha") ren_alpha = value;
  else if (name == "top_m") top_m = static_cast<int>(std::lround(value));
  else if (name == "temperature") temperature = value;
  else if (name == "nnguide_alpha") nnguide_alpha = value;
  else if (name == "norm_order") norm_order = static_cast<int>(std::lround(value));
  else if (name == "kpca_sigma") kpca_sigma = value;
  else fail(ErrorKind::InvalidConfig, "unknown hyperparameter '" + std::string(name) + "'");
}

double HyperParams::get(std::string_view name) const {
  if (name == "gen_gamma") return gen_gamma;
  if (name == "ren_alpha") return ren_alpha;
  if (name == "top_m") return top_m ? *top_m : 0.0;
  if (name == "temperature") return temperature;
  if (name == "nnguide_alpha") return nnguide_alpha;
  if (name == "norm_order") return norm_order;
  if (name == "kpca_sigma") return kpca_sigma ? *kpca_sigma : 0.0;
  fail(ErrorKind::InvalidConfig, "unknown hyperparameter '" + std::string(name) + "'");
}

ClassStats ClassStats::fit(const Matrix& features, const Labels& labels, Index num_classes) {
  const Index n = features.rows();
  const Index d = features.cols();
  require(static_cast<Index>(labels.size()) == n, ErrorKind::InvalidInput,
          "ClassStats: label count does not match features");
  require(n >= 2, ErrorKind::InvalidInput, "ClassStats: need at least 2 samples");
  ClassStats s;
  s.class_means = Matrix::Zero(num_classes, d);
  std::vector<Index> counts(static_cast<std::size_t>(num_classes), 0);
  for (Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    require(y >= 1 && y <= num_classes, ErrorKind::InvalidInput,
            "ClassStats: training label " + std::to_string(y) + " outside 1.." + std::to_string(num_classes));
    s.class_means.row(y - 1) += features.row(i);
    ++counts[static_cast<std::size_t>(y - 1)];
  }
  for (Index c = 0; c < num_classes; ++c) {
    require(counts[static_cast<std::size_t>(c)] > 0, ErrorKind::InvalidInput,
            "ClassStats: class " + std::to_string(c + 1) + " has no training samples");
    s.class_means.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
  }
  s.global_mean = features.colwise().mean().transpose();
  Matrix centered(n, d);
  for (Index i = 0; i < n; ++i) centered.row(i) = features.row(i) - s.class_means.row(labels[static_cast<std::size_t>(i)] - 1);
  s.shared_covariance = (centered.transpose() * centered) / static_cast<double>(n);
  s.ridge = 1e-6 * s.shared_covariance.trace() / static_cast<double>(d);
  Matrix regularized = s.shared_covariance;
  regularized.diagonal().array() += s.ridge;
  s.factor.compute(regularized);
  require(s.ridge > 0.0 && s.factor.info() == Eigen::Success, ErrorKind::Numerical,
          "ClassStats: covariance is singular even after ridge regularization");
  return s;
}

NeighborBank NeighborBank::build(const Matrix& train_features, const Vector& base_scores,
                                 double alpha, std::uint64_t seed) {
  require(alpha > 0.0 && alpha < 1.0, ErrorKind::InvalidConfig, "nnguide alpha must lie in (0, 1)");
  const Index n = train_features.rows();
  require(base_scores.size() == n, ErrorKind::InvalidInput, "NeighborBank: score count mismatch");
  const auto m = static_cast<Index>(std::floor(alpha * static_cast<double>(n)));
  require(m >= 1, ErrorKind::InvalidConfig, "NeighborBank: alpha * N leaves an empty bank");
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(seed);
  rng.shuffle(order);
  order.resize(static_cast<std::size_t>(m));
  std::sort(order.begin(), order.end());

  NeighborBank bank;
  bank.alpha = alpha;
  bank.bank_features.resize(m, train_features.cols());
  bank.bank_scores.resize(m);
  for (Index r = 0; r < m; ++r) {
    const Index i = order[static_cast<std::size_t>(r)];
    const double norm = train_features.row(i).norm();
    require(norm > 0.0, ErrorKind::InvalidInput, "NeighborBank: zero-norm training feature");
    bank.bank_features.row(r) = train_features.row(i) / norm;
    bank.bank_scores[r] = base_scores[i];
  }
  bank.top_k = static_cast<Index>(std::floor(alpha * static_cast<double>(m)));
  require(bank.top_k >= 1, ErrorKind::InvalidConfig, "NeighborBank: alpha * M leaves k < 1");
  return bank;
}

PnmlCache PnmlCache::fit(const Matrix& train_features) {
  require(train_features.rows() >= 1, ErrorKind::InvalidInput, "PnmlCache: no training rows");
  Matrix normalized = train_features;
  for (Index i = 0; i < normalized.rows(); ++i) {
    const double norm = normalized.row(i).norm();
    require(norm > 0.0, ErrorKind::InvalidInput, "PnmlCache: zero-norm training feature");
    normalized.row(i) /= norm;
  }
  Eigen::BDCSVD<Matrix> svd(normalized, Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double tol = static_cast<double>(std::max(normalized.rows(), normalized.cols())) *
                     std::numeric_limits<double>::epsilon() * (s.size() ? s[0] : 0.0);
  Index rank = 0;
  while (rank < s.size() && s[rank] > tol) ++rank;
  const Matrix v = svd.matrixV().leftCols(rank);
  PnmlCache cache;
  cache.range_projector = v * v.transpose();
  const Vector inv_sq = s.head(rank).array().square().inverse();
  cache.inverse_gram = v * inv_sq.asDiagonal() * v.transpose();
  cache.fitted = true;
  return cache;
}

ResidualModel ResidualModel::fit(const Matrix& train_features, const Matrix& train_logits,
                                 double variance_fraction) {
  require(train_logits.rows() == train_features.rows(), ErrorKind::InvalidInput,
          "ResidualModel: logits and features disagree on sample count");
  ResidualModel model;
  model.principal = fit_uncentered_pca(train_features, variance_fraction);
  const Matrix& p = model.principal.basis;
  const Matrix residual = train_features - (train_features * p) * p.transpose();
  const double mean_residual = residual.rowwise().norm().mean();
  const double mean_max_logit = train_logits.rowwise().maxCoeff().mean();
  require(mean_residual > 1e-12, ErrorKind::Numerical,
          "ResidualModel: training residual vanishes; lower the variance fraction");
  model.vim_alpha = mean_max_logit / mean_residual;
  return model;
}

double score_prob_family(ProbScore kind, const Eigen::Ref<const Vector>& probs, const HyperParams& hp) {
  check_probs(probs);
  const Index c = probs.size();
  switch (kind) {
    case ProbScore::MSR:
      return probs.maxCoeff();
    case ProbScore::PE: {
      double h = 0.0;
      for (Index k = 0; k < c; ++k) {
        if (probs[k] > 0.0) h -= probs[k] * std::log(probs[k]);
      }
      return h;
    }
    case ProbScore::GEN: {
      require(hp.gen_gamma > 0.0 && hp.gen_gamma < 1.0, ErrorKind::InvalidConfig,
              "gen_gamma must lie in (0, 1)");
      const Index m = hp.resolved_top_m(c);
      const Vector s = sorted_descending(probs);
      double acc = 0.0;
      for (Index k = 0; k < m; ++k) {
        const double p = std::clamp(s[k], 0.0, 1.0);
        acc += std::pow(p, hp.gen_gamma) * std::pow(1.0 - p, hp.gen_gamma);
      }
      return acc;
    }
    case ProbScore::REN: {
      require(hp.ren_alpha > 0.0 && hp.ren_alpha < 1.0, ErrorKind::InvalidConfig,
              "ren_alpha must lie in (0, 1)");
      const Index m = hp.resolved_top_m(c);
      const Vector s = sorted_descending(probs);
      double acc = 0.0;
      for (Index k = 0; k < m; ++k) acc += std::pow(std::max(s[k], 0.0), hp.ren_alpha);
      return std::log(acc) / (1.0 - hp.ren_alpha);
    }
    case ProbScore::GE: {
      const Vector s = sorted_descending(probs);
      double acc = 0.0;
      for (Index k = 0; k < c; ++k) acc += static_cast<double>(k + 1) * s[k];
      return acc;
    }
    case ProbScore::PCE:
      return -std::log(probs.squaredNorm());
  }
  return 0.0;
}

double score_logit_family(LogitScore kind, const Eigen::Ref<const Vector>& logits, double temperature) {
  require(temperature > 0.0 && std::isfinite(temperature), ErrorKind::InvalidConfig,
          "temperature must be positive");
  require(logits.size() > 0 && logits.allFinite(), ErrorKind::InvalidInput,
          "logits must be finite and non-empty");
  if (kind == LogitScore::MLS) return logits.maxCoeff();
  return -temperature * logsumexp(logits / temperature);
}

double score_ctm(const Eigen::Ref<const Vector>& h, const Matrix& prototypes) {
  require(h.size() == prototypes.cols(), ErrorKind::InvalidInput, "CTM: dimension mismatch");
  const double hn = h.norm();
  require(hn > 0.0, ErrorKind::InvalidInput, "CTM: zero-norm feature");
  double best = -std::numeric_limits<double>::infinity();
  for (Index k = 0; k < prototypes.rows(); ++k) {
    const double pn = prototypes.row(k).norm();
    require(pn > 0.0, ErrorKind::InvalidInput, "CTM: zero prototype " + std::to_string(k + 1));
    best = std::max(best, prototypes.row(k).dot(h) / (pn * hn));
  }
  return best;
}

double score_maha(const Eigen::Ref<const Vector>& h, const ClassStats& stats) {
  require(stats.factor.info() == Eigen::Success && stats.class_means.rows() > 0,
          ErrorKind::State, "Mahalanobis: statistics are not fitted");
  require(h.size() == stats.class_means.cols(), ErrorKind::InvalidInput, "Mahalanobis: dimension mismatch");
  double best = std::numeric_limits<double>::infinity();
  for (Index k = 0; k < stats.class_means.rows(); ++k) {
    const Vector diff = h - stats.class_means.row(k).transpose();
    best = std::min(best, diff.dot(stats.factor.solve(diff)));
  }
  return best;
}

double score_nnguide(const Eigen::Ref<const Vector>& h, const NeighborBank& bank, double base_score) {
  require(bank.bank_features.rows() > 0, ErrorKind::InvalidInput, "NNGuide: empty bank");
  require(bank.top_k >= 1, ErrorKind::InvalidConfig, "NNGuide: k must be at least 1");
  require(h.size() == bank.bank_features.cols(), ErrorKind::InvalidInput, "NNGuide: dimension mismatch");
  const double hn = h.norm();
  require(hn > 0.0, ErrorKind::InvalidInput, "NNGuide: zero-norm feature");
  Vector terms = (bank.bank_features * (h / hn)).cwiseProduct(bank.bank_scores);
  const Index k = std::min<Index>(bank.top_k, terms.size());
  std::nth_element(terms.data(), terms.data() + (k - 1), terms.data() + terms.size(), std::greater<>());
  std::sort(terms.data(), terms.data() + k, std::greater<>());
  const double guidance = terms.head(k).mean();
  return base_score * guidance;
}

double score_fdbd(const Eigen::Ref<const Vector>& h, const Eigen::Ref<const Vector>& logits,
                  const ClassifierHead& head, const Eigen::Ref<const Vector>& global_mean) {
  const Index c = head.num_classes();
  require(c >= 2, ErrorKind::InvalidInput, "fDBD: need at least 2 classes");
  require(logits.size() == c && h.size() == head.dim() && global_mean.size() == head.dim(),
          ErrorKind::InvalidInput, "fDBD: dimension mismatch");
  const double deviation = (h - global_mean).norm();
  require(deviation > 0.0, ErrorKind::InvalidInput, "fDBD: feature coincides with the training mean");
  const Index m = predict(logits);
  double acc = 0.0;
  for (Index k = 0; k < c; ++k) {
    if (k == m) continue;
    const Vector diff = (head.weights.row(m) - head.weights.row(k)).transpose();
    const double norm = diff.norm();
    require(norm > 0.0, ErrorKind::DegenerateBoundary,
            "fDBD: classes " + std::to_string(m + 1) + " and " + std::to_string(k + 1) +
                " have identical weights");
    acc += std::abs(diff.dot(h) + head.bias[m] - head.bias[k]) / norm;
  }
  return acc / static_cast<double>(c - 1) / deviation;
}

double score_pnml(const Eigen::Ref<const Vector>& h, const Eigen::Ref<const Vector>& probs,
                  const PnmlCache& cache) {
  require(cache.fitted, ErrorKind::State, "pNML: cache is not fitted");
  require(h.size() == cache.range_projector.rows(), ErrorKind::InvalidInput, "pNML: dimension mismatch");
  check_probs(probs);
  const double hn = h.norm();
  require(hn > 0.0, ErrorKind::InvalidInput, "pNML: zero-norm feature");
  const Vector x = h / hn;
  const Vector perp = x - cache.range_projector * x;
  double exponent = 0.0;
  const double perp_sq = perp.squaredNorm();
  if (perp_sq > 1e-10) {
    exponent = x.dot(perp) / perp_sq;
  } else {
    const Vector gx = cache.inverse_gram * x;
    const double q = x.dot(gx);
    exponent = q / (1.0 + q);
  }
  double acc = 0.0;
  for (Index k = 0; k < probs.size(); ++k) {
    const double p = std::clamp(probs[k], 0.0, 1.0);
    if (p <= 0.0) continue;
    acc += p / (p + std::pow(p, exponent) * (1.0 - p));
  }
  return std::log(acc);
}

double score_gradnorm(const Eigen::Ref<const Vector>& h, const Eigen::Ref<const Vector>& probs,
                      const HyperParams& hp) {
  check_probs(probs);
  require(hp.norm_order == 1 || hp.norm_order == 2, ErrorKind::InvalidConfig, "norm_order must be 1 or 2");
  const Vector centered = probs.array() - 1.0 / static_cast<double>(probs.size());
  if (hp.norm_order == 1) return centered.lpNorm<1>() * h.lpNorm<1>();
  return centered.norm() * h.norm();
}

ResidualScores score_residual_vim_neco(const Eigen::Ref<const Vector>& h,
                                       const Eigen::Ref<const Vector>& logits,
                                       const ResidualModel& model) {
  const Matrix& p = model.principal.basis;
  require(h.size() == p.rows(), ErrorKind::InvalidInput, "residual: dimension mismatch");
  const double hn = h.norm();
  require(hn > 0.0, ErrorKind::InvalidInput, "NeCo: zero-norm feature");
  const Vector coords = p.transpose() * h;
  const Vector r = h - p * coords;
  ResidualScores out;
  out.residual = r.norm();
  const double t = model.vim_alpha * out.residual - logsumexp(logits);
  out.vim = t >= 0.0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
  out.neco = coords.norm() / hn;
  return out;
}

ScoreVector score_confidence_passthrough(const Vector& external, std::string_view method_id) {
  const MethodInfo& info = method_info(method_id);
  require(info.family == MethodFamily::External, ErrorKind::InvalidConfig,
          "'" + std::string(method_id) + "' is not an external-confidence method");
  require(external.allFinite(), ErrorKind::InvalidInput, "external confidences contain NaN or inf");
  ScoreVector sv;
  sv.values = external;
  sv.orientation = info.orientation;
  sv.method_id = std::string(info.id);
  sv.variant = Variant::Unmodified;
  return sv;
}

}  // namespace oodlab

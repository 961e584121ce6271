#include "oodlab/core.hpp"

#include <cmath>
#include <limits>

namespace oodlab {

bool all_finite(const Eigen::Ref<const Matrix>& m) noexcept { return m.allFinite(); }

void FeatureSet::validate(Index num_classes) const {
  const std::string where = "feature set '" + dataset_id + "'";
  require(features.rows() >= 1, ErrorKind::InvalidInput, where + " has no samples");
  require(features.allFinite(), ErrorKind::InvalidInput, where + " contains non-finite features");
  if (logits) {
    require(logits->rows() == size(), ErrorKind::InvalidInput,
            where + ": logits row count does not match features");
    require(logits->allFinite(), ErrorKind::InvalidInput, where + " contains non-finite logits");
    if (num_classes == 0) num_classes = logits->cols();
  }
  if (labels) {
    require(static_cast<Index>(labels->size()) == size(), ErrorKind::InvalidInput,
            where + ": label count does not match features");
    for (int y : *labels) {
      require(y >= 0 && (num_classes == 0 || y <= num_classes), ErrorKind::InvalidInput,
              where + ": label " + std::to_string(y) + " outside 0.." + std::to_string(num_classes));
    }
  }
  for (const Matrix& pass : passes) {
    require(pass.rows() == size(), ErrorKind::InvalidInput,
            where + ": pass row count does not match features");
    require(pass.cols() == passes.front().cols(), ErrorKind::InvalidInput,
            where + ": passes disagree on class count");
    require(pass.allFinite(), ErrorKind::InvalidInput, where + " contains non-finite pass logits");
  }
  for (const auto& [name, values] : external) {
    require(values.size() == size(), ErrorKind::InvalidInput,
            where + ": external score '" + name + "' has the wrong length");
  }
}

void ClassifierHead::validate() const {
  require(weights.rows() >= 2, ErrorKind::InvalidInput, "classifier head needs at least 2 classes");
  require(bias.size() == weights.rows(), ErrorKind::InvalidInput,
          "classifier bias length does not match weight rows");
  require(temperature > 0.0 && std::isfinite(temperature), ErrorKind::InvalidInput,
          "temperature must be positive");
  require(weights.allFinite() && bias.allFinite(), ErrorKind::InvalidInput,
          "classifier head contains non-finite entries");
}

Vector ClassifierHead::logits(const Eigen::Ref<const Vector>& h) const {
  require(h.size() == dim(), ErrorKind::InvalidInput, "feature dimension does not match head");
  return weights * h + bias;
}

Matrix ClassifierHead::logits(const Matrix& features) const {
  require(features.cols() == dim(), ErrorKind::InvalidInput,
          "feature dimension does not match head");
  Matrix out = features * weights.transpose();
  out.rowwise() += bias.transpose();
  return out;
}

std::string_view to_string(Variant v) noexcept {
  switch (v) {
    case Variant::Unmodified: return "Unmodified";
    case Variant::Global: return "Global";
    case Variant::Class: return "Class";
    case Variant::ClassPred: return "ClassPred";
    case Variant::ClassAvg: return "ClassAvg";
  }
  return "?";
}

std::string_view to_string(Orientation o) noexcept {
  return o == Orientation::HigherIsConfident ? "HigherIsConfident" : "HigherIsAnomalous";
}

Variant parse_variant(std::string_view name) {
  for (Variant v : kAllVariants) {
    if (to_string(v) == name) return v;
  }
  fail(ErrorKind::InvalidConfig, "unknown variant '" + std::string(name) + "'");
}

Vector ScoreVector::confidence() const {
  return orientation == Orientation::HigherIsConfident ? Vector(values) : Vector(-values);
}

double logsumexp(const Eigen::Ref<const Vector>& values) {
  require(values.size() > 0, ErrorKind::InvalidInput, "logsumexp of an empty vector");
  const double top = values.maxCoeff();
  return top + std::log((values.array() - top).exp().sum());
}

Vector softmax(const Eigen::Ref<const Vector>& logits, double temperature) {
  require(logits.size() > 0, ErrorKind::InvalidInput, "softmax of an empty vector");
  require(temperature > 0.0 && std::isfinite(temperature), ErrorKind::InvalidInput,
          "temperature must be positive");
  require(logits.allFinite(), ErrorKind::InvalidInput, "softmax input contains non-finite logits");
  Vector scaled = logits / temperature;
  scaled.array() -= scaled.maxCoeff();
  Vector e = scaled.array().exp();
  return e / e.sum();
}

Matrix softmax_rows(const Matrix& logits, double temperature) {
  Matrix out(logits.rows(), logits.cols());
  for (Index i = 0; i < logits.rows(); ++i) out.row(i) = softmax(logits.row(i).transpose(), temperature);
  return out;
}

Index predict(const Eigen::Ref<const Vector>& logits) {
  require(logits.size() > 0, ErrorKind::InvalidInput, "predict on an empty vector");
  Index best = 0;
  for (Index k = 1; k < logits.size(); ++k) {
    if (logits[k] > logits[best]) best = k;
  }
  return best;
}

std::vector<Index> predict_rows(const Matrix& logits) {
  std::vector<Index> out(static_cast<std::size_t>(logits.rows()));
  for (Index i = 0; i < logits.rows(); ++i) out[static_cast<std::size_t>(i)] = predict(logits.row(i).transpose());
  return out;
}

Matrix mc_aggregate(const std::vector<Matrix>& passes, double temperature, McAggregation mode) {
  require(!passes.empty(), ErrorKind::InvalidInput, "mc_aggregate needs at least one pass");
  const Index n = passes.front().rows();
  const Index c = passes.front().cols();
  for (const Matrix& p : passes) {
    require(p.rows() == n && p.cols() == c, ErrorKind::InvalidInput,
            "mc_aggregate: pass shapes differ");
  }
  const double t = static_cast<double>(passes.size());
  if (mode == McAggregation::MeanLogit) {
    Matrix mean = Matrix::Zero(n, c);
    for (const Matrix& p : passes) mean += p;
    return softmax_rows(mean / t, temperature);
  }
  Matrix mean = Matrix::Zero(n, c);
  for (const Matrix& p : passes) mean += softmax_rows(p, temperature);
  return mean / t;
}

}  // namespace oodlab

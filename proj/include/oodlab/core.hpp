#pragma once

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "oodlab/error.hpp"

namespace oodlab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Class labels as stored on disk: 1..C for known classes, 0 for OOD/unknown.
using Labels = std::vector<int>;

inline constexpr int kOodLabel = 0;

/// Per-sample penultimate activations plus whatever the classifier exported with them.
/// Rows are samples. `passes` holds one N x C logit matrix per stochastic forward pass;
/// `external` holds precomputed per-sample scores keyed by method id (e.g. "Confidence").
struct FeatureSet {
  Matrix features;
  std::optional<Matrix> logits;
  std::optional<Labels> labels;
  std::vector<Matrix> passes;
  std::map<std::string, Vector> external;
  std::string dataset_id;

  Index size() const noexcept { return features.rows(); }
  Index dim() const noexcept { return features.cols(); }
  bool has_passes() const noexcept { return !passes.empty(); }

  /// Throws InvalidInput when the invariants do not hold. `num_classes` bounds labels when > 0.
  void validate(Index num_classes = 0) const;
};

/// Last linear layer g(h) = W h + b, C x D weights.
struct ClassifierHead {
  Matrix weights;
  Vector bias;
  double temperature = 1.0;

  Index num_classes() const noexcept { return weights.rows(); }
  Index dim() const noexcept { return weights.cols(); }

  void validate() const;

  Vector logits(const Eigen::Ref<const Vector>& h) const;
  Vector logits(const Vector& h) const { return logits(Eigen::Ref<const Vector>(h)); }
  /// Row-wise logits for an N x D feature matrix.
  Matrix logits(const Matrix& features) const;
};

enum class Orientation { HigherIsConfident, HigherIsAnomalous };

enum class Variant { Unmodified, Global, Class, ClassPred, ClassAvg };

inline constexpr Variant kAllVariants[] = {Variant::Unmodified, Variant::Global, Variant::Class,
                                           Variant::ClassPred, Variant::ClassAvg};

std::string_view to_string(Variant v) noexcept;
std::string_view to_string(Orientation o) noexcept;
Variant parse_variant(std::string_view name);

struct ScoreVector {
  Vector values;
  Orientation orientation = Orientation::HigherIsConfident;
  std::string method_id;
  Variant variant = Variant::Unmodified;

  Index size() const noexcept { return values.size(); }

  /// Values flipped so that higher always means more ID-like.
  Vector confidence() const;
};

bool all_finite(const Eigen::Ref<const Matrix>& m) noexcept;

double logsumexp(const Eigen::Ref<const Vector>& values);

/// exp(l_k / T) / sum_j exp(l_j / T), evaluated with max-subtraction.
Vector softmax(const Eigen::Ref<const Vector>& logits, double temperature = 1.0);

/// Row-wise softmax of an N x C logit matrix.
Matrix softmax_rows(const Matrix& logits, double temperature = 1.0);

/// Index (0-based) of the largest logit; ties resolve to the lowest index.
Index predict(const Eigen::Ref<const Vector>& logits);

std::vector<Index> predict_rows(const Matrix& logits);

enum class McAggregation { MeanProbability, MeanLogit };

/// Collapses T stochastic passes (each N x C logits) into N x C predictive probabilities.
Matrix mc_aggregate(const std::vector<Matrix>& passes, double temperature = 1.0,
                    McAggregation mode = McAggregation::MeanProbability);

}  // namespace oodlab

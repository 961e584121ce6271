#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "oodlab/core.hpp"
#include "oodlab/projections.hpp"

namespace oodlab {

/// Tunable knobs shared by the scoring functions. `top_m` unset means min(C, 100).
struct HyperParams {
  double gen_gamma = 0.1;
  double ren_alpha = 0.5;
  std::optional<int> top_m;
  double temperature = 1.0;
  double nnguide_alpha = 0.5;
  int norm_order = 1;
  std::optional<double> kpca_sigma;

  void validate() const;
  Index resolved_top_m(Index num_classes) const;

  /// Sets a field by its registry name; throws InvalidConfig on unknown names.
  void set(std::string_view name, double value);
  double get(std::string_view name) const;
};

/// Class means, tied covariance and its (ridge-regularized) Cholesky factor.
struct ClassStats {
  Matrix class_means;  // C x D
  Matrix shared_covariance;
  Vector global_mean;
  double ridge = 0.0;
  Eigen::LLT<Matrix> factor;

  /// Labels are 1..C. Covariance is pooled around the class means with 1/N normalization and
  /// regularized by 1e-6 * trace / D before factorization.
  static ClassStats fit(const Matrix& features, const Labels& labels, Index num_classes);
};

/// L2-normalized subsample of training features with their base scores.
struct NeighborBank {
  Matrix bank_features;  // M x D, unit rows
  Vector bank_scores;
  double alpha = 0.5;
  Index top_k = 1;

  /// Draws floor(alpha * N) rows with a seeded shuffle; top_k = floor(alpha * M).
  static NeighborBank build(const Matrix& train_features, const Vector& base_scores, double alpha,
                            std::uint64_t seed);
};

/// Pseudo-inverse products of the row-normalized training matrix.
struct PnmlCache {
  Matrix range_projector;  // H^+ H, D x D
  Matrix inverse_gram;     // H^+ H^+^T = (H^T H)^+
  bool fitted = false;

  static PnmlCache fit(const Matrix& train_features);
};

/// Uncentered principal subspace of the training features plus the virtual-logit scale.
struct ResidualModel {
  Subspace principal;
  double vim_alpha = 1.0;

  static ResidualModel fit(const Matrix& train_features, const Matrix& train_logits,
                           double variance_fraction = kDefaultVarianceFraction);
};

enum class ProbScore { MSR, PE, GEN, REN, GE, PCE };
enum class LogitScore { MLS, Energy };

double score_prob_family(ProbScore kind, const Eigen::Ref<const Vector>& probs,
                         const HyperParams& hp);
double score_logit_family(LogitScore kind, const Eigen::Ref<const Vector>& logits,
                          double temperature);

/// Largest cosine similarity between h and any prototype row.
double score_ctm(const Eigen::Ref<const Vector>& h, const Matrix& prototypes);

/// Squared Mahalanobis distance to the nearest class mean.
double score_maha(const Eigen::Ref<const Vector>& h, const ClassStats& stats);

double score_nnguide(const Eigen::Ref<const Vector>& h, const NeighborBank& bank, double base_score);

double score_fdbd(const Eigen::Ref<const Vector>& h, const Eigen::Ref<const Vector>& logits,
                  const ClassifierHead& head, const Eigen::Ref<const Vector>& global_mean);

double score_pnml(const Eigen::Ref<const Vector>& h, const Eigen::Ref<const Vector>& probs,
                  const PnmlCache& cache);

/// ||p - u||_q * ||h||_q, the entrywise norm of the averaged cross-entropy weight gradient.
double score_gradnorm(const Eigen::Ref<const Vector>& h, const Eigen::Ref<const Vector>& probs,
                      const HyperParams& hp);

struct ResidualScores {
  double residual = 0.0;
  double vim = 0.0;
  double neco = 0.0;
};

ResidualScores score_residual_vim_neco(const Eigen::Ref<const Vector>& h,
                                       const Eigen::Ref<const Vector>& logits,
                                       const ResidualModel& model);

/// Wraps precomputed per-sample confidences. `method_id` is "Confidence" or "Abstention".
ScoreVector score_confidence_passthrough(const Vector& external,
                                         std::string_view method_id = "Confidence");

}  // namespace oodlab

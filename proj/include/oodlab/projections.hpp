#pragma once

#include <string_view>
#include <vector>

#include "oodlab/core.hpp"

namespace oodlab {

inline constexpr double kDefaultVarianceFraction = 0.95;

/// Principal subspace: reconstruction is basis * basis^T (h - mean) + mean.
struct Subspace {
  Vector mean;
  Matrix basis;  // D x k, orthonormal columns
  Vector eigenvalues;  // k, non-increasing
  double variance_fraction = kDefaultVarianceFraction;

  Index dim() const noexcept { return mean.size(); }
  Index rank() const noexcept { return basis.cols(); }

  /// Rank-0 subspace whose reconstruction is always `mean`.
  static Subspace degenerate(Vector mean, double variance_fraction);

  Vector reconstruct(const Eigen::Ref<const Vector>& h) const;
  Matrix reconstruct_rows(const Matrix& features) const;
};

/// PCA of the 1/N empirical covariance, keeping the fewest components whose eigenvalue mass
/// reaches `variance_fraction`. Throws DegenerateSubspaceError when all rows coincide.
Subspace fit_pca(const Matrix& train_features, double variance_fraction = kDefaultVarianceFraction);

/// Same component selection on the uncentered second moment H^T H / N (mean is zero).
Subspace fit_uncentered_pca(const Matrix& train_features,
                            double variance_fraction = kDefaultVarianceFraction);

struct ProjectionBundle {
  Subspace global;
  std::vector<Subspace> per_class;

  Index num_classes() const noexcept { return static_cast<Index>(per_class.size()); }
  const Subspace& for_class(Index c) const;
};

/// Global subspace on all rows plus one subspace per class (labels 1..C). Classes with fewer
/// than two rows, or with identical rows, get a rank-0 subspace at their mean.
ProjectionBundle fit_projection_bundle(const Matrix& train_features, const Labels& labels,
                                       Index num_classes,
                                       double variance_fraction = kDefaultVarianceFraction);

Vector reconstruct_global(const Subspace& sub, const Eigen::Ref<const Vector>& h);
/// `c` is a 0-based class index.
Vector reconstruct_class(const ProjectionBundle& bundle, const Eigen::Ref<const Vector>& h, Index c);

/// Features, logits and probabilities after a projection variant. For Variant::Class the
/// feature matrix is left untouched and `class_features[c]` holds the class-c reconstruction
/// of every row; logits are the class-projected logits w_c^T h^c + b_c.
struct VariantView {
  Variant variant = Variant::Unmodified;
  Matrix features;
  Matrix logits;
  Matrix probs;
  std::vector<Matrix> class_features;
};

VariantView variant_transform(const ProjectionBundle& bundle, const ClassifierHead& head,
                              const Matrix& features, const Matrix& logits, Variant variant);

/// As above, first checking the per-method applicability table.
VariantView variant_transform(const ProjectionBundle& bundle, const ClassifierHead& head,
                              const Matrix& features, const Matrix& logits, Variant variant,
                              std::string_view method_id);

/// Negated normalized PCA reconstruction error. Global uses the global subspace, Class takes
/// the best class subspace, ClassPred the subspace of `predicted_class` (0-based).
double pca_rec_error(const Subspace& sub, const Eigen::Ref<const Vector>& h);
double pca_rec_error(const ProjectionBundle& bundle, const Eigen::Ref<const Vector>& h,
                     Variant variant, Index predicted_class = -1);

}  // namespace oodlab

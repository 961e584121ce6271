#pragma once

#include <cstdint>
#include <optional>

#include "oodlab/core.hpp"

namespace oodlab {

enum class KpcaMode { Exact, Nystrom };

/// How Nystrom landmarks are drawn from the training rows.
enum class LandmarkRule {
  LowLogsumexp,   // smallest logsumexp(logits) first
  HighLogsumexp,
  Uniform,        // seeded sample
};

struct KpcaOptions {
  KpcaMode mode = KpcaMode::Exact;
  std::optional<double> sigma;        // unset: median heuristic
  std::optional<Index> components;    // unset: fewest reaching `spectrum_fraction`
  double spectrum_fraction = 0.95;
  Index landmarks = 256;
  LandmarkRule landmark_rule = LandmarkRule::LowLogsumexp;
  std::uint64_t seed = 0;
};

/// Cosine-Gaussian kernel PCA. Inputs are unit-normalized before the kernel is applied, so
/// k(x, x) = 1 for every x.
struct KpcaModel {
  KpcaMode mode = KpcaMode::Exact;
  double sigma = 1.0;
  bool fitted = false;
  bool degenerate = false;  // no positive kernel eigenvalue

  // Exact mode: training rows, kernel column means, mean of K, scaled eigenvectors N x q.
  Matrix train_unit;
  Vector kernel_col_mean;
  double kernel_mean = 0.0;
  Matrix coefficients;
  Vector eigenvalues;

  // Nystrom mode.
  Matrix landmarks;      // M x D unit rows
  Matrix w_inv_sqrt;     // M x M
  Vector psi_mean;
  Matrix psi_basis;      // M x q

  Index components() const noexcept { return mode == KpcaMode::Exact ? coefficients.cols() : psi_basis.cols(); }
};

double cosine_gaussian(const Eigen::Ref<const Vector>& a_unit, const Eigen::Ref<const Vector>& b_unit,
                       double sigma);

/// sqrt(2 * median(1 - cos)) over at most 1000 seeded rows; 1.0 if the median is zero.
double median_bandwidth(const Matrix& features, std::uint64_t seed);

/// `train_logits`, when given, ranks rows for the logsumexp landmark rules.
KpcaModel fit_kpca(const Matrix& train_features, const KpcaOptions& options,
                   const Matrix* train_logits = nullptr);

/// Exact: e(x) = k_c(x, x) - sum_m phi_m(x)^2, regularized e / sqrt(k_c(x, x)).
/// Nystrom: e~(x) = ||(I - U U^T)(psi - mu)||^2, regularized e~ / ||psi||.
double kpca_rec_error(const KpcaModel& model, const Eigen::Ref<const Vector>& h, bool regularized);
Vector kpca_rec_errors(const KpcaModel& model, const Matrix& features, bool regularized);

}  // namespace oodlab

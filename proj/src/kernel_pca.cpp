#include "oodlab/kernel_pca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oodlab/random.hpp"

namespace oodlab {

namespace {

constexpr double kEigenFloor = 1e-12;
constexpr double kJitter = 1e-8;

Matrix unit_rows(const Matrix& features) {
  Matrix out = features;
  for (Index i = 0; i < out.rows(); ++i) {
    const double norm = out.row(i).norm();
    require(norm > 0.0 && std::isfinite(norm), ErrorKind::InvalidInput, "KPCA: zero-norm or non-finite feature");
    out.row(i) /= norm;
  }
  return out;
}

Matrix kernel_block(const Matrix& a_unit, const Matrix& b_unit, double sigma) {
  const double inv = 1.0 / (sigma * sigma);
  Matrix k = a_unit * b_unit.transpose();
  return ((k.array() - 1.0) * inv).exp().matrix();
}

// Eigenpairs (descending) of a symmetric matrix with eigenvalues above the floor.
void positive_spectrum(const Matrix& m, Vector& values, Matrix& vectors, const char* what) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
  require(eig.info() == Eigen::Success, ErrorKind::Numerical, std::string(what) + ": eigen-decomposition failed");
  const Vector all = eig.eigenvalues().reverse();
  const Matrix vecs = eig.eigenvectors().rowwise().reverse();
  Index keep = 0;
  while (keep < all.size() && all[keep] > kEigenFloor) ++keep;
  values = all.head(keep);
  vectors = vecs.leftCols(keep);
}

Index choose_components(const Vector& values, const KpcaOptions& options) {
  if (values.size() == 0) return 0;
  if (options.components) {
    require(*options.components >= 1, ErrorKind::InvalidConfig, "KPCA: components must be at least 1");
    return std::min<Index>(*options.components, values.size());
  }
  require(options.spectrum_fraction > 0.0 && options.spectrum_fraction <= 1.0, ErrorKind::InvalidConfig,
          "KPCA: spectrum fraction must lie in (0, 1]");
  const double target = options.spectrum_fraction * values.sum() * (1.0 - 1e-12);
  Index q = 0;
  double acc = 0.0;
  while (q < values.size() && acc < target) acc += values[q++];
  return q;
}

std::vector<Index> pick_landmarks(const Matrix& features, const KpcaOptions& options, const Matrix* logits) {
  const Index n = features.rows();
  const Index m = std::min<Index>(options.landmarks, n);
  require(m >= 1, ErrorKind::InvalidConfig, "KPCA: need at least one landmark");
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  const bool by_energy = options.landmark_rule != LandmarkRule::Uniform && logits != nullptr;
  if (by_energy) {
    require(logits->rows() == n, ErrorKind::InvalidInput, "KPCA: logits and features disagree on sample count");
    Vector lse(n);
    for (Index i = 0; i < n; ++i) lse[i] = logsumexp(logits->row(i).transpose());
    const bool ascending = options.landmark_rule == LandmarkRule::LowLogsumexp;
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
      return ascending ? lse[a] < lse[b] : lse[a] > lse[b];
    });
  } else {
    Rng rng(options.seed);
    rng.shuffle(order);
  }
  order.resize(static_cast<std::size_t>(m));
  return order;
}

KpcaModel fit_exact(const Matrix& unit, const KpcaOptions& options, double sigma) {
  const Index n = unit.rows();
  KpcaModel model;
  model.mode = KpcaMode::Exact;
  model.sigma = sigma;
  model.train_unit = unit;
  const Matrix k = kernel_block(unit, unit, sigma);
  model.kernel_col_mean = k.colwise().mean().transpose();
  model.kernel_mean = model.kernel_col_mean.mean();
  Matrix centered = k;
  centered.rowwise() -= model.kernel_col_mean.transpose();
  centered.colwise() -= model.kernel_col_mean;
  centered.array() += model.kernel_mean;

  Vector values;
  Matrix vectors;
  positive_spectrum(centered, values, vectors, "KPCA");
  const Index q = choose_components(values, options);
  model.degenerate = values.size() == 0;
  model.eigenvalues = values.head(q);
  model.coefficients.resize(n, q);
  for (Index j = 0; j < q; ++j) model.coefficients.col(j) = vectors.col(j) / std::sqrt(values[j]);
  model.fitted = true;
  return model;
}

KpcaModel fit_nystrom(const Matrix& unit, const KpcaOptions& options, double sigma, const Matrix* logits) {
  KpcaModel model;
  model.mode = KpcaMode::Nystrom;
  model.sigma = sigma;
  const std::vector<Index> picked = pick_landmarks(unit, options, logits);
  model.landmarks = unit(picked, Eigen::all);

  Matrix w = kernel_block(model.landmarks, model.landmarks, sigma);
  w.diagonal().array() += kJitter;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(w);
  require(eig.info() == Eigen::Success, ErrorKind::Numerical, "Nystrom: landmark Gram eigen-decomposition failed");
  require(eig.eigenvalues().minCoeff() > 0.0, ErrorKind::Numerical,
          "Nystrom: landmark Gram is not positive definite after jitter");
  model.w_inv_sqrt = eig.eigenvectors() * eig.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                     eig.eigenvectors().transpose();

  const Matrix psi = kernel_block(unit, model.landmarks, sigma) * model.w_inv_sqrt;
  model.psi_mean = psi.colwise().mean().transpose();
  const Matrix centered = psi.rowwise() - model.psi_mean.transpose();
  const Matrix cov = centered.transpose() * centered / static_cast<double>(psi.rows());
  Vector values;
  Matrix vectors;
  positive_spectrum(cov, values, vectors, "Nystrom");
  const Index q = choose_components(values, options);
  model.degenerate = values.size() == 0;
  model.eigenvalues = values.head(q);
  model.psi_basis = vectors.leftCols(q);
  model.fitted = true;
  return model;
}

}  // namespace

double cosine_gaussian(const Eigen::Ref<const Vector>& a_unit, const Eigen::Ref<const Vector>& b_unit,
                       double sigma) {
  return std::exp(-(1.0 - a_unit.dot(b_unit)) / (sigma * sigma));
}

double median_bandwidth(const Matrix& features, std::uint64_t seed) {
  const Matrix unit = unit_rows(features);
  const Index n = unit.rows();
  std::vector<Index> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), Index{0});
  if (n > 1000) {
    Rng rng(seed);
    rng.shuffle(rows);
    rows.resize(1000);
    std::sort(rows.begin(), rows.end());
  }
  const Matrix sub = unit(rows, Eigen::all);
  const Matrix gram = sub * sub.transpose();
  std::vector<double> gaps;
  gaps.reserve(static_cast<std::size_t>(sub.rows() * (sub.rows() - 1) / 2));
  for (Index i = 0; i < sub.rows(); ++i) {
    for (Index j = i + 1; j < sub.rows(); ++j) gaps.push_back(std::max(0.0, 1.0 - gram(i, j)));
  }
  if (gaps.empty()) return 1.0;
  const auto mid = gaps.begin() + static_cast<std::ptrdiff_t>(gaps.size() / 2);
  std::nth_element(gaps.begin(), mid, gaps.end());
  double median = *mid;
  if (gaps.size() % 2 == 0) median = 0.5 * (median + *std::max_element(gaps.begin(), mid));
  return median > 0.0 ? std::sqrt(2.0 * median) : 1.0;
}

KpcaModel fit_kpca(const Matrix& train_features, const KpcaOptions& options, const Matrix* train_logits) {
  require(train_features.rows() >= 1, ErrorKind::InvalidInput, "KPCA: no training rows");
  require(!options.components || *options.components <= train_features.rows(), ErrorKind::InvalidConfig,
          "KPCA: more components requested than training rows");
  const double sigma = options.sigma ? *options.sigma : median_bandwidth(train_features, options.seed);
  require(sigma > 0.0 && std::isfinite(sigma), ErrorKind::InvalidConfig, "KPCA: sigma must be positive");
  const Matrix unit = unit_rows(train_features);
  if (options.mode == KpcaMode::Exact) return fit_exact(unit, options, sigma);
  return fit_nystrom(unit, options, sigma, train_logits);
}

Vector kpca_rec_errors(const KpcaModel& model, const Matrix& features, bool regularized) {
  require(model.fitted, ErrorKind::State, "KPCA: model is not fitted");
  const Matrix unit = unit_rows(features);
  Vector out(unit.rows());
  if (model.mode == KpcaMode::Exact) {
    require(unit.cols() == model.train_unit.cols(), ErrorKind::InvalidInput, "KPCA: dimension mismatch");
    const Matrix k = kernel_block(unit, model.train_unit, model.sigma);
    const Vector row_mean = k.rowwise().mean();
    // Centered cross-kernel rows.
    Matrix kc = k.rowwise() - model.kernel_col_mean.transpose();
    kc.colwise() -= row_mean;
    kc.array() += model.kernel_mean;
    const Matrix phi = kc * model.coefficients;
    for (Index i = 0; i < unit.rows(); ++i) {
      const double self = 1.0 - 2.0 * row_mean[i] + model.kernel_mean;
      const double e = std::max(0.0, self - phi.row(i).squaredNorm());
      if (!regularized) out[i] = e;
      else out[i] = self > 1e-12 ? e / std::sqrt(self) : 0.0;
    }
    return out;
  }
  require(unit.cols() == model.landmarks.cols(), ErrorKind::InvalidInput, "Nystrom: dimension mismatch");
  const Matrix psi = kernel_block(unit, model.landmarks, model.sigma) * model.w_inv_sqrt;
  const Matrix centered = psi.rowwise() - model.psi_mean.transpose();
  const Matrix coords = centered * model.psi_basis;
  for (Index i = 0; i < unit.rows(); ++i) {
    const double e = std::max(0.0, centered.row(i).squaredNorm() - coords.row(i).squaredNorm());
    if (!regularized) {
      out[i] = e;
    } else {
      const double norm = psi.row(i).norm();
      out[i] = norm > 0.0 ? e / norm : 0.0;
    }
  }
  return out;
}

double kpca_rec_error(const KpcaModel& model, const Eigen::Ref<const Vector>& h, bool regularized) {
  Matrix row = h.transpose();
  return kpca_rec_errors(model, row, regularized)[0];
}

}  // namespace oodlab

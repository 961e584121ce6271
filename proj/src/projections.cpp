#include "oodlab/projections.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "oodlab/registry.hpp"

namespace oodlab {

namespace {

void check_fraction(double f) {
  require(f > 0.0 && f <= 1.0, ErrorKind::InvalidConfig, "variance fraction must lie in (0, 1]");
}

// Largest-magnitude entry of every column made positive so fits are reproducible.
void fix_signs(Matrix& basis) {
  for (Index j = 0; j < basis.cols(); ++j) {
    Index arg = 0;
    basis.col(j).cwiseAbs().maxCoeff(&arg);
    if (basis(arg, j) < 0.0) basis.col(j) *= -1.0;
  }
}

Subspace from_moment(const Matrix& moment, Vector mean, double fraction) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(moment);
  require(eig.info() == Eigen::Success, ErrorKind::Numerical, "eigen-decomposition failed");
  const Index d = moment.rows();
  Vector values = eig.eigenvalues().reverse().cwiseMax(0.0);
  Matrix vectors = eig.eigenvectors().rowwise().reverse();

  const double total = values.sum();
  if (!(total > 1e-24 * std::max(1.0, mean.squaredNorm()))) {
    fail(ErrorKind::DegenerateSubspace, "training features have zero variance (rank 0)");
  }
  const double target = fraction * total * (1.0 - 1e-12);
  Index k = 0;
  double acc = 0.0;
  while (k < d && acc < target) acc += values[k++];

  Subspace s;
  s.mean = std::move(mean);
  s.basis = vectors.leftCols(k);
  fix_signs(s.basis);
  s.eigenvalues = values.head(k);
  s.variance_fraction = fraction;
  return s;
}

}  // namespace

Subspace Subspace::degenerate(Vector mean, double variance_fraction) {
  Subspace s;
  s.basis = Matrix::Zero(mean.size(), 0);
  s.eigenvalues = Vector::Zero(0);
  s.mean = std::move(mean);
  s.variance_fraction = variance_fraction;
  return s;
}

Vector Subspace::reconstruct(const Eigen::Ref<const Vector>& h) const {
  require(h.size() == dim(), ErrorKind::InvalidInput, "reconstruct: dimension mismatch");
  return basis * (basis.transpose() * (h - mean)) + mean;
}

Matrix Subspace::reconstruct_rows(const Matrix& features) const {
  require(features.cols() == dim(), ErrorKind::InvalidInput, "reconstruct: dimension mismatch");
  Matrix centered = features.rowwise() - mean.transpose();
  Matrix out = (centered * basis) * basis.transpose();
  out.rowwise() += mean.transpose();
  return out;
}

Subspace fit_pca(const Matrix& train_features, double variance_fraction) {
  check_fraction(variance_fraction);
  require(train_features.rows() >= 2, ErrorKind::InvalidInput, "fit_pca needs at least 2 rows");
  require(train_features.allFinite(), ErrorKind::InvalidInput, "fit_pca: non-finite features");
  Vector mean = train_features.colwise().mean().transpose();
  Matrix centered = train_features.rowwise() - mean.transpose();
  Matrix cov = (centered.transpose() * centered) / static_cast<double>(train_features.rows());
  return from_moment(cov, std::move(mean), variance_fraction);
}

Subspace fit_uncentered_pca(const Matrix& train_features, double variance_fraction) {
  check_fraction(variance_fraction);
  require(train_features.rows() >= 1, ErrorKind::InvalidInput, "fit_uncentered_pca: no rows");
  require(train_features.allFinite(), ErrorKind::InvalidInput, "fit_uncentered_pca: non-finite");
  Matrix moment =
      (train_features.transpose() * train_features) / static_cast<double>(train_features.rows());
  return from_moment(moment, Vector::Zero(train_features.cols()), variance_fraction);
}

const Subspace& ProjectionBundle::for_class(Index c) const {
  require(c >= 0 && c < num_classes(), ErrorKind::InvalidInput,
          "class index " + std::to_string(c) + " outside the projection bundle");
  return per_class[static_cast<std::size_t>(c)];
}

ProjectionBundle fit_projection_bundle(const Matrix& train_features, const Labels& labels,
                                       Index num_classes, double variance_fraction) {
  require(static_cast<Index>(labels.size()) == train_features.rows(), ErrorKind::InvalidInput,
          "fit_projection_bundle: label count does not match features");
  require(num_classes >= 1, ErrorKind::InvalidInput, "fit_projection_bundle: no classes");
  ProjectionBundle bundle;
  bundle.global = fit_pca(train_features, variance_fraction);
  bundle.per_class.reserve(static_cast<std::size_t>(num_classes));
  for (Index c = 0; c < num_classes; ++c) {
    std::vector<Index> rows;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == c + 1) rows.push_back(static_cast<Index>(i));
    }
    require(!rows.empty(), ErrorKind::InvalidInput,
            "class " + std::to_string(c + 1) + " has no training samples");
    Matrix members = train_features(rows, Eigen::all);
    Vector mean = members.colwise().mean().transpose();
    if (members.rows() < 2) {
      bundle.per_class.push_back(Subspace::degenerate(std::move(mean), variance_fraction));
      continue;
    }
    try {
      bundle.per_class.push_back(fit_pca(members, variance_fraction));
    } catch (const DegenerateSubspaceError&) {
      bundle.per_class.push_back(Subspace::degenerate(std::move(mean), variance_fraction));
    }
  }
  return bundle;
}

Vector reconstruct_global(const Subspace& sub, const Eigen::Ref<const Vector>& h) {
  return sub.reconstruct(h);
}

Vector reconstruct_class(const ProjectionBundle& bundle, const Eigen::Ref<const Vector>& h, Index c) {
  return bundle.for_class(c).reconstruct(h);
}

VariantView variant_transform(const ProjectionBundle& bundle, const ClassifierHead& head,
                              const Matrix& features, const Matrix& logits, Variant variant) {
  require(logits.rows() == features.rows(), ErrorKind::InvalidInput,
          "variant_transform: logits and features disagree on sample count");
  const double t = head.temperature;
  VariantView view;
  view.variant = variant;
  switch (variant) {
    case Variant::Unmodified:
      view.features = features;
      view.logits = logits;
      break;
    case Variant::Global:
      view.features = bundle.global.reconstruct_rows(features);
      view.logits = head.logits(view.features);
      break;
    case Variant::Class: {
      const Index c_count = head.num_classes();
      require(bundle.num_classes() == c_count, ErrorKind::InvalidInput,
              "variant_transform: bundle and head disagree on class count");
      view.features = features;
      view.logits.resize(features.rows(), c_count);
      view.class_features.reserve(static_cast<std::size_t>(c_count));
      for (Index c = 0; c < c_count; ++c) {
        Matrix rec = bundle.for_class(c).reconstruct_rows(features);
        view.logits.col(c) = rec * head.weights.row(c).transpose();
        view.logits.col(c).array() += head.bias[c];
        view.class_features.push_back(std::move(rec));
      }
      break;
    }
    case Variant::ClassPred: {
      const std::vector<Index> pred = predict_rows(logits);
      view.features.resize(features.rows(), features.cols());
      for (Index i = 0; i < features.rows(); ++i) {
        view.features.row(i) =
            bundle.for_class(pred[static_cast<std::size_t>(i)]).reconstruct(features.row(i).transpose()).transpose();
      }
      view.logits = head.logits(view.features);
      break;
    }
    case Variant::ClassAvg: {
      require(bundle.num_classes() >= 1, ErrorKind::InvalidInput, "variant_transform: empty bundle");
      view.features = Matrix::Zero(features.rows(), features.cols());
      for (const Subspace& s : bundle.per_class) view.features += s.reconstruct_rows(features);
      view.features /= static_cast<double>(bundle.num_classes());
      view.logits = head.logits(view.features);
      break;
    }
  }
  view.probs = softmax_rows(view.logits, t);
  return view;
}

VariantView variant_transform(const ProjectionBundle& bundle, const ClassifierHead& head,
                              const Matrix& features, const Matrix& logits, Variant variant,
                              std::string_view method_id) {
  require_variant(method_id, variant);
  return variant_transform(bundle, head, features, logits, variant);
}

double pca_rec_error(const Subspace& sub, const Eigen::Ref<const Vector>& h) {
  const double norm = h.norm();
  require(norm > 0.0, ErrorKind::InvalidInput, "pca_rec_error: zero-norm feature");
  return -(h - sub.reconstruct(h)).norm() / norm;
}

double pca_rec_error(const ProjectionBundle& bundle, const Eigen::Ref<const Vector>& h,
                     Variant variant, Index predicted_class) {
  switch (variant) {
    case Variant::Global:
      return pca_rec_error(bundle.global, h);
    case Variant::Class: {
      double best = -std::numeric_limits<double>::infinity();
      for (const Subspace& s : bundle.per_class) best = std::max(best, pca_rec_error(s, h));
      return best;
    }
    case Variant::ClassPred:
      return pca_rec_error(bundle.for_class(predicted_class), h);
    default:
      fail(ErrorKind::UnsupportedVariant,
           "PCA reconstruction error has no " + std::string(to_string(variant)) + " variant");
  }
}

}  // namespace oodlab

#include "doctest.h"

#include <random>

#include "oodlab/projections.hpp"

using namespace oodlab;

namespace {

Matrix gaussian(Index n, Index d, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, scale);
  Matrix m(n, d);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
  return m;
}

ClassifierHead random_head(Index c, Index d, std::uint64_t seed) {
  ClassifierHead h;
  h.weights = gaussian(c, d, seed);
  h.bias = gaussian(c, 1, seed + 1).col(0);
  return h;
}

}  // namespace

TEST_CASE("PCA of points on a line keeps one component along it") {
  Matrix x(20, 2);
  for (Index i = 0; i < 20; ++i) x.row(i) << i - 10.0, 2.0 * (i - 10.0);
  const Subspace s = fit_pca(x, 0.99);
  REQUIRE(s.rank() == 1);
  Vector dir(2);
  dir << 1.0, 2.0;
  dir /= std::sqrt(5.0);
  CHECK(std::abs(std::abs(s.basis.col(0).dot(dir)) - 1.0) < 1e-12);
}

TEST_CASE("fraction 1.0 on isotropic data keeps every direction") {
  CHECK(fit_pca(gaussian(500, 6, 1), 1.0).rank() == 6);
}

TEST_CASE("full-rank reconstruction is the identity") {
  const Matrix x = gaussian(50, 8, 2);
  const Subspace s = fit_pca(x, 1.0);
  CHECK((s.reconstruct_rows(x) - x).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("identical rows raise DegenerateSubspaceError") {
  CHECK_THROWS_AS(fit_pca(Matrix::Ones(5, 3)), DegenerateSubspaceError);
}

TEST_CASE("reconstruction fixed points, projector properties") {
  const Matrix x = gaussian(200, 10, 3) * gaussian(10, 10, 4);
  const Subspace s = fit_pca(x, 0.9);
  const Matrix b = s.basis;
  CHECK((b.transpose() * b - Matrix::Identity(b.cols(), b.cols())).cwiseAbs().maxCoeff() < 1e-8);
  const Matrix p = b * b.transpose();
  CHECK((p * p - p).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((reconstruct_global(s, s.mean) - s.mean).norm() < 1e-10);
  const Vector in_span = s.mean + b * Vector::LinSpaced(b.cols(), 1.0, 2.0);
  CHECK((reconstruct_global(s, in_span) - in_span).norm() < 1e-8);
  const Vector h = gaussian(10, 1, 5).col(0);
  const Vector r = reconstruct_global(s, h);
  CHECK((reconstruct_global(s, r) - r).norm() < 1e-8);
  CHECK(std::abs(pca_rec_error(s, in_span)) < 1e-8);
}

TEST_CASE("pca_rec_error of a vector orthogonal to the subspace through 0 is -1") {
  Subspace s;
  s.mean = Vector::Zero(3);
  s.basis = Matrix::Zero(3, 1);
  s.basis(0, 0) = 1.0;
  s.eigenvalues = Vector::Ones(1);
  Vector h(3);
  h << 0.0, 3.0, 4.0;
  CHECK(pca_rec_error(s, h) == doctest::Approx(-1.0));
}

TEST_CASE("class reconstruction") {
  const Index d = 6;
  Matrix x = gaussian(300, d, 7);
  Labels y(300);
  for (Index i = 0; i < 300; ++i) {
    y[static_cast<std::size_t>(i)] = static_cast<int>(i % 3) + 1;
    x(i, i % 3) += 5.0;
  }
  const ProjectionBundle b = fit_projection_bundle(x, y, 3, 0.8);
  SUBCASE("class mean is a fixed point") {
    for (Index c = 0; c < 3; ++c) {
      const Vector mu = b.per_class[static_cast<std::size_t>(c)].mean;
      CHECK((reconstruct_class(b, mu, c) - mu).norm() < 1e-10);
    }
  }
  SUBCASE("matches the matrix-product definition") {
    const Vector h = gaussian(d, 1, 8).col(0);
    for (Index c = 0; c < 3; ++c) {
      const Subspace& s = b.per_class[static_cast<std::size_t>(c)];
      const Vector direct = s.mean + s.basis * (s.basis.transpose() * (h - s.mean));
      CHECK((reconstruct_class(b, h, c) - direct).norm() < 1e-12);
    }
  }
  SUBCASE("one class equals the global subspace") {
    const Labels one(300, 1);
    const ProjectionBundle b1 = fit_projection_bundle(x, one, 1, 0.8);
    const Vector h = gaussian(d, 1, 9).col(0);
    CHECK((reconstruct_class(b1, h, 0) - reconstruct_global(b1.global, h)).norm() < 1e-10);
  }
}

TEST_CASE("variant_transform") {
  const Index d = 5, c = 3;
  Matrix x = gaussian(240, d, 21);
  Labels y(240);
  for (Index i = 0; i < 240; ++i) {
    y[static_cast<std::size_t>(i)] = static_cast<int>(i % c) + 1;
    x(i, i % c) += 4.0;
  }
  const ProjectionBundle b = fit_projection_bundle(x, y, c, 0.7);
  const ClassifierHead head = random_head(c, d, 22);
  const Matrix feats = gaussian(12, d, 23);
  const Matrix logits = head.logits(feats);

  SUBCASE("Unmodified is the identity") {
    const VariantView v = variant_transform(b, head, feats, logits, Variant::Unmodified);
    CHECK(v.features == feats);
    CHECK(v.logits == logits);
    CHECK((v.probs - softmax_rows(logits)).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("ClassAvg averages the per-class reconstructions") {
    const VariantView v = variant_transform(b, head, feats, logits, Variant::ClassAvg);
    for (Index i = 0; i < feats.rows(); ++i) {
      Vector avg = Vector::Zero(d);
      for (Index k = 0; k < c; ++k) avg += reconstruct_class(b, feats.row(i).transpose(), k) / static_cast<double>(c);
      CHECK((v.features.row(i).transpose() - avg).norm() < 1e-12);
      CHECK((v.logits.row(i).transpose() - head.logits(avg)).norm() < 1e-12);
    }
  }
  SUBCASE("with one class, class variants equal Global") {
    const Labels one(240, 1);
    const ProjectionBundle b1 = fit_projection_bundle(x, one, 1, 0.7);
    ClassifierHead h1;
    h1.weights = head.weights.topRows(1);
    h1.bias = head.bias.head(1);
    const Matrix l1 = h1.logits(feats);
    const VariantView g = variant_transform(b1, h1, feats, l1, Variant::Global);
    for (Variant v : {Variant::ClassPred, Variant::ClassAvg}) {
      const VariantView cv = variant_transform(b1, h1, feats, l1, v);
      CHECK((cv.features - g.features).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
  SUBCASE("method applicability is enforced") {
    CHECK_THROWS_AS(variant_transform(b, head, feats, logits, Variant::Class, "Maha"), Error);
  }
}

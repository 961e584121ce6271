#include "doctest.h"

#include <random>

#include "oodlab/kernel_pca.hpp"
#include "oracles.hpp"

using namespace oodlab;

namespace {

Matrix gaussian(Index n, Index d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Matrix m(n, d);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
  return m;
}

}  // namespace

TEST_CASE("cosine-Gaussian kernel is 1 on identical arguments") {
  const Matrix x = gaussian(10, 4, 1);
  for (Index i = 0; i < 10; ++i) {
    const Vector u = x.row(i).transpose().normalized();
    CHECK(cosine_gaussian(u, u, 0.7) == doctest::Approx(1.0));
  }
}

TEST_CASE("identical training rows give a degenerate model") {
  KpcaOptions o;
  o.sigma = 1.0;
  const KpcaModel m = fit_kpca(Matrix::Ones(8, 3), o);
  CHECK(m.degenerate);
}

TEST_CASE("full spectrum reconstructs training points") {
  const Matrix x = gaussian(12, 5, 2);
  KpcaOptions o;
  o.sigma = 0.8;
  o.spectrum_fraction = 1.0;
  const KpcaModel m = fit_kpca(x, o);
  const Vector e = kpca_rec_errors(m, x, false);
  CHECK(e.maxCoeff() < 1e-6);
}

TEST_CASE("exact mode matches the dense-Gram oracle on held-out points") {
  const Matrix x = gaussian(60, 6, 3);
  KpcaOptions o;
  o.sigma = 0.9;
  o.components = 7;
  const KpcaModel m = fit_kpca(x, o);
  REQUIRE(m.components() == 7);
  const Matrix test = gaussian(10, 6, 4);
  for (bool reg : {false, true}) {
    const Vector e = kpca_rec_errors(m, test, reg);
    for (Index i = 0; i < test.rows(); ++i) {
      CHECK(e[i] == doctest::Approx(oracle::kpca_dense(x, test.row(i).transpose(), 0.9, 7, reg)).epsilon(1e-8));
    }
  }
}

TEST_CASE("Nystrom with every row as landmark matches exact on training rows") {
  const Matrix x = gaussian(200, 8, 5);
  KpcaOptions o;
  o.sigma = 1.0;
  o.components = 10;
  const KpcaModel exact = fit_kpca(x, o);
  o.mode = KpcaMode::Nystrom;
  o.landmarks = 200;
  o.landmark_rule = LandmarkRule::Uniform;
  const KpcaModel ny = fit_kpca(x, o);
  const Vector a = kpca_rec_errors(exact, x, false);
  const Vector b = kpca_rec_errors(ny, x, false);
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("Nystrom error shrinks as nested landmark sets grow") {
  const Matrix x = gaussian(300, 6, 6);
  KpcaOptions o;
  o.sigma = 1.0;
  o.components = 5;
  o.mode = KpcaMode::Nystrom;
  o.landmark_rule = LandmarkRule::Uniform;
  o.seed = 9;
  const KpcaModel exact = fit_kpca(x, [&] { KpcaOptions e = o; e.mode = KpcaMode::Exact; return e; }());
  const Vector ref = kpca_rec_errors(exact, x, false);
  double prev = INFINITY;
  for (Index m : {50, 150, 300}) {
    o.landmarks = m;
    const double gap = (kpca_rec_errors(fit_kpca(x, o), x, false) - ref).cwiseAbs().mean();
    CHECK(gap <= prev + 1e-12);
    prev = gap;
  }
  CHECK(prev < 1e-4);
}

TEST_CASE("median bandwidth heuristic") {
  const Matrix x = gaussian(100, 5, 7);
  const double s = median_bandwidth(x, 0);
  CHECK(s > 0.0);
  CHECK(median_bandwidth(Matrix::Ones(5, 3), 0) == 1.0);
}

TEST_CASE("unfitted model is a state error") {
  try {
    kpca_rec_errors(KpcaModel{}, Matrix::Ones(1, 3), true);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::State);
  }
}

#include "doctest.h"

#include <algorithm>
#include <random>

#include "oodlab/proximity.hpp"
#include "oracles.hpp"

using namespace oodlab;

namespace {

Matrix gaussian(Index n, Index d, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, scale);
  Matrix m(n, d);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
  return m;
}

Matrix unit_rows(Matrix m) {
  for (Index i = 0; i < m.rows(); ++i) m.row(i).normalize();
  return m;
}

}  // namespace

TEST_CASE("Frechet distance") {
  const Matrix a = gaussian(100, 3, 1);
  CHECK(frechet_distance(a, a) == doctest::Approx(0.0).epsilon(1e-9));
  Vector delta(3);
  delta << 1.0, -2.0, 0.5;
  const Matrix b = a.rowwise() + delta.transpose();
  CHECK(frechet_distance(a, b) == doctest::Approx(delta.squaredNorm()).epsilon(1e-9));
  for (int t = 0; t < 10; ++t) {
    const Matrix x = gaussian(50, 2, 10 + t) * gaussian(2, 2, 30 + t);
    const Matrix y = (gaussian(60, 2, 50 + t) * gaussian(2, 2, 70 + t)).array() + 0.3 * t;
    CHECK(frechet_distance(x, y) == doctest::Approx(oracle::frechet_2d(x, y)).epsilon(1e-9));
  }
  CHECK_THROWS_AS(frechet_distance(a.topRows(1), a), Error);
}

TEST_CASE("unbiased polynomial MMD") {
  const Matrix x = unit_rows(gaussian(20, 4, 2));
  CHECK(mmd_poly_unbiased(x, x) == doctest::Approx(oracle::mmd_sums(x, x, 1.0, 3)).epsilon(1e-12));
  Matrix single(2, 3);
  single << 1, 0, 0, 1, 0, 0;
  CHECK(std::abs(mmd_poly_unbiased(single, single, 0.0, 1)) < 1e-15);
  Matrix e1 = Matrix::Zero(5, 4), e2 = Matrix::Zero(6, 4);
  e1.col(0).setOnes();
  e2.col(1).setOnes();
  CHECK(mmd_poly_unbiased(e1, e2, 0.0, 2) == doctest::Approx(oracle::mmd_sums(e1, e2, 0.0, 2)));
  const Matrix y = unit_rows(gaussian(25, 4, 3));
  CHECK(mmd_poly_unbiased(x, y, 0.5, 2) == doctest::Approx(oracle::mmd_sums(x, y, 0.5, 2)).epsilon(1e-12));
  CHECK_THROWS_AS(mmd_poly_unbiased(x.topRows(1), y), Error);
}

TEST_CASE("class-aware distances") {
  EmbeddingSet id;
  id.embeddings = unit_rows(gaussian(40, 5, 4));
  Labels labels(40);
  for (Index i = 0; i < 40; ++i) labels[static_cast<std::size_t>(i)] = static_cast<int>(i % 2) + 1;
  id.labels = labels;
  Matrix text = Matrix::Zero(2, 5);
  text(0, 0) = 1.0;
  text(1, 1) = 1.0;
  Vector centroid = Vector::Zero(5);
  for (Index i = 0; i < 40; i += 2) centroid += id.embeddings.row(i).transpose();
  centroid.normalize();
  SUBCASE("a centroid is at distance 0, an orthogonal point at text distance 1") {
    Matrix ood(2, 5);
    ood.row(0) = centroid.transpose();
    ood.row(1) << 0, 0, 0, 1, 0;
    const ClassAwareDistances one = class_aware_distances(id, text, ood.topRows(1));
    CHECK(std::abs(one.mean_nc) < 1e-12);
    const ClassAwareDistances orth = class_aware_distances(id, text, ood.bottomRows(1));
    CHECK(orth.mean_it == doctest::Approx(1.0));
  }
  SUBCASE("random OOD set against a max scan") {
    const Matrix ood = unit_rows(gaussian(30, 5, 5));
    Matrix cents = Matrix::Zero(2, 5);
    for (Index i = 0; i < 40; ++i) cents.row(i % 2) += id.embeddings.row(i);
    for (Index c = 0; c < 2; ++c) cents.row(c).normalize();
    double nc = 0, it = 0;
    for (Index i = 0; i < 30; ++i) {
      nc += 1.0 - (cents * ood.row(i).transpose()).maxCoeff();
      it += 1.0 - (text * ood.row(i).transpose()).maxCoeff();
    }
    const ClassAwareDistances d = class_aware_distances(id, text, ood);
    CHECK(d.mean_nc == doctest::Approx(nc / 30).epsilon(1e-12));
    CHECK(d.mean_it == doctest::Approx(it / 30).epsilon(1e-12));
  }
  SUBCASE("an empty class is reported") {
    EmbeddingSet bad = id;
    bad.labels = Labels(40, 1);
    CHECK_THROWS_WITH_AS(class_aware_distances(bad, text, id.embeddings), doctest::Contains("class 2"), Error);
  }
}

TEST_CASE("bucketize") {
  SUBCASE("CIFAR-10 published distances reproduce the near/mid/far table") {
    // (FD, MMD, d_NC, d_IT) per OOD set.
    const std::vector<ProximityVector> sets{
        {"CIFAR-100", {0.1592, 0.0002, 0.8085, 0.7885}}, {"TinyImagenet", {0.3233, 0.0009, 0.9256, 0.8060}},
        {"iSUN", {0.4890, 0.0015, 0.8393, 0.7943}},      {"LSUN(r)", {0.5248, 0.0016, 0.8634, 0.8045}},
        {"LSUN(c)", {0.5129, 0.0015, 0.8168, 0.7797}},   {"SVHN", {0.7009, 0.0020, 0.8607, 0.7744}},
        {"Places365", {0.6379, 0.0021, 1.1471, 0.8337}}, {"Textures", {0.6698, 0.0020, 1.0647, 0.8231}}};
    const BucketResult r = bucketize(sets);
    const std::vector<Bucket> expected{Bucket::Near, Bucket::Near, Bucket::Mid, Bucket::Mid,
                                       Bucket::Mid,  Bucket::Mid,  Bucket::Far, Bucket::Far};
    CHECK(r.buckets == expected);
  }
  SUBCASE("three separated singletons are ordered by distance") {
    const std::vector<ProximityVector> sets{{"far", {9, 9, 9, 9}}, {"near", {0, 0, 0, 0}}, {"mid", {4, 4, 4, 4}}};
    const BucketResult r = bucketize(sets);
    CHECK(r.buckets == std::vector<Bucket>{Bucket::Far, Bucket::Near, Bucket::Mid});
  }
  SUBCASE("input order does not matter") {
    std::vector<ProximityVector> sets;
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u;
    for (int i = 0; i < 12; ++i) sets.push_back({"s" + std::to_string(i), {u(rng), u(rng), u(rng), u(rng)}});
    const BucketResult base = bucketize(sets);
    for (int t = 0; t < 10; ++t) {
      std::vector<ProximityVector> perm = sets;
      std::shuffle(perm.begin(), perm.end(), rng);
      const BucketResult r = bucketize(perm);
      for (std::size_t i = 0; i < perm.size(); ++i) {
        const auto it = std::find(base.names.begin(), base.names.end(), perm[i].name);
        CHECK(r.buckets[i] == base.buckets[static_cast<std::size_t>(it - base.names.begin())]);
      }
    }
  }
  SUBCASE("constant coordinates are dropped with a warning") {
    const std::vector<ProximityVector> sets{{"a", {0, 1, 0, 0}}, {"b", {5, 1, 5, 5}}, {"c", {10, 1, 10, 10}}};
    const BucketResult r = bucketize(sets);
    CHECK(r.used_coordinates == std::vector<int>{0, 2, 3});
    CHECK_FALSE(r.warnings.empty());
  }
  SUBCASE("fewer than three sets") {
    CHECK_THROWS_AS(bucketize({{"a", {0, 0, 0, 0}}, {"b", {1, 1, 1, 1}}}), Error);
  }
}

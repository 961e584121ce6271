#include "oodlab/proximity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "oodlab/random.hpp"

namespace oodlab {

namespace {

Matrix sample_covariance(const Matrix& x, Vector& mean) {
  mean = x.colwise().mean().transpose();
  const Matrix c = x.rowwise() - mean.transpose();
  return c.transpose() * c / static_cast<double>(x.rows() - 1);
}

Matrix psd_sqrt(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
  require(eig.info() == Eigen::Success, ErrorKind::Numerical, "matrix square root: eigen-decomposition failed");
  const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

double polynomial_sum(const Matrix& a, const Matrix& b, double c, int degree, bool skip_diagonal) {
  const Matrix gram = ((a * b.transpose()).array() + c).pow(static_cast<double>(degree)).matrix();
  double total = gram.sum();
  if (skip_diagonal) total -= gram.diagonal().sum();
  return total;
}

double squared_distance(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
  return (a - b).squaredNorm();
}

struct KMeansRun {
  std::vector<int> assignment;
  Matrix centers;
  double inertia = std::numeric_limits<double>::infinity();
};

KMeansRun lloyd(const Matrix& x, Rng& rng, int max_iterations) {
  const Index n = x.rows();
  constexpr Index k = 3;
  KMeansRun run;
  run.centers.resize(k, x.cols());
  // k-means++ seeding.
  run.centers.row(0) = x.row(static_cast<Index>(rng.below(static_cast<std::uint64_t>(n))));
  Vector d2(n);
  for (Index c = 1; c < k; ++c) {
    for (Index i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (Index j = 0; j < c; ++j) best = std::min(best, squared_distance(x.row(i), run.centers.row(j)));
      d2[i] = best;
    }
    const double total = d2.sum();
    Index pick = n - 1;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      for (Index i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > target && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
    }
    run.centers.row(c) = x.row(pick);
  }

  run.assignment.assign(static_cast<std::size_t>(n), -1);
  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    for (Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = squared_distance(x.row(i), run.centers.row(0));
      for (int c = 1; c < k; ++c) {
        const double d = squared_distance(x.row(i), run.centers.row(c));
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (run.assignment[static_cast<std::size_t>(i)] != best) {
        run.assignment[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    // An empty cluster takes the point farthest from its centre among clusters with >1 member.
    for (int c = 0; c < k; ++c) {
      std::vector<Index> sizes(k, 0);
      for (int a : run.assignment) ++sizes[static_cast<std::size_t>(a)];
      if (sizes[static_cast<std::size_t>(c)] > 0) continue;
      Index far = -1;
      double far_d = -1.0;
      for (Index i = 0; i < n; ++i) {
        const int a = run.assignment[static_cast<std::size_t>(i)];
        if (sizes[static_cast<std::size_t>(a)] < 2) continue;
        const double d = squared_distance(x.row(i), run.centers.row(a));
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far >= 0) {
        run.assignment[static_cast<std::size_t>(far)] = c;
        changed = true;
      }
    }
    Matrix next = Matrix::Zero(k, x.cols());
    std::vector<Index> counts(k, 0);
    for (Index i = 0; i < n; ++i) {
      const int a = run.assignment[static_cast<std::size_t>(i)];
      next.row(a) += x.row(i);
      ++counts[static_cast<std::size_t>(a)];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) next.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
      else next.row(c) = run.centers.row(c);
    }
    run.centers = next;
    if (!changed) break;
  }
  run.inertia = 0.0;
  for (Index i = 0; i < n; ++i) {
    run.inertia += squared_distance(x.row(i), run.centers.row(run.assignment[static_cast<std::size_t>(i)]));
  }
  return run;
}

}  // namespace

void EmbeddingSet::validate() const {
  const std::string where = "embedding set '" + dataset_id + "'";
  require(embeddings.rows() >= 1, ErrorKind::InvalidInput, where + " is empty");
  require(embeddings.allFinite(), ErrorKind::InvalidInput, where + " contains non-finite values");
  for (Index i = 0; i < embeddings.rows(); ++i) {
    require(std::abs(embeddings.row(i).norm() - 1.0) <= 1e-6, ErrorKind::InvalidInput,
            where + ": row " + std::to_string(i) + " is not unit-norm");
  }
  if (labels) {
    require(static_cast<Index>(labels->size()) == embeddings.rows(), ErrorKind::InvalidInput,
            where + ": label count does not match rows");
  }
  if (text_prototypes) {
    require(text_prototypes->cols() == embeddings.cols(), ErrorKind::InvalidInput,
            where + ": text prototypes have the wrong dimension");
  }
}

double frechet_distance(const Matrix& a, const Matrix& b) {
  require(a.rows() >= 2 && b.rows() >= 2, ErrorKind::InvalidInput, "Frechet distance needs at least 2 rows per set");
  require(a.cols() == b.cols(), ErrorKind::InvalidInput, "Frechet distance: dimension mismatch");
  Vector mu_a;
  Vector mu_b;
  const Matrix sa = sample_covariance(a, mu_a);
  const Matrix sb = sample_covariance(b, mu_b);
  const Matrix root_a = psd_sqrt(sa);
  const Matrix inner = root_a * sb * root_a;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  require(eig.info() == Eigen::Success, ErrorKind::Numerical, "Frechet distance: eigen-decomposition failed");
  const double cross = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double fd = (mu_a - mu_b).squaredNorm() + sa.trace() + sb.trace() - 2.0 * cross;
  return std::max(fd, 0.0);
}

double mmd_poly_unbiased(const Matrix& x, const Matrix& y, double c, int degree) {
  const double n = static_cast<double>(x.rows());
  const double m = static_cast<double>(y.rows());
  require(x.rows() >= 2 && y.rows() >= 2, ErrorKind::InvalidInput, "MMD needs at least 2 rows per set");
  require(x.cols() == y.cols(), ErrorKind::InvalidInput, "MMD: dimension mismatch");
  require(degree >= 1, ErrorKind::InvalidConfig, "MMD: polynomial degree must be at least 1");
  const double xx = polynomial_sum(x, x, c, degree, true) / (n * (n - 1.0));
  const double yy = polynomial_sum(y, y, c, degree, true) / (m * (m - 1.0));
  const double xy = polynomial_sum(x, y, c, degree, false) / (n * m);
  return xx + yy - 2.0 * xy;
}

ClassAwareDistances class_aware_distances(const EmbeddingSet& id_set, const Matrix& text_prototypes,
                                          const Matrix& ood_embeddings) {
  require(id_set.labels.has_value(), ErrorKind::InvalidInput, "class-aware distances need ID labels");
  require(ood_embeddings.rows() >= 1, ErrorKind::InvalidInput, "class-aware distances: empty OOD set");
  const Index k = text_prototypes.rows();
  require(k >= 1 && text_prototypes.cols() == id_set.embeddings.cols() &&
              ood_embeddings.cols() == id_set.embeddings.cols(),
          ErrorKind::InvalidInput, "class-aware distances: dimension mismatch");
  for (Index c = 0; c < k; ++c) {
    require(std::abs(text_prototypes.row(c).norm() - 1.0) <= 1e-6, ErrorKind::InvalidInput,
            "text prototype " + std::to_string(c + 1) + " is not unit-norm");
  }
  Matrix centroids = Matrix::Zero(k, id_set.embeddings.cols());
  std::vector<Index> counts(static_cast<std::size_t>(k), 0);
  for (std::size_t i = 0; i < id_set.labels->size(); ++i) {
    const int y = (*id_set.labels)[i];
    require(y >= 1 && y <= k, ErrorKind::InvalidInput,
            "ID embedding label " + std::to_string(y) + " outside 1.." + std::to_string(k));
    centroids.row(y - 1) += id_set.embeddings.row(static_cast<Index>(i));
    ++counts[static_cast<std::size_t>(y - 1)];
  }
  for (Index c = 0; c < k; ++c) {
    require(counts[static_cast<std::size_t>(c)] > 0, ErrorKind::InvalidInput,
            "class " + std::to_string(c + 1) + " has no ID embeddings");
    const double norm = centroids.row(c).norm();
    require(norm > 0.0, ErrorKind::InvalidInput, "class " + std::to_string(c + 1) + " centroid has zero norm");
    centroids.row(c) /= norm;
  }
  const Matrix nc = ood_embeddings * centroids.transpose();
  const Matrix it = ood_embeddings * text_prototypes.transpose();
  ClassAwareDistances out;
  out.mean_nc = (1.0 - nc.rowwise().maxCoeff().array()).mean();
  out.mean_it = (1.0 - it.rowwise().maxCoeff().array()).mean();
  return out;
}

ProximityVector proximity_vector(const EmbeddingSet& id_set, const EmbeddingSet& ood_set, double mmd_c,
                                 int mmd_degree) {
  require(id_set.text_prototypes.has_value(), ErrorKind::InvalidInput,
          "embedding set '" + id_set.dataset_id + "' has no text prototypes");
  ProximityVector pv;
  pv.name = ood_set.dataset_id;
  const ClassAwareDistances cad = class_aware_distances(id_set, *id_set.text_prototypes, ood_set.embeddings);
  pv.v = {frechet_distance(id_set.embeddings, ood_set.embeddings),
          mmd_poly_unbiased(id_set.embeddings, ood_set.embeddings, mmd_c, mmd_degree), cad.mean_nc, cad.mean_it};
  return pv;
}

std::string_view to_string(Bucket b) noexcept {
  switch (b) {
    case Bucket::Near: return "near";
    case Bucket::Mid: return "mid";
    case Bucket::Far: return "far";
  }
  return "?";
}

Bucket parse_bucket(std::string_view name) {
  for (Bucket b : {Bucket::Near, Bucket::Mid, Bucket::Far}) {
    if (to_string(b) == name) return b;
  }
  fail(ErrorKind::InvalidConfig, "unknown bucket '" + std::string(name) + "'");
}

BucketResult bucketize(const std::vector<ProximityVector>& sets, const BucketOptions& options) {
  const Index n = static_cast<Index>(sets.size());
  require(n >= 3, ErrorKind::InvalidInput, "bucketize needs at least 3 OOD sets");
  require(options.restarts >= 1 && options.max_iterations >= 1, ErrorKind::InvalidConfig,
          "bucketize: restarts and iterations must be positive");
  for (const ProximityVector& s : sets) {
    for (double x : s.v) require(std::isfinite(x), ErrorKind::InvalidInput, "set '" + s.name + "' has a non-finite distance");
  }

  // Canonical order: by name, then by the raw vector.
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    const auto& x = sets[static_cast<std::size_t>(a)];
    const auto& y = sets[static_cast<std::size_t>(b)];
    if (x.name != y.name) return x.name < y.name;
    return x.v < y.v;
  });

  BucketResult res;
  Matrix raw(n, 4);
  for (Index i = 0; i < n; ++i) {
    for (int j = 0; j < 4; ++j) raw(i, j) = sets[static_cast<std::size_t>(i)].v[static_cast<std::size_t>(j)];
  }
  std::vector<double> means;
  std::vector<double> stds;
  for (int j = 0; j < 4; ++j) {
    const double mean = raw.col(j).mean();
    const double sd = std::sqrt((raw.col(j).array() - mean).square().mean());
    if (sd > 1e-12 * std::max(1.0, std::abs(mean))) {
      res.used_coordinates.push_back(j);
      means.push_back(mean);
      stds.push_back(sd);
    } else {
      res.warnings.push_back("coordinate " + std::string(kProximityCoordinates[static_cast<std::size_t>(j)]) +
                             " has zero spread and is dropped");
    }
  }
  require(!res.used_coordinates.empty(), ErrorKind::InvalidInput, "bucketize: every coordinate is constant");
  const Index d = static_cast<Index>(res.used_coordinates.size());
  res.standardized.resize(n, d);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) {
      const int c = res.used_coordinates[static_cast<std::size_t>(j)];
      res.standardized(i, j) = (raw(i, c) - means[static_cast<std::size_t>(j)]) / stds[static_cast<std::size_t>(j)];
    }
  }
  Matrix canon(n, d);
  for (Index r = 0; r < n; ++r) canon.row(r) = res.standardized.row(order[static_cast<std::size_t>(r)]);
  {
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(d)));
    for (Index r = 0; r < n; ++r) {
      for (Index j = 0; j < d; ++j) rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)] = canon(r, j);
    }
    std::sort(rows.begin(), rows.end());
    const auto distinct = std::unique(rows.begin(), rows.end()) - rows.begin();
    require(distinct >= 3, ErrorKind::InvalidInput, "bucketize needs at least 3 distinct distance vectors");
  }

  Rng rng(options.seed);
  KMeansRun best;
  for (int r = 0; r < options.restarts; ++r) {
    KMeansRun run = lloyd(canon, rng, options.max_iterations);
    if (run.inertia < best.inertia - 1e-12) best = std::move(run);
  }
  res.inertia = best.inertia;

  // Order clusters by the mean standardized coordinate of their members, FD breaking ties.
  struct ClusterKey {
    int cluster;
    double score;
    double fd;
  };
  std::vector<ClusterKey> keys;
  for (int c = 0; c < 3; ++c) {
    double score = 0.0;
    double fd = 0.0;
    Index count = 0;
    for (Index r = 0; r < n; ++r) {
      if (best.assignment[static_cast<std::size_t>(r)] != c) continue;
      score += canon.row(r).mean();
      fd += raw(order[static_cast<std::size_t>(r)], 0);
      ++count;
    }
    keys.push_back({c, count ? score / static_cast<double>(count) : std::numeric_limits<double>::infinity(),
                    count ? fd / static_cast<double>(count) : std::numeric_limits<double>::infinity()});
  }
  std::stable_sort(keys.begin(), keys.end(), [](const ClusterKey& a, const ClusterKey& b) {
    if (a.score != b.score) return a.score < b.score;
    return a.fd < b.fd;
  });
  std::array<Bucket, 3> label{};
  res.centroids.resize(3, d);
  for (int rank = 0; rank < 3; ++rank) {
    label[static_cast<std::size_t>(keys[static_cast<std::size_t>(rank)].cluster)] = static_cast<Bucket>(rank);
    res.centroids.row(rank) = best.centers.row(keys[static_cast<std::size_t>(rank)].cluster);
  }
  res.names.resize(static_cast<std::size_t>(n));
  res.buckets.resize(static_cast<std::size_t>(n));
  for (Index r = 0; r < n; ++r) {
    const Index i = order[static_cast<std::size_t>(r)];
    res.names[static_cast<std::size_t>(i)] = sets[static_cast<std::size_t>(i)].name;
    res.buckets[static_cast<std::size_t>(i)] = label[static_cast<std::size_t>(best.assignment[static_cast<std::size_t>(r)])];
  }
  return res;
}

}  // namespace oodlab

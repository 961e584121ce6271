#pragma once
// Slow, direct evaluations used as references by the unit and acceptance tests. None of these
// call into the library's implementations of the quantity being checked.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "oodlab/core.hpp"
#include "oodlab/metrics.hpp"

namespace oracle {

using oodlab::Index;
using oodlab::Matrix;
using oodlab::Vector;

inline std::vector<long double> softmax_ld(const Vector& logits, long double t = 1.0L) {
  std::vector<long double> e(static_cast<std::size_t>(logits.size()));
  long double z = 0.0L;
  for (Index k = 0; k < logits.size(); ++k) {
    e[static_cast<std::size_t>(k)] = std::exp(static_cast<long double>(logits[k]) / t);
    z += e[static_cast<std::size_t>(k)];
  }
  for (auto& v : e) v /= z;
  return e;
}

// a is admitted no later than b: higher confidence first, failures first on ties, then index.
inline bool precedes_or_equal(const std::vector<oodlab::LabeledOutcome>& o, std::size_t a, std::size_t b) {
  if (a == b) return true;
  if (o[a].confidence != o[b].confidence) return o[a].confidence > o[b].confidence;
  if (o[a].failure != o[b].failure) return o[a].failure;
  return a < b;
}

// Mean selective / generalized risk over coverages i/N, counting each prefix from scratch.
inline std::pair<double, double> risks_recount(const std::vector<oodlab::LabeledOutcome>& o) {
  const std::size_t n = o.size();
  long double sel = 0.0L, gen = 0.0L;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t covered = 0, failed = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (precedes_or_equal(o, j, i)) {
        ++covered;
        failed += o[j].failure ? 1 : 0;
      }
    }
    sel += static_cast<long double>(failed) / static_cast<long double>(covered);
    gen += static_cast<long double>(failed) / static_cast<long double>(n);
  }
  return {static_cast<double>(sel / n), static_cast<double>(gen / n)};
}

inline double auroc_pairs(const std::vector<double>& pos, const std::vector<double>& neg) {
  long double wins = 0.0L;
  for (double p : pos) {
    for (double q : neg) wins += p > q ? 1.0L : (p == q ? 0.5L : 0.0L);
  }
  return static_cast<double>(wins / (static_cast<long double>(pos.size()) * neg.size()));
}

// Lower the threshold through every distinct ID score until TPR reaches the target.
inline double fpr_scan(const std::vector<double>& pos, const std::vector<double>& neg, double tpr) {
  std::vector<double> thresholds = pos;
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  for (double t : thresholds) {
    const auto tp = std::count_if(pos.begin(), pos.end(), [&](double s) { return s >= t; });
    if (static_cast<double>(tp) >= tpr * static_cast<double>(pos.size()) - 1e-12) {
      const auto fp = std::count_if(neg.begin(), neg.end(), [&](double s) { return s >= t; });
      return static_cast<double>(fp) / static_cast<double>(neg.size());
    }
  }
  return 1.0;
}

// Every subset that is a clique and cannot be extended, sorted lexicographically.
inline std::vector<std::vector<Index>> maximal_cliques_bruteforce(const std::vector<std::vector<char>>& adj) {
  const int n = static_cast<int>(adj.size());
  std::vector<std::vector<Index>> out;
  auto is_clique = [&](std::uint32_t mask) {
    for (int i = 0; i < n; ++i) {
      if (!(mask >> i & 1u)) continue;
      for (int j = i + 1; j < n; ++j) {
        if ((mask >> j & 1u) && !adj[i][j]) return false;
      }
    }
    return true;
  };
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    if (!is_clique(mask)) continue;
    bool maximal = true;
    for (int v = 0; v < n && maximal; ++v) {
      if (!(mask >> v & 1u) && is_clique(mask | (1u << v))) maximal = false;
    }
    if (!maximal) continue;
    std::vector<Index> c;
    for (int v = 0; v < n; ++v) {
      if (mask >> v & 1u) c.push_back(v);
    }
    out.push_back(std::move(c));
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Q = 12N / (k(k+1)) sum Rbar^2 - 3N(k+1), ranks recounted per row with mid-ranks.
inline double friedman_q(const Matrix& values) {
  const Index n = values.rows(), k = values.cols();
  std::vector<long double> sums(static_cast<std::size_t>(k), 0.0L);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < k; ++j) {
      long double less = 0, equal = 0;
      for (Index l = 0; l < k; ++l) {
        if (values(i, l) < values(i, j)) ++less;
        if (values(i, l) == values(i, j)) ++equal;
      }
      sums[static_cast<std::size_t>(j)] += less + (equal + 1) / 2.0L;
    }
  }
  long double s = 0;
  for (auto v : sums) s += (v / n) * (v / n);
  return static_cast<double>(12.0L * n / (k * (k + 1.0L)) * s - 3.0L * n * (k + 1));
}

inline std::vector<double> holm_direct(const std::vector<double>& p) {
  const std::size_t m = p.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    double best = 0.0;
    for (std::size_t j = 0; j <= i; ++j) best = std::max(best, std::min(1.0, static_cast<double>(m - j) * p[order[j]]));
    out[order[i]] = best;
  }
  return out;
}

// Mean averaged cross-entropy against a uniform target, as a function of the weights.
inline long double uniform_ce(const Matrix& w, const Vector& b, const Vector& h) {
  const Index c = w.rows();
  std::vector<long double> l(static_cast<std::size_t>(c));
  long double mx = -INFINITY;
  for (Index k = 0; k < c; ++k) {
    long double v = b[k];
    for (Index d = 0; d < h.size(); ++d) v += static_cast<long double>(w(k, d)) * h[d];
    l[static_cast<std::size_t>(k)] = v;
    mx = std::max(mx, v);
  }
  long double z = 0;
  for (auto v : l) z += std::exp(v - mx);
  const long double lse = mx + std::log(z);
  long double loss = 0;
  for (auto v : l) loss += lse - v;
  return loss / c;
}

// Entrywise q-norm of the central-difference gradient of uniform_ce with respect to W.
inline double gradnorm_fd(const Matrix& w, const Vector& b, const Vector& h, int q, double step = 1e-5) {
  long double acc = 0;
  Matrix wp = w;
  for (Index k = 0; k < w.rows(); ++k) {
    for (Index d = 0; d < w.cols(); ++d) {
      const double orig = wp(k, d);
      wp(k, d) = orig + step;
      const long double up = uniform_ce(wp, b, h);
      wp(k, d) = orig - step;
      const long double dn = uniform_ce(wp, b, h);
      wp(k, d) = orig;
      const long double g = (up - dn) / (2.0L * step);
      acc += q == 1 ? std::fabs(g) : g * g;
    }
  }
  return static_cast<double>(q == 1 ? acc : std::sqrt(acc));
}

inline long double poly_kernel(const Matrix& a, Index i, const Matrix& b, Index j, double c, int degree) {
  long double dot = 0;
  for (Index d = 0; d < a.cols(); ++d) dot += static_cast<long double>(a(i, d)) * b(j, d);
  return std::pow(dot + c, degree);
}

// Three-term U-statistic written out as explicit sums.
inline double mmd_sums(const Matrix& x, const Matrix& y, double c, int degree) {
  const Index m = x.rows(), n = y.rows();
  long double xx = 0, yy = 0, xy = 0;
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < m; ++j) {
      if (i != j) xx += poly_kernel(x, i, x, j, c, degree);
    }
  }
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i != j) yy += poly_kernel(y, i, y, j, c, degree);
    }
  }
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < n; ++j) xy += poly_kernel(x, i, y, j, c, degree);
  }
  return static_cast<double>(xx / (m * (m - 1.0L)) + yy / (n * (n - 1.0L)) - 2.0L * xy / (static_cast<long double>(m) * n));
}

// Square root of a 2x2 SPD matrix: (M + sqrt(det) I) / sqrt(tr + 2 sqrt(det)).
inline Eigen::Matrix<long double, 2, 2> sqrt2x2(const Eigen::Matrix<long double, 2, 2>& m) {
  const long double s = std::sqrt(m.determinant());
  const long double t = std::sqrt(m.trace() + 2.0L * s);
  return (m + s * Eigen::Matrix<long double, 2, 2>::Identity()) / t;
}

// Squared Frechet distance of 2-D Gaussian fits via the closed-form matrix square root.
inline double frechet_2d(const Matrix& a, const Matrix& b) {
  using M2 = Eigen::Matrix<long double, 2, 2>;
  using V2 = Eigen::Matrix<long double, 2, 1>;
  auto fit = [](const Matrix& x, V2& mu, M2& cov) {
    mu.setZero();
    for (Index i = 0; i < x.rows(); ++i) mu += x.row(i).transpose().cast<long double>();
    mu /= x.rows();
    cov.setZero();
    for (Index i = 0; i < x.rows(); ++i) {
      const V2 d = x.row(i).transpose().cast<long double>() - mu;
      cov += d * d.transpose();
    }
    cov /= (x.rows() - 1);
  };
  V2 ma, mb;
  M2 ca, cb;
  fit(a, ma, ca);
  fit(b, mb, cb);
  const M2 ra = sqrt2x2(ca);
  const M2 inner = sqrt2x2(ra * cb * ra);
  return static_cast<double>((ma - mb).squaredNorm() + (ca + cb - 2.0L * inner).trace());
}

// Regret log sum_k p_k / (p_k + p_k^{h^T g} (1 - p_k)) with g from the pseudo-inverse of the
// row-normalized training matrix, all in long double.
inline double pnml_direct(const Matrix& train, const Vector& h_raw, const Vector& p) {
  using ML = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  using VL = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
  ML hn = train.cast<long double>();
  for (Index i = 0; i < hn.rows(); ++i) hn.row(i) /= hn.row(i).norm();
  Eigen::JacobiSVD<ML> svd(hn, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const long double tol = std::max(hn.rows(), hn.cols()) * 1e-16L * (s.size() ? s[0] : 0.0L);
  ML pinv = ML::Zero(hn.cols(), hn.rows());
  for (Index k = 0; k < s.size(); ++k) {
    if (s[k] > tol) pinv += svd.matrixV().col(k) * svd.matrixU().col(k).transpose() / s[k];
  }
  VL h = h_raw.cast<long double>();
  h /= h.norm();
  const ML proj = pinv * hn;
  const VL perp = h - proj * h;
  VL g;
  if (perp.squaredNorm() > 1e-10L) {
    g = perp / perp.squaredNorm();
  } else {
    const VL x = pinv * pinv.transpose() * h;
    g = x / (1.0L + h.dot(x));
  }
  const long double e = h.dot(g);
  long double sum = 0;
  for (Index k = 0; k < p.size(); ++k) {
    const long double pk = p[k];
    if (pk > 0) sum += pk / (pk + std::pow(pk, e) * (1.0L - pk));
  }
  return static_cast<double>(std::log(sum));
}

// Exact KPCA reconstruction error from a dense centered Gram matrix and its own eigensolve.
inline double kpca_dense(const Matrix& train, const Vector& x_raw, double sigma, Index q, bool regularized) {
  const Index n = train.rows();
  Matrix u = train;
  for (Index i = 0; i < n; ++i) u.row(i).normalize();
  const Vector x = x_raw.normalized();
  auto k = [&](const Vector& a, const Vector& b) { return std::exp(-(1.0 - a.dot(b)) / (sigma * sigma)); };
  Matrix kk(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) kk(i, j) = k(u.row(i).transpose(), u.row(j).transpose());
  }
  const Matrix one = Matrix::Constant(n, n, 1.0 / n);
  const Matrix kc = kk - one * kk - kk * one + one * kk * one;
  Eigen::SelfAdjointEigenSolver<Matrix> es(kc);
  Vector kx(n);
  for (Index i = 0; i < n; ++i) kx[i] = k(x, u.row(i).transpose());
  const Vector colmean = kk.colwise().mean().transpose();
  const double allmean = kk.mean();
  const Vector kxc = kx - Vector::Constant(n, kx.mean()) - colmean + Vector::Constant(n, allmean);
  const double kxx = 1.0 - 2.0 * kx.mean() + allmean;
  double e = kxx;
  for (Index m = 0; m < q; ++m) {
    const Index col = n - 1 - m;  // eigenvalues ascending
    const double lam = es.eigenvalues()[col];
    const double phi = es.eigenvectors().col(col).dot(kxc) / std::sqrt(lam);
    e -= phi * phi;
  }
  e = std::max(e, 0.0);
  return regularized ? e / std::sqrt(kxx) : e;
}

}  // namespace oracle

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "oodlab/core.hpp"

namespace oodlab {

/// Unit-norm image embeddings, optionally with labels (1..K) and K unit text prototypes.
struct EmbeddingSet {
  Matrix embeddings;
  std::optional<Labels> labels;
  std::optional<Matrix> text_prototypes;
  std::string dataset_id;

  void validate() const;
};

/// Squared Frechet distance between Gaussian fits (covariances with 1/(n-1)).
double frechet_distance(const Matrix& a, const Matrix& b);

/// Unbiased MMD^2 under k(u, v) = (u^T v + c)^degree.
double mmd_poly_unbiased(const Matrix& x, const Matrix& y, double c = 1.0, int degree = 3);

struct ClassAwareDistances {
  double mean_nc = 0.0;  // 1 - max_c z^T mu_c over renormalized class centroids
  double mean_it = 0.0;  // 1 - max_c z^T t_c over text prototypes
};

ClassAwareDistances class_aware_distances(const EmbeddingSet& id_set, const Matrix& text_prototypes,
                                          const Matrix& ood_embeddings);

/// Coordinates in the order FD^2, MMD^2, mean d_NC, mean d_IT.
struct ProximityVector {
  std::string name;
  std::array<double, 4> v{};
};

inline constexpr std::array<std::string_view, 4> kProximityCoordinates{"fd2", "mmd2", "d_nc", "d_it"};

ProximityVector proximity_vector(const EmbeddingSet& id_set, const EmbeddingSet& ood_set,
                                 double mmd_c = 1.0, int mmd_degree = 3);

enum class Bucket { Near, Mid, Far };

std::string_view to_string(Bucket b) noexcept;
Bucket parse_bucket(std::string_view name);

struct BucketOptions {
  std::uint64_t seed = 0;
  int restarts = 50;
  int max_iterations = 300;
};

struct BucketResult {
  std::vector<std::string> names;     // input order
  std::vector<Bucket> buckets;        // input order
  Matrix standardized;                // input order, dropped coordinates removed
  std::vector<int> used_coordinates;  // indices into the 4 coordinates
  Matrix centroids;                   // near, mid, far rows
  double inertia = 0.0;
  std::vector<std::string> warnings;
};

/// z-scores every coordinate across sets, runs seeded k-means++ (k = 3) with restarts on a
/// canonical ordering of the inputs and labels clusters near < mid < far by the mean
/// standardized coordinate of their members.
BucketResult bucketize(const std::vector<ProximityVector>& sets, const BucketOptions& options = {});

}  // namespace oodlab

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "oodlab/core.hpp"
#include "oodlab/proximity.hpp"

namespace oodlab {

/// Two Gaussian ID classes at distance `separation` sigma from the origin along e_1 and e_2,
/// with within-class noise sigma on the first six axes and 0.05 sigma elsewhere. OOD sets sit
/// at the class midpoint pushed `shift` sigma along e_7 with the same noise.
struct SyntheticOptions {
  Index dim = 32;
  Index n_train = 2000;
  Index n_validation = 1000;
  Index n_test = 2000;
  Index n_ood = 2000;
  double sigma = 1.0;
  double separation = 10.0;
  std::vector<double> ood_shifts{6.0};
  double logit_scale = 8.0;     // top-class logit at a class mean
  double label_noise = 0.03;    // flipped labels on validation / test, creating ID failures
  int passes = 50;
  double dropout = 0.1;
  Index clip_dim = 16;
  Index clip_rows = 400;
  std::uint64_t seed = 0;
};

struct SyntheticBenchmark {
  ClassifierHead head;
  FeatureSet train;
  FeatureSet validation;
  FeatureSet test;
  std::vector<FeatureSet> ood;
  EmbeddingSet clip_id;
  std::vector<EmbeddingSet> clip_ood;
};

SyntheticBenchmark make_synthetic(const SyntheticOptions& options = {});

}  // namespace oodlab

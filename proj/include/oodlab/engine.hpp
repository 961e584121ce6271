#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <tuple>

#include "oodlab/core.hpp"
#include "oodlab/detectors.hpp"
#include "oodlab/kernel_pca.hpp"
#include "oodlab/projections.hpp"

namespace oodlab {

struct EngineOptions {
  double variance_fraction = kDefaultVarianceFraction;
  KpcaOptions kpca;
  /// When set, KPCA runs exactly up to this many training rows and switches to Nystrom above.
  std::optional<Index> kpca_exact_limit = 1000;
  bool kpca_regularized = true;
  McAggregation mc_mode = McAggregation::MeanProbability;
  std::uint64_t seed = 0;
};

/// Training-set statistics for every scoring function. Statistics that depend on a
/// hyperparameter (NNGuide banks, KPCA bandwidths) or on a projection variant are built on first
/// use and cached; scoring never mutates anything a caller can observe.
class ScoringEngine {
 public:
  /// `train` needs labels in 1..C; logits are recomputed from `head` when absent.
  ScoringEngine(FeatureSet train, ClassifierHead head, EngineOptions options = {});

  ScoreVector score(std::string_view method_id, Variant variant, const FeatureSet& data,
                    const HyperParams& hp = {}) const;

  const ProjectionBundle& bundle() const noexcept { return bundle_; }
  const ClassifierHead& head() const noexcept { return head_; }
  const FeatureSet& train() const noexcept { return train_; }
  const EngineOptions& options() const noexcept { return options_; }
  Index num_classes() const noexcept { return head_.num_classes(); }

  /// Logits of `data`, recomputed from the head when the set carries none.
  Matrix logits_of(const FeatureSet& data) const;

 private:
  const VariantView& train_view(Variant v) const;
  const ClassStats& class_stats(Variant v) const;
  const NeighborBank& neighbor_bank(Variant v, const HyperParams& hp) const;
  const PnmlCache& pnml_cache() const;
  const ResidualModel& residual_model() const;
  const KpcaModel& kpca_model(int class_index, const HyperParams& hp) const;

  Vector score_kpca(Variant variant, const FeatureSet& data, const Matrix& logits, const HyperParams& hp) const;

  FeatureSet train_;
  ClassifierHead head_;
  EngineOptions options_;
  ProjectionBundle bundle_;

  mutable std::recursive_mutex mutex_;
  mutable std::map<Variant, std::unique_ptr<VariantView>> views_;
  mutable std::map<Variant, std::unique_ptr<ClassStats>> stats_;
  mutable std::map<std::tuple<Variant, double, double>, std::unique_ptr<NeighborBank>> banks_;
  mutable std::unique_ptr<PnmlCache> pnml_;
  mutable std::unique_ptr<ResidualModel> residual_;
  mutable std::map<std::pair<int, double>, std::unique_ptr<KpcaModel>> kpca_;
};

}  // namespace oodlab

#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "oodlab/core.hpp"
#include "oodlab/detectors.hpp"

namespace oodlab {

/// `confidence` is oriented so that higher means more trustworthy.
struct LabeledOutcome {
  double confidence = 0.0;
  bool failure = false;
};

struct RiskCoveragePoint {
  double coverage = 0.0;
  double selective_risk = 0.0;
  double generalized_risk = 0.0;
};

/// Samples admitted by descending confidence; equal confidences admit failures first.
std::vector<RiskCoveragePoint> risk_coverage(std::span<const LabeledOutcome> outcomes);

/// Means of selective / generalized risk over coverage i/N (plain fractions, not milli).
double aurc(std::span<const LabeledOutcome> outcomes);
double augrc(std::span<const LabeledOutcome> outcomes);

/// P(id > ood) + 0.5 P(id == ood).
double auroc(const Eigen::Ref<const Vector>& id_scores, const Eigen::Ref<const Vector>& ood_scores);

/// Fraction of OOD scores at or above the threshold where the ID true-positive rate first
/// reaches `tpr` when the threshold is lowered from +inf.
double fpr_at_tpr(const Eigen::Ref<const Vector>& id_scores, const Eigen::Ref<const Vector>& ood_scores,
                  double tpr = 0.95);

enum class Protocol { OODDetection, Misclassification };

std::string_view to_string(Protocol p) noexcept;

/// Detection: correctly classified ID rows (success) plus every OOD row (failure).
/// Misclassification: every ID row, failing when the prediction misses the label.
/// Labels are 1..C; the prediction comes from `id_logits`.
std::vector<LabeledOutcome> build_protocol(const Eigen::Ref<const Vector>& id_confidence, const Labels& id_labels,
                                           const Matrix& id_logits, const Vector* ood_confidence,
                                           Protocol mode);

struct MetricResult {
  double aurc = 0.0;   // milli
  double augrc = 0.0;  // milli
  double auroc = 0.0;  // NaN when one side is empty
  double fpr_at_95tpr = 0.0;
  Index n_success = 0;
  Index n_failure = 0;
};

/// AUROC and FPR@95 treat successes as positives.
MetricResult evaluate_outcomes(std::span<const LabeledOutcome> outcomes);

/// Hyperparameter lists keyed by registry name; enumerated as a Cartesian product in key order
/// with the last key varying fastest.
using Grid = std::map<std::string, std::vector<double>>;

struct TuneResult {
  HyperParams params;
  double objective = 0.0;
  std::vector<std::pair<HyperParams, double>> trials;
};

std::vector<HyperParams> expand_grid(const Grid& grid, const HyperParams& base);

/// Minimizes `objective` over the grid; the earliest grid point wins ties.
TuneResult tune(const Grid& grid, const HyperParams& base,
                const std::function<double(const HyperParams&)>& objective);

}  // namespace oodlab

#include "oodlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace oodlab {

namespace {

std::vector<std::size_t> admission_order(std::span<const LabeledOutcome> outcomes) {
  std::vector<std::size_t> order(outcomes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const LabeledOutcome& x = outcomes[a];
    const LabeledOutcome& y = outcomes[b];
    if (x.confidence != y.confidence) return x.confidence > y.confidence;
    return x.failure && !y.failure;
  });
  return order;
}

void check_outcomes(std::span<const LabeledOutcome> outcomes) {
  require(!outcomes.empty(), ErrorKind::InvalidInput, "risk-coverage needs at least one outcome");
  for (const LabeledOutcome& o : outcomes) {
    require(std::isfinite(o.confidence), ErrorKind::InvalidInput, "non-finite confidence");
  }
}

}  // namespace

std::vector<RiskCoveragePoint> risk_coverage(std::span<const LabeledOutcome> outcomes) {
  check_outcomes(outcomes);
  const std::vector<std::size_t> order = admission_order(outcomes);
  const double n = static_cast<double>(outcomes.size());
  std::vector<RiskCoveragePoint> curve;
  curve.reserve(outcomes.size());
  std::size_t failures = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (outcomes[order[i]].failure) ++failures;
    const double covered = static_cast<double>(i + 1);
    curve.push_back({covered / n, static_cast<double>(failures) / covered, static_cast<double>(failures) / n});
  }
  return curve;
}

double aurc(std::span<const LabeledOutcome> outcomes) {
  const auto curve = risk_coverage(outcomes);
  double acc = 0.0;
  for (const auto& p : curve) acc += p.selective_risk;
  return acc / static_cast<double>(curve.size());
}

double augrc(std::span<const LabeledOutcome> outcomes) {
  const auto curve = risk_coverage(outcomes);
  double acc = 0.0;
  for (const auto& p : curve) acc += p.generalized_risk;
  return acc / static_cast<double>(curve.size());
}

double auroc(const Eigen::Ref<const Vector>& id_scores, const Eigen::Ref<const Vector>& ood_scores) {
  const Index n = id_scores.size();
  const Index m = ood_scores.size();
  require(n > 0 && m > 0, ErrorKind::InvalidInput, "AUROC needs scores on both sides");
  require(id_scores.allFinite() && ood_scores.allFinite(), ErrorKind::InvalidInput, "AUROC: non-finite score");
  // Mann-Whitney with mid-ranks over the pooled sample.
  std::vector<std::pair<double, bool>> pooled;
  pooled.reserve(static_cast<std::size_t>(n + m));
  for (Index i = 0; i < n; ++i) pooled.emplace_back(id_scores[i], true);
  for (Index j = 0; j < m; ++j) pooled.emplace_back(ood_scores[j], false);
  std::sort(pooled.begin(), pooled.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < pooled.size()) {
    std::size_t j = i;
    while (j < pooled.size() && pooled[j].first == pooled[i].first) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      if (pooled[t].second) rank_sum += mid;
    }
    i = j;
  }
  const double nd = static_cast<double>(n);
  const double u = rank_sum - nd * (nd + 1.0) / 2.0;
  return u / (nd * static_cast<double>(m));
}

double fpr_at_tpr(const Eigen::Ref<const Vector>& id_scores, const Eigen::Ref<const Vector>& ood_scores, double tpr) {
  require(id_scores.size() > 0 && ood_scores.size() > 0, ErrorKind::InvalidInput,
          "FPR@TPR needs scores on both sides");
  require(tpr > 0.0 && tpr <= 1.0, ErrorKind::InvalidConfig, "target TPR must lie in (0, 1]");
  std::vector<double> id(id_scores.data(), id_scores.data() + id_scores.size());
  std::sort(id.begin(), id.end(), std::greater<>());
  const double need = std::ceil(tpr * static_cast<double>(id.size()) - 1e-9);
  const auto rank = static_cast<std::size_t>(std::max(1.0, need));
  const double threshold = id[rank - 1];
  const auto hits = (ood_scores.array() >= threshold).count();
  return static_cast<double>(hits) / static_cast<double>(ood_scores.size());
}

std::string_view to_string(Protocol p) noexcept {
  return p == Protocol::OODDetection ? "ood_detection" : "misclassification";
}

std::vector<LabeledOutcome> build_protocol(const Eigen::Ref<const Vector>& id_confidence, const Labels& id_labels,
                                           const Matrix& id_logits, const Vector* ood_confidence,
                                           Protocol mode) {
  const Index n = id_confidence.size();
  require(static_cast<Index>(id_labels.size()) == n && id_logits.rows() == n, ErrorKind::InvalidInput,
          "protocol: ID scores, labels and logits disagree on length");
  std::vector<LabeledOutcome> out;
  Index correct = 0;
  for (Index i = 0; i < n; ++i) {
    const bool ok = predict(id_logits.row(i).transpose()) + 1 == id_labels[static_cast<std::size_t>(i)];
    correct += ok ? 1 : 0;
    if (mode == Protocol::Misclassification) {
      out.push_back({id_confidence[i], !ok});
    } else if (ok) {
      out.push_back({id_confidence[i], false});
    }
  }
  if (mode == Protocol::OODDetection) {
    require(correct > 0, ErrorKind::DegenerateProtocol, "protocol: no correctly classified ID samples");
    require(ood_confidence != nullptr && ood_confidence->size() > 0, ErrorKind::InvalidInput,
            "protocol: OOD detection needs an OOD set");
    for (Index j = 0; j < ood_confidence->size(); ++j) out.push_back({(*ood_confidence)[j], true});
  }
  return out;
}

MetricResult evaluate_outcomes(std::span<const LabeledOutcome> outcomes) {
  MetricResult r;
  r.aurc = 1000.0 * aurc(outcomes);
  r.augrc = 1000.0 * augrc(outcomes);
  std::vector<double> pos;
  std::vector<double> neg;
  for (const LabeledOutcome& o : outcomes) (o.failure ? neg : pos).push_back(o.confidence);
  r.n_success = static_cast<Index>(pos.size());
  r.n_failure = static_cast<Index>(neg.size());
  if (pos.empty() || neg.empty()) {
    r.auroc = std::numeric_limits<double>::quiet_NaN();
    r.fpr_at_95tpr = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  const Eigen::Map<const Vector> p(pos.data(), static_cast<Index>(pos.size()));
  const Eigen::Map<const Vector> q(neg.data(), static_cast<Index>(neg.size()));
  r.auroc = auroc(p, q);
  r.fpr_at_95tpr = fpr_at_tpr(p, q, 0.95);
  return r;
}

std::vector<HyperParams> expand_grid(const Grid& grid, const HyperParams& base) {
  require(!grid.empty(), ErrorKind::InvalidConfig, "tuning grid is empty");
  std::vector<HyperParams> points{base};
  for (const auto& [name, values] : grid) {
    require(!values.empty(), ErrorKind::InvalidConfig, "tuning grid for '" + name + "' is empty");
    std::vector<HyperParams> next;
    next.reserve(points.size() * values.size());
    for (const HyperParams& p : points) {
      for (double v : values) {
        HyperParams q = p;
        q.set(name, v);
        next.push_back(q);
      }
    }
    points = std::move(next);
  }
  return points;
}

TuneResult tune(const Grid& grid, const HyperParams& base, const std::function<double(const HyperParams&)>& objective) {
  TuneResult result;
  result.objective = std::numeric_limits<double>::infinity();
  bool found = false;
  for (const HyperParams& p : expand_grid(grid, base)) {
    p.validate();
    const double value = objective(p);
    result.trials.emplace_back(p, value);
    if (std::isfinite(value) && (!found || value < result.objective)) {
      result.objective = value;
      result.params = p;
      found = true;
    }
  }
  require(found, ErrorKind::Numerical, "tuning: every grid point produced a non-finite objective");
  return result;
}

}  // namespace oodlab

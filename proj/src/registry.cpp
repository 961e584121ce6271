#include "oodlab/registry.hpp"

#include <algorithm>

namespace oodlab {

namespace {

using enum Variant;
constexpr auto kConf = Orientation::HigherIsConfident;
constexpr auto kAnom = Orientation::HigherIsAnomalous;

const std::vector<Variant> kAll{Unmodified, Global, Class, ClassPred, ClassAvg};
const std::vector<Variant> kNoClass{Unmodified, Global, ClassPred, ClassAvg};
const std::vector<Variant> kSubspaces{Global, Class, ClassPred};
const std::vector<Variant> kPlain{Unmodified};

const std::vector<MethodInfo>& table() {
  static const std::vector<MethodInfo> methods{
      {"MSR", kConf, MethodFamily::Probability, kAll, {"temperature"}, "maximum softmax probability"},
      {"MLS", kConf, MethodFamily::Logit, kAll, {}, "maximum logit"},
      {"Energy", kAnom, MethodFamily::Logit, kAll, {"temperature"}, "-T logsumexp(logits / T)"},
      {"PE", kAnom, MethodFamily::Probability, kAll, {"temperature"}, "Shannon entropy of softmax"},
      {"GEN", kAnom, MethodFamily::Probability, kAll, {"temperature", "gen_gamma", "top_m"},
       "generalized entropy over the top-M probabilities"},
      {"REN", kAnom, MethodFamily::Probability, kAll, {"temperature", "ren_alpha", "top_m"},
       "Renyi entropy over the top-M probabilities"},
      {"GE", kAnom, MethodFamily::Probability, kAll, {"temperature"}, "guessing entropy"},
      {"PCE", kAnom, MethodFamily::Probability, kAll, {"temperature"}, "collision entropy"},
      {"CTM", kConf, MethodFamily::Feature, kAll, {}, "max cosine to classifier weights"},
      {"CTMmean", kConf, MethodFamily::Feature, kAll, {}, "max cosine to training class means"},
      {"Maha", kAnom, MethodFamily::Feature, kNoClass, {},
       "squared Mahalanobis distance to the nearest class mean"},
      {"NNGuide", kConf, MethodFamily::Feature, kNoClass, {"temperature", "nnguide_alpha"},
       "negative energy times nearest-neighbour guidance"},
      {"fDBD", kConf, MethodFamily::Feature, kNoClass, {},
       "mean distance to decision boundaries over distance to the training mean"},
      {"pNML", kAnom, MethodFamily::Feature, kNoClass, {"temperature"},
       "predictive normalized maximum likelihood regret"},
      {"GradNorm", kConf, MethodFamily::Feature, kNoClass, {"temperature", "norm_order"},
       "norm of the uniform-target cross-entropy gradient on last-layer weights"},
      {"PCA", kConf, MethodFamily::Reconstruction, kSubspaces, {},
       "negated normalized PCA reconstruction error"},
      {"KPCA", kAnom, MethodFamily::Reconstruction, kSubspaces, {"kpca_sigma"},
       "cosine-Gaussian kernel PCA reconstruction error"},
      {"ViM", kAnom, MethodFamily::Feature, kPlain, {}, "virtual-logit softmax probability"},
      {"Residual", kAnom, MethodFamily::Feature, kPlain, {},
       "norm of the feature residual off the principal subspace"},
      {"NeCo", kConf, MethodFamily::Feature, kPlain, {},
       "norm of the principal projection over the feature norm"},
      {"Confidence", kConf, MethodFamily::External, kPlain, {},
       "externally produced confidence (ConfidNet, DeVries)"},
      {"Abstention", kAnom, MethodFamily::External, kPlain, {},
       "externally produced abstention mass (Deep Gamblers)"},
      {"MCD-MSR", kConf, MethodFamily::MonteCarlo, kPlain, {"temperature"}, "MSR over MC passes"},
      {"MCD-PE", kAnom, MethodFamily::MonteCarlo, kPlain, {"temperature"}, "PE over MC passes"},
      {"MCD-GEN", kAnom, MethodFamily::MonteCarlo, kPlain, {"temperature", "gen_gamma", "top_m"},
       "GEN over MC passes"},
      {"MCD-REN", kAnom, MethodFamily::MonteCarlo, kPlain, {"temperature", "ren_alpha", "top_m"},
       "REN over MC passes"},
      {"MCD-GE", kAnom, MethodFamily::MonteCarlo, kPlain, {"temperature"}, "GE over MC passes"},
      {"MCD-PCE", kAnom, MethodFamily::MonteCarlo, kPlain, {"temperature"}, "PCE over MC passes"},
  };
  return methods;
}

}  // namespace

std::span<const MethodInfo> method_registry() { return table(); }

bool is_known_method(std::string_view id) {
  const auto& t = table();
  return std::any_of(t.begin(), t.end(), [&](const MethodInfo& m) { return m.id == id; });
}

const MethodInfo& method_info(std::string_view id) {
  for (const MethodInfo& m : table()) {
    if (m.id == id) return m;
  }
  fail(ErrorKind::InvalidConfig, "unknown method '" + std::string(id) + "'");
}

bool supports_variant(std::string_view id, Variant v) {
  const auto& vs = method_info(id).variants;
  return std::find(vs.begin(), vs.end(), v) != vs.end();
}

void require_variant(std::string_view id, Variant v) {
  if (!supports_variant(id, v)) {
    fail(ErrorKind::UnsupportedVariant, "method '" + std::string(id) + "' has no " +
                                            std::string(to_string(v)) + " variant");
  }
}

}  // namespace oodlab

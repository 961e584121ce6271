#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "oodlab/core.hpp"

namespace oodlab {

enum class MethodFamily {
  Probability,  // consumes softmax probabilities only
  Logit,        // consumes logits only
  Feature,      // consumes features (and possibly logits/probabilities)
  Reconstruction,
  External,     // precomputed per-sample confidences
  MonteCarlo,   // probability family over MC-dropout passes
};

struct MethodInfo {
  std::string_view id;
  Orientation orientation;
  MethodFamily family;
  std::vector<Variant> variants;
  std::vector<std::string_view> hyperparameters;
  std::string_view summary;
};

/// Static table of every scoring function: orientation, supported projection variants and the
/// hyperparameters the tuner may search over.
std::span<const MethodInfo> method_registry();

const MethodInfo& method_info(std::string_view id);
bool is_known_method(std::string_view id);
bool supports_variant(std::string_view id, Variant v);

/// Throws UnsupportedVariant for combinations the applicability table leaves blank.
void require_variant(std::string_view id, Variant v);

}  // namespace oodlab

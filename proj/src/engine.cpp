#include "oodlab/engine.hpp"

#include <cmath>
#include <limits>

#include "oodlab/registry.hpp"

namespace oodlab {

namespace {

using Lock = std::lock_guard<std::recursive_mutex>;

ProbScore prob_kind(std::string_view id) {
  if (id == "MSR") return ProbScore::MSR;
  if (id == "PE") return ProbScore::PE;
  if (id == "GEN") return ProbScore::GEN;
  if (id == "REN") return ProbScore::REN;
  if (id == "GE") return ProbScore::GE;
  if (id == "PCE") return ProbScore::PCE;
  fail(ErrorKind::InvalidConfig, "'" + std::string(id) + "' is not a probability score");
}

Vector scaled_lse(const Matrix& logits, double t) {
  Vector out(logits.rows());
  for (Index i = 0; i < logits.rows(); ++i) out[i] = t * logsumexp(logits.row(i).transpose() / t);
  return out;
}

}  // namespace

ScoringEngine::ScoringEngine(FeatureSet train, ClassifierHead head, EngineOptions options)
    : train_(std::move(train)), head_(std::move(head)), options_(std::move(options)) {
  head_.validate();
  require(train_.labels.has_value(), ErrorKind::InvalidInput, "training set needs labels");
  require(train_.dim() == head_.dim(), ErrorKind::InvalidInput,
          "training features and classifier head disagree on dimension");
  if (!train_.logits) train_.logits = head_.logits(train_.features);
  train_.validate(head_.num_classes());
  for (int y : *train_.labels) {
    require(y >= 1, ErrorKind::InvalidInput, "training labels must lie in 1..C");
  }
  bundle_ = fit_projection_bundle(train_.features, *train_.labels, head_.num_classes(),
                                  options_.variance_fraction);
}

Matrix ScoringEngine::logits_of(const FeatureSet& data) const {
  if (data.logits) {
    require(data.logits->cols() == head_.num_classes(), ErrorKind::InvalidInput,
            "'" + data.dataset_id + "' logits do not match the class count");
    return *data.logits;
  }
  return head_.logits(data.features);
}

const VariantView& ScoringEngine::train_view(Variant v) const {
  Lock lock(mutex_);
  auto& slot = views_[v];
  if (!slot) {
    slot = std::make_unique<VariantView>(
        variant_transform(bundle_, head_, train_.features, *train_.logits, v));
  }
  return *slot;
}

const ClassStats& ScoringEngine::class_stats(Variant v) const {
  Lock lock(mutex_);
  auto& slot = stats_[v];
  if (!slot) {
    slot = std::make_unique<ClassStats>(
        ClassStats::fit(train_view(v).features, *train_.labels, head_.num_classes()));
  }
  return *slot;
}

const NeighborBank& ScoringEngine::neighbor_bank(Variant v, const HyperParams& hp) const {
  Lock lock(mutex_);
  auto& slot = banks_[{v, hp.nnguide_alpha, hp.temperature}];
  if (!slot) {
    const VariantView& view = train_view(v);
    slot = std::make_unique<NeighborBank>(NeighborBank::build(
        view.features, scaled_lse(view.logits, hp.temperature), hp.nnguide_alpha, options_.seed));
  }
  return *slot;
}

const PnmlCache& ScoringEngine::pnml_cache() const {
  Lock lock(mutex_);
  if (!pnml_) pnml_ = std::make_unique<PnmlCache>(PnmlCache::fit(train_.features));
  return *pnml_;
}

const ResidualModel& ScoringEngine::residual_model() const {
  Lock lock(mutex_);
  if (!residual_) {
    residual_ = std::make_unique<ResidualModel>(
        ResidualModel::fit(train_.features, *train_.logits, options_.variance_fraction));
  }
  return *residual_;
}

// class_index -1 is the global model; otherwise a 0-based class.
const KpcaModel& ScoringEngine::kpca_model(int class_index, const HyperParams& hp) const {
  Lock lock(mutex_);
  const double sigma_key = hp.kpca_sigma ? *hp.kpca_sigma : -1.0;
  auto& slot = kpca_[{class_index, sigma_key}];
  if (!slot) {
    Matrix rows = train_.features;
    Matrix logits = *train_.logits;
    if (class_index >= 0) {
      std::vector<Index> members;
      for (std::size_t i = 0; i < train_.labels->size(); ++i) {
        if ((*train_.labels)[i] == class_index + 1) members.push_back(static_cast<Index>(i));
      }
      require(!members.empty(), ErrorKind::InvalidInput,
              "class " + std::to_string(class_index + 1) + " has no training samples");
      rows = train_.features(members, Eigen::all);
      logits = (*train_.logits)(members, Eigen::all);
    }
    KpcaOptions opts = options_.kpca;
    if (hp.kpca_sigma) opts.sigma = hp.kpca_sigma;
    if (!opts.seed) opts.seed = options_.seed;
    if (options_.kpca_exact_limit) {
      opts.mode = rows.rows() <= *options_.kpca_exact_limit ? KpcaMode::Exact : KpcaMode::Nystrom;
    }
    if (opts.components) opts.components = std::min<Index>(*opts.components, rows.rows());
    slot = std::make_unique<KpcaModel>(fit_kpca(rows, opts, &logits));
  }
  return *slot;
}

Vector ScoringEngine::score_kpca(Variant variant, const FeatureSet& data, const Matrix& logits,
                                 const HyperParams& hp) const {
  const bool reg = options_.kpca_regularized;
  switch (variant) {
    case Variant::Global:
      return kpca_rec_errors(kpca_model(-1, hp), data.features, reg);
    case Variant::Class: {
      Vector best = Vector::Constant(data.size(), std::numeric_limits<double>::infinity());
      for (Index c = 0; c < num_classes(); ++c) {
        best = best.cwiseMin(kpca_rec_errors(kpca_model(static_cast<int>(c), hp), data.features, reg));
      }
      return best;
    }
    case Variant::ClassPred: {
      const std::vector<Index> pred = predict_rows(logits);
      Vector out(data.size());
      for (Index c = 0; c < num_classes(); ++c) {
        std::vector<Index> rows;
        for (Index i = 0; i < data.size(); ++i) {
          if (pred[static_cast<std::size_t>(i)] == c) rows.push_back(i);
        }
        if (rows.empty()) continue;
        const Matrix sub = data.features(rows, Eigen::all);
        const Vector e = kpca_rec_errors(kpca_model(static_cast<int>(c), hp), sub, reg);
        for (std::size_t r = 0; r < rows.size(); ++r) out[rows[r]] = e[static_cast<Index>(r)];
      }
      return out;
    }
    default:
      fail(ErrorKind::UnsupportedVariant, "KPCA has no " + std::string(to_string(variant)) + " variant");
  }
}

ScoreVector ScoringEngine::score(std::string_view method_id, Variant variant, const FeatureSet& data,
                                 const HyperParams& hp) const {
  const MethodInfo& info = method_info(method_id);
  require_variant(method_id, variant);
  hp.validate();
  require(data.dim() == head_.dim(), ErrorKind::InvalidInput,
          "'" + data.dataset_id + "' features do not match the head dimension");
  const Index n = data.size();
  const double t = hp.temperature;

  ScoreVector out;
  out.method_id = std::string(info.id);
  out.orientation = info.orientation;
  out.variant = variant;
  out.values.resize(n);
  Vector& v = out.values;

  if (info.family == MethodFamily::External) {
    const auto it = data.external.find(std::string(info.id));
    require(it != data.external.end(), ErrorKind::InvalidInput,
            "'" + data.dataset_id + "' carries no '" + std::string(info.id) + "' scores");
    out = score_confidence_passthrough(it->second, info.id);
    return out;
  }
  if (info.family == MethodFamily::MonteCarlo) {
    require(data.has_passes(), ErrorKind::InvalidInput,
            "'" + data.dataset_id + "' has no stochastic passes for " + std::string(info.id));
    const Matrix probs = mc_aggregate(data.passes, t, options_.mc_mode);
    const ProbScore kind = prob_kind(info.id.substr(4));
    for (Index i = 0; i < n; ++i) v[i] = score_prob_family(kind, probs.row(i).transpose(), hp);
    require(v.allFinite(), ErrorKind::Numerical, std::string(info.id) + " produced non-finite scores");
    return out;
  }

  const Matrix logits = logits_of(data);
  const std::string id(info.id);

  if (id == "PCA") {
    const std::vector<Index> pred = predict_rows(logits);
    for (Index i = 0; i < n; ++i) {
      v[i] = pca_rec_error(bundle_, data.features.row(i).transpose(), variant, pred[static_cast<std::size_t>(i)]);
    }
  } else if (id == "KPCA") {
    v = score_kpca(variant, data, logits, hp);
  } else if (id == "ViM" || id == "Residual" || id == "NeCo") {
    const ResidualModel& model = residual_model();
    for (Index i = 0; i < n; ++i) {
      const ResidualScores r = score_residual_vim_neco(data.features.row(i).transpose(), logits.row(i).transpose(), model);
      v[i] = id == "ViM" ? r.vim : (id == "Residual" ? r.residual : r.neco);
    }
  } else {
    const VariantView view = variant_transform(bundle_, head_, data.features, logits, variant);
    const Matrix probs = t == head_.temperature ? view.probs : softmax_rows(view.logits, t);
    if (info.family == MethodFamily::Probability) {
      const ProbScore kind = prob_kind(id);
      for (Index i = 0; i < n; ++i) v[i] = score_prob_family(kind, probs.row(i).transpose(), hp);
    } else if (id == "MLS" || id == "Energy") {
      const LogitScore kind = id == "MLS" ? LogitScore::MLS : LogitScore::Energy;
      for (Index i = 0; i < n; ++i) v[i] = score_logit_family(kind, view.logits.row(i).transpose(), t);
    } else if (id == "CTM" || id == "CTMmean") {
      const Matrix& protos = id == "CTM" ? head_.weights : class_stats(Variant::Unmodified).class_means;
      if (variant == Variant::Class) {
        for (Index i = 0; i < n; ++i) {
          double best = -std::numeric_limits<double>::infinity();
          for (Index k = 0; k < protos.rows(); ++k) {
            best = std::max(best, score_ctm(view.class_features[static_cast<std::size_t>(k)].row(i).transpose(),
                                            protos.row(k)));
          }
          v[i] = best;
        }
      } else {
        for (Index i = 0; i < n; ++i) v[i] = score_ctm(view.features.row(i).transpose(), protos);
      }
    } else if (id == "Maha") {
      const ClassStats& stats = class_stats(variant);
      for (Index i = 0; i < n; ++i) v[i] = score_maha(view.features.row(i).transpose(), stats);
    } else if (id == "NNGuide") {
      const NeighborBank& bank = neighbor_bank(variant, hp);
      const Vector base = scaled_lse(view.logits, t);
      for (Index i = 0; i < n; ++i) v[i] = score_nnguide(view.features.row(i).transpose(), bank, base[i]);
    } else if (id == "fDBD") {
      const Vector mean = train_view(variant).features.colwise().mean().transpose();
      for (Index i = 0; i < n; ++i) {
        v[i] = score_fdbd(view.features.row(i).transpose(), logits.row(i).transpose(), head_, mean);
      }
    } else if (id == "pNML") {
      const PnmlCache& cache = pnml_cache();
      for (Index i = 0; i < n; ++i) v[i] = score_pnml(data.features.row(i).transpose(), probs.row(i).transpose(), cache);
    } else if (id == "GradNorm") {
      for (Index i = 0; i < n; ++i) v[i] = score_gradnorm(view.features.row(i).transpose(), probs.row(i).transpose(), hp);
    } else {
      fail(ErrorKind::InvalidConfig, "no scorer wired for '" + id + "'");
    }
  }
  require(v.allFinite(), ErrorKind::Numerical,
          id + "/" + std::string(to_string(variant)) + " produced non-finite scores on '" + data.dataset_id + "'");
  return out;
}

}  // namespace oodlab

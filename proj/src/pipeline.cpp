#include "oodlab/pipeline.hpp"

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "oodlab/fmx.hpp"
#include "oodlab/registry.hpp"

namespace oodlab {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

namespace {

// ---------------------------------------------------------------- config parsing

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed, const std::string& where) {
  require(obj.is_object(), ErrorKind::InvalidConfig, where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    const bool ok = std::find(allowed.begin(), allowed.end(), key) != allowed.end();
    require(ok, ErrorKind::InvalidConfig, "unknown key '" + key + "' in " + where);
  }
}

template <class T>
T get_as(const json& obj, const char* key, T fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorKind::InvalidConfig, where + "." + key + " has the wrong type");
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

std::optional<fs::path> optional_path(const json& obj, const char* key, const fs::path& base,
                                      const std::string& where) {
  if (!obj.contains(key)) return std::nullopt;
  return resolve(base, get_as<std::string>(obj, key, {}, where));
}

SetSpec parse_set(const json& obj, const fs::path& base, const std::string& where) {
  check_keys(obj, {"id", "features", "logits", "labels", "passes", "external", "clip"}, where);
  SetSpec s;
  s.id = get_as<std::string>(obj, "id", {}, where);
  require(obj.contains("features"), ErrorKind::InvalidConfig, where + " needs 'features'");
  s.features = resolve(base, get_as<std::string>(obj, "features", {}, where));
  s.logits = optional_path(obj, "logits", base, where);
  s.labels = optional_path(obj, "labels", base, where);
  s.passes = optional_path(obj, "passes", base, where);
  s.clip = optional_path(obj, "clip", base, where);
  if (obj.contains("external")) {
    const json& ext = obj.at("external");
    require(ext.is_object(), ErrorKind::InvalidConfig, where + ".external must be an object");
    for (const auto& [name, p] : ext.items()) {
      require(p.is_string(), ErrorKind::InvalidConfig, where + ".external." + name + " must be a path");
      s.external[name] = resolve(base, p.get<std::string>());
    }
  }
  return s;
}

SyntheticOptions parse_synthetic(const json& obj, std::uint64_t seed, const std::string& where) {
  check_keys(obj,
             {"dim", "n_train", "n_validation", "n_test", "n_ood", "sigma", "separation", "ood_shifts", "logit_scale",
              "label_noise", "passes", "dropout", "clip_dim", "clip_rows", "seed"},
             where);
  SyntheticOptions o;
  o.seed = seed;
  o.dim = get_as<Index>(obj, "dim", o.dim, where);
  o.n_train = get_as<Index>(obj, "n_train", o.n_train, where);
  o.n_validation = get_as<Index>(obj, "n_validation", o.n_validation, where);
  o.n_test = get_as<Index>(obj, "n_test", o.n_test, where);
  o.n_ood = get_as<Index>(obj, "n_ood", o.n_ood, where);
  o.sigma = get_as<double>(obj, "sigma", o.sigma, where);
  o.separation = get_as<double>(obj, "separation", o.separation, where);
  o.ood_shifts = get_as<std::vector<double>>(obj, "ood_shifts", o.ood_shifts, where);
  o.logit_scale = get_as<double>(obj, "logit_scale", o.logit_scale, where);
  o.label_noise = get_as<double>(obj, "label_noise", o.label_noise, where);
  o.passes = get_as<int>(obj, "passes", o.passes, where);
  o.dropout = get_as<double>(obj, "dropout", o.dropout, where);
  o.clip_dim = get_as<Index>(obj, "clip_dim", o.clip_dim, where);
  o.clip_rows = get_as<Index>(obj, "clip_rows", o.clip_rows, where);
  o.seed = get_as<std::uint64_t>(obj, "seed", o.seed, where);
  require(o.n_train >= 2 && o.n_validation >= 2 && o.n_test >= 2 && o.n_ood >= 2, ErrorKind::InvalidConfig,
          where + ": every split needs at least 2 rows");
  require(o.dropout >= 0.0 && o.dropout < 1.0, ErrorKind::InvalidConfig, where + ".dropout must lie in [0, 1)");
  require(o.sigma > 0.0 && o.separation > 0.0, ErrorKind::InvalidConfig, where + ": sigma and separation must be positive");
  return o;
}

SourceSpec parse_source(const json& obj, const fs::path& base, std::uint64_t seed, const std::string& where) {
  check_keys(obj, {"name", "paradigm", "synthetic", "head", "train", "validation", "validation_ood", "test", "ood", "clip"},
             where);
  SourceSpec s;
  s.name = get_as<std::string>(obj, "name", {}, where);
  require(!s.name.empty(), ErrorKind::InvalidConfig, where + " needs a 'name'");
  const std::string here = "source '" + s.name + "'";
  s.paradigm = get_as<std::string>(obj, "paradigm", s.paradigm, here);
  if (obj.contains("synthetic")) {
    for (const char* k : {"head", "train", "validation", "validation_ood", "test", "ood", "clip"}) {
      require(!obj.contains(k), ErrorKind::InvalidConfig, here + ": 'synthetic' excludes '" + k + "'");
    }
    s.synthetic = parse_synthetic(obj.at("synthetic"), seed, here + ".synthetic");
    return s;
  }
  for (const char* k : {"head", "train", "validation", "test"}) {
    require(obj.contains(k), ErrorKind::InvalidConfig, here + " needs '" + k + "'");
  }
  const json& head = obj.at("head");
  check_keys(head, {"weights", "bias", "temperature"}, here + ".head");
  require(head.contains("weights"), ErrorKind::InvalidConfig, here + ".head needs 'weights'");
  s.head_weights = resolve(base, get_as<std::string>(head, "weights", {}, here + ".head"));
  s.head_bias = optional_path(head, "bias", base, here + ".head");
  s.head_temperature = get_as<double>(head, "temperature", 1.0, here + ".head");
  s.train = parse_set(obj.at("train"), base, here + ".train");
  s.validation = parse_set(obj.at("validation"), base, here + ".validation");
  if (obj.contains("validation_ood")) s.validation_ood = parse_set(obj.at("validation_ood"), base, here + ".validation_ood");
  s.test = parse_set(obj.at("test"), base, here + ".test");
  if (s.train.id.empty()) s.train.id = "train";
  if (s.validation.id.empty()) s.validation.id = "validation";
  if (s.test.id.empty()) s.test.id = "test";
  if (obj.contains("ood")) {
    const json& ood = obj.at("ood");
    require(ood.is_array(), ErrorKind::InvalidConfig, here + ".ood must be an array");
    for (std::size_t j = 0; j < ood.size(); ++j) {
      SetSpec o = parse_set(ood[j], base, here + ".ood[" + std::to_string(j) + "]");
      require(!o.id.empty(), ErrorKind::InvalidConfig, here + ".ood[" + std::to_string(j) + "] needs an 'id'");
      for (const SetSpec& prev : s.ood) {
        require(prev.id != o.id, ErrorKind::InvalidConfig, here + ": duplicate OOD set '" + o.id + "'");
      }
      s.ood.push_back(std::move(o));
    }
  }
  if (obj.contains("clip")) {
    const json& clip = obj.at("clip");
    check_keys(clip, {"labels", "text"}, here + ".clip");
    s.clip_labels = optional_path(clip, "labels", base, here + ".clip");
    s.clip_text = optional_path(clip, "text", base, here + ".clip");
  }
  return s;
}

std::vector<std::string> parse_name_list(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) return {};
  const json& v = obj.at(key);
  if (v.is_string() && v.get<std::string>() == "all") return {};
  require(v.is_array(), ErrorKind::InvalidConfig, where + "." + key + " must be \"all\" or a list");
  std::vector<std::string> out;
  for (const json& e : v) {
    require(e.is_string(), ErrorKind::InvalidConfig, where + "." + key + " entries must be strings");
    out.push_back(e.get<std::string>());
  }
  require(!out.empty(), ErrorKind::InvalidConfig, where + "." + key + " is empty");
  return out;
}

LandmarkRule parse_landmark_rule(const std::string& s) {
  if (s == "low_logsumexp") return LandmarkRule::LowLogsumexp;
  if (s == "high_logsumexp") return LandmarkRule::HighLogsumexp;
  if (s == "uniform") return LandmarkRule::Uniform;
  fail(ErrorKind::InvalidConfig, "unknown landmark rule '" + s + "'");
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text, const fs::path& base_dir,
                              std::optional<std::uint64_t> seed) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::InvalidConfig, std::string("config is not valid JSON: ") + e.what());
  }
  const std::string where = "config";
  check_keys(doc,
             {"seed", "methods", "variants", "hyperparameters", "grids", "variance_fraction", "mc_aggregation", "kpca",
              "ranking", "proximity", "bucket_overrides", "sources"},
             where);
  ExperimentConfig c;
  c.base_dir = base_dir;
  c.seed = seed ? *seed : get_as<std::uint64_t>(doc, "seed", 0, where);
  c.engine.seed = c.seed;
  c.engine.kpca.seed = c.seed;
  c.buckets.seed = c.seed;

  c.methods = parse_name_list(doc, "methods", where);
  for (const std::string& m : c.methods) {
    require(is_known_method(m), ErrorKind::InvalidConfig, "config.methods: unknown method '" + m + "'");
  }
  for (const std::string& v : parse_name_list(doc, "variants", where)) c.variants.push_back(parse_variant(v));

  if (doc.contains("hyperparameters")) {
    const json& hp = doc.at("hyperparameters");
    require(hp.is_object(), ErrorKind::InvalidConfig, "config.hyperparameters must be an object");
    for (const auto& [name, value] : hp.items()) {
      require(value.is_number(), ErrorKind::InvalidConfig, "config.hyperparameters." + name + " must be a number");
      c.hyperparameters.set(name, value.get<double>());
    }
    c.hyperparameters.validate();
  }
  if (doc.contains("grids")) {
    const json& grids = doc.at("grids");
    require(grids.is_object(), ErrorKind::InvalidConfig, "config.grids must be an object");
    for (const auto& [method, grid] : grids.items()) {
      require(method == "*" || is_known_method(method), ErrorKind::InvalidConfig,
              "config.grids: unknown method '" + method + "'");
      require(grid.is_object() && !grid.empty(), ErrorKind::InvalidConfig,
              "config.grids." + method + " must be a non-empty object");
      Grid g;
      HyperParams probe;
      for (const auto& [name, values] : grid.items()) {
        require(values.is_array() && !values.empty(), ErrorKind::InvalidConfig,
                "config.grids." + method + "." + name + " must be a non-empty list");
        for (const json& v : values) {
          require(v.is_number(), ErrorKind::InvalidConfig, "config.grids." + method + "." + name + " holds a non-number");
          probe.set(name, v.get<double>());
          g[name].push_back(v.get<double>());
        }
      }
      if (method != "*") {
        const auto& declared = method_info(method).hyperparameters;
        for (const auto& [name, _] : g) {
          require(std::find(declared.begin(), declared.end(), name) != declared.end(), ErrorKind::InvalidConfig,
                  "config.grids." + method + ": '" + name + "' is not a hyperparameter of " + method);
        }
      }
      c.grids[method] = std::move(g);
    }
  }
  c.engine.variance_fraction = get_as<double>(doc, "variance_fraction", c.engine.variance_fraction, where);
  require(c.engine.variance_fraction > 0.0 && c.engine.variance_fraction <= 1.0, ErrorKind::InvalidConfig,
          "config.variance_fraction must lie in (0, 1]");
  const std::string mc = get_as<std::string>(doc, "mc_aggregation", "mean_probability", where);
  if (mc == "mean_probability") {
    c.engine.mc_mode = McAggregation::MeanProbability;
  } else if (mc == "mean_logit") {
    c.engine.mc_mode = McAggregation::MeanLogit;
  } else {
    fail(ErrorKind::InvalidConfig, "config.mc_aggregation must be mean_probability or mean_logit");
  }

  if (doc.contains("kpca")) {
    const json& k = doc.at("kpca");
    const std::string kw = "config.kpca";
    check_keys(k, {"mode", "exact_limit", "landmarks", "landmark_rule", "regularized", "spectrum_fraction", "components",
                   "sigma"},
               kw);
    const std::string mode = get_as<std::string>(k, "mode", "auto", kw);
    if (mode == "auto") {
      c.engine.kpca_exact_limit = get_as<Index>(k, "exact_limit", *c.engine.kpca_exact_limit, kw);
    } else if (mode == "exact" || mode == "nystrom") {
      require(!k.contains("exact_limit"), ErrorKind::InvalidConfig, kw + ".exact_limit only applies to mode auto");
      c.engine.kpca_exact_limit.reset();
      c.engine.kpca.mode = mode == "exact" ? KpcaMode::Exact : KpcaMode::Nystrom;
    } else {
      fail(ErrorKind::InvalidConfig, kw + ".mode must be auto, exact or nystrom");
    }
    c.engine.kpca.landmarks = get_as<Index>(k, "landmarks", c.engine.kpca.landmarks, kw);
    c.engine.kpca.landmark_rule = parse_landmark_rule(get_as<std::string>(k, "landmark_rule", "low_logsumexp", kw));
    c.engine.kpca_regularized = get_as<bool>(k, "regularized", true, kw);
    c.engine.kpca.spectrum_fraction = get_as<double>(k, "spectrum_fraction", c.engine.kpca.spectrum_fraction, kw);
    if (k.contains("components")) c.engine.kpca.components = get_as<Index>(k, "components", 1, kw);
    if (k.contains("sigma")) c.engine.kpca.sigma = get_as<double>(k, "sigma", 1.0, kw);
    require(c.engine.kpca.landmarks >= 1, ErrorKind::InvalidConfig, kw + ".landmarks must be positive");
  }
  if (doc.contains("ranking")) {
    const json& r = doc.at("ranking");
    const std::string rw = "config.ranking";
    check_keys(r, {"alpha", "conover_reference", "tie_correction", "metrics"}, rw);
    c.ranking.alpha = get_as<double>(r, "alpha", c.ranking.alpha, rw);
    require(c.ranking.alpha >= 0.0 && c.ranking.alpha <= 1.0, ErrorKind::InvalidConfig, rw + ".alpha must lie in [0, 1]");
    const std::string ref = get_as<std::string>(r, "conover_reference", "normal", rw);
    require(ref == "normal" || ref == "t", ErrorKind::InvalidConfig, rw + ".conover_reference must be normal or t");
    c.ranking.reference = ref == "normal" ? ConoverReference::Normal : ConoverReference::StudentT;
    c.ranking.tie_correction = get_as<bool>(r, "tie_correction", false, rw);
    if (r.contains("metrics")) {
      c.rank_metrics = parse_name_list(r, "metrics", rw);
      for (const std::string& m : c.rank_metrics) {
        require(m == "aurc" || m == "augrc" || m == "auroc" || m == "fpr95", ErrorKind::InvalidConfig,
                rw + ".metrics: unknown metric '" + m + "'");
      }
    }
  }
  if (doc.contains("proximity")) {
    const json& p = doc.at("proximity");
    const std::string pw = "config.proximity";
    check_keys(p, {"mmd_c", "mmd_degree", "restarts", "max_iterations"}, pw);
    c.mmd_c = get_as<double>(p, "mmd_c", c.mmd_c, pw);
    c.mmd_degree = get_as<int>(p, "mmd_degree", c.mmd_degree, pw);
    c.buckets.restarts = get_as<int>(p, "restarts", c.buckets.restarts, pw);
    c.buckets.max_iterations = get_as<int>(p, "max_iterations", c.buckets.max_iterations, pw);
  }
  if (doc.contains("bucket_overrides")) {
    const json& b = doc.at("bucket_overrides");
    require(b.is_object(), ErrorKind::InvalidConfig, "config.bucket_overrides must be an object");
    for (const auto& [name, value] : b.items()) {
      require(value.is_string(), ErrorKind::InvalidConfig, "config.bucket_overrides." + name + " must be a string");
      c.bucket_overrides[name] = parse_bucket(value.get<std::string>());
    }
  }
  require(doc.contains("sources") && doc.at("sources").is_array() && !doc.at("sources").empty(),
          ErrorKind::InvalidConfig, "config.sources must be a non-empty list");
  const json& sources = doc.at("sources");
  for (std::size_t i = 0; i < sources.size(); ++i) {
    SourceSpec s = parse_source(sources[i], base_dir, c.seed + i, "config.sources[" + std::to_string(i) + "]");
    for (const SourceSpec& prev : c.sources) {
      require(prev.name != s.name, ErrorKind::InvalidConfig, "config.sources: duplicate name '" + s.name + "'");
    }
    c.sources.push_back(std::move(s));
  }
  return c;
}

ExperimentConfig load_config(const fs::path& path, std::optional<std::uint64_t> seed) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::InvalidConfig, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path(), seed);
}

// ---------------------------------------------------------------- ingest

namespace {

void require_file(const fs::path& p, const std::string& what) {
  require(fs::exists(p), ErrorKind::Io, what + ": missing file " + p.string());
}

FeatureSet load_set(const SetSpec& spec, const std::string& source) {
  const std::string what = "source '" + source + "' set '" + spec.id + "'";
  FeatureSet s;
  s.dataset_id = spec.id;
  require_file(spec.features, what);
  s.features = load_matrix(spec.features);
  if (spec.logits) {
    require_file(*spec.logits, what);
    s.logits = load_matrix(*spec.logits);
  }
  if (spec.labels) {
    require_file(*spec.labels, what);
    s.labels = load_labels(*spec.labels);
  }
  if (spec.passes) {
    require_file(*spec.passes, what);
    s.passes = read_fmx(*spec.passes).as_passes();
  }
  for (const auto& [name, path] : spec.external) {
    require_file(path, what);
    s.external[name] = load_vector(path);
  }
  return s;
}

EmbeddingSet load_clip(const fs::path& path, const std::string& id, const std::string& source) {
  require_file(path, "source '" + source + "' CLIP embeddings for '" + id + "'");
  EmbeddingSet e;
  e.dataset_id = id;
  e.embeddings = load_matrix(path);
  return e;
}

}  // namespace

SourceData load_source(const SourceSpec& spec, std::uint64_t seed) {
  SourceData d;
  d.name = spec.name;
  d.paradigm = spec.paradigm;
  if (spec.synthetic) {
    SyntheticOptions o = *spec.synthetic;
    if (o.seed == 0) o.seed = seed;
    SyntheticBenchmark b = make_synthetic(o);
    d.head = std::move(b.head);
    d.train = std::move(b.train);
    d.validation = std::move(b.validation);
    d.test = std::move(b.test);
    d.ood = std::move(b.ood);
    d.clip_id = std::move(b.clip_id);
    for (EmbeddingSet& e : b.clip_ood) d.clip_ood.emplace_back(std::move(e));
  } else {
    require_file(spec.head_weights, "source '" + spec.name + "' head");
    d.head.weights = load_matrix(spec.head_weights);
    if (spec.head_bias) {
      require_file(*spec.head_bias, "source '" + spec.name + "' head");
      d.head.bias = load_vector(*spec.head_bias);
    } else {
      d.head.bias = Vector::Zero(d.head.weights.rows());
    }
    d.head.temperature = spec.head_temperature;
    d.train = load_set(spec.train, spec.name);
    d.validation = load_set(spec.validation, spec.name);
    if (spec.validation_ood) d.validation_ood = load_set(*spec.validation_ood, spec.name);
    d.test = load_set(spec.test, spec.name);
    for (const SetSpec& o : spec.ood) d.ood.push_back(load_set(o, spec.name));
    if (spec.test.clip) {
      d.clip_id = load_clip(*spec.test.clip, spec.test.id, spec.name);
      if (spec.clip_labels) {
        require_file(*spec.clip_labels, "source '" + spec.name + "' CLIP labels");
        d.clip_id->labels = load_labels(*spec.clip_labels);
      } else {
        d.clip_id->labels = d.test.labels;
      }
      if (spec.clip_text) {
        require_file(*spec.clip_text, "source '" + spec.name + "' CLIP text prototypes");
        d.clip_id->text_prototypes = load_matrix(*spec.clip_text);
      }
    }
    for (const SetSpec& o : spec.ood) {
      d.clip_ood.push_back(o.clip ? std::optional<EmbeddingSet>(load_clip(*o.clip, o.id, spec.name)) : std::nullopt);
    }
  }
  d.head.validate();
  const Index c = d.head.num_classes();
  d.train.validate(c);
  d.validation.validate(c);
  d.test.validate(c);
  if (d.validation_ood) d.validation_ood->validate(c);
  for (const FeatureSet& o : d.ood) o.validate(c);
  require(d.test.labels.has_value() && d.validation.labels.has_value(), ErrorKind::InvalidInput,
          "source '" + d.name + "': validation and test sets need labels");
  if (d.clip_id) d.clip_id->validate();
  for (const auto& e : d.clip_ood) {
    if (e) e->validate();
  }
  return d;
}

// ---------------------------------------------------------------- stages

namespace {

template <class F>
auto in_stage(const std::string& stage, const std::string& subject, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const Error& e) {
    throw Error(e.kind(), "stage '" + stage + "' [" + subject + "]: " + e.what());
  }
}

std::vector<std::pair<std::string, Variant>> selected_methods(const ExperimentConfig& config) {
  std::vector<std::pair<std::string, Variant>> out;
  for (const MethodInfo& info : method_registry()) {
    if (!config.methods.empty() &&
        std::find(config.methods.begin(), config.methods.end(), info.id) == config.methods.end()) {
      continue;
    }
    for (Variant v : info.variants) {
      if (!config.variants.empty() && std::find(config.variants.begin(), config.variants.end(), v) == config.variants.end()) {
        continue;
      }
      out.emplace_back(std::string(info.id), v);
    }
  }
  return out;
}

// Reason the method cannot run on this source, or empty.
std::string unavailable(const MethodInfo& info, const SourceData& d) {
  std::vector<const FeatureSet*> sets{&d.validation, &d.test};
  if (d.validation_ood) sets.push_back(&*d.validation_ood);
  for (const FeatureSet& o : d.ood) sets.push_back(&o);
  for (const FeatureSet* s : sets) {
    if (info.family == MethodFamily::MonteCarlo && !s->has_passes()) return "set '" + s->dataset_id + "' has no passes";
    if (info.family == MethodFamily::External && !s->external.count(std::string(info.id))) {
      return "set '" + s->dataset_id + "' has no '" + std::string(info.id) + "' scores";
    }
  }
  return {};
}

Grid grid_for(const ExperimentConfig& config, const MethodInfo& info) {
  Grid g;
  if (auto it = config.grids.find(std::string(info.id)); it != config.grids.end()) return it->second;
  if (auto it = config.grids.find("*"); it != config.grids.end()) {
    for (const auto& [name, values] : it->second) {
      if (std::find(info.hyperparameters.begin(), info.hyperparameters.end(), name) != info.hyperparameters.end()) {
        g[name] = values;
      }
    }
  }
  return g;
}

double validation_augrc(const ScoringEngine& engine, const SourceData& d, const std::string& method, Variant v,
                        const HyperParams& hp, const Matrix& val_logits) {
  const Vector conf = engine.score(method, v, d.validation, hp).confidence();
  std::vector<LabeledOutcome> outcomes;
  if (d.validation_ood) {
    const Vector ood = engine.score(method, v, *d.validation_ood, hp).confidence();
    outcomes = build_protocol(conf, *d.validation.labels, val_logits, &ood, Protocol::OODDetection);
  } else {
    outcomes = build_protocol(conf, *d.validation.labels, val_logits, nullptr, Protocol::Misclassification);
  }
  return augrc(outcomes);
}

void push_metrics(std::vector<MetricRow>& rows, const MetricRow& key, const MetricResult& r) {
  const std::pair<const char*, double> values[] = {
      {"aurc", r.aurc}, {"augrc", r.augrc}, {"auroc", r.auroc}, {"fpr95", r.fpr_at_95tpr}};
  for (const auto& [name, value] : values) {
    MetricRow row = key;
    row.metric = name;
    row.value = value;
    rows.push_back(std::move(row));
  }
}

std::string override_for(const ExperimentConfig& config, const std::string& source, const std::string& set,
                         bool& found) {
  found = false;
  for (const std::string& key : {source + "/" + set, set}) {
    if (auto it = config.bucket_overrides.find(key); it != config.bucket_overrides.end()) {
      found = true;
      return std::string(to_string(it->second));
    }
  }
  return "unassigned";
}

std::vector<ProximityRecord> proximity_stage(const ExperimentConfig& config, const SourceData& d,
                                             std::vector<std::string>& warnings) {
  std::vector<ProximityRecord> records;
  std::vector<ProximityVector> vectors;
  std::vector<std::size_t> owners;
  for (std::size_t j = 0; j < d.ood.size(); ++j) {
    ProximityRecord r;
    r.source = d.name;
    r.ood_set = d.ood[j].dataset_id;
    if (d.clip_id && d.clip_id->text_prototypes && j < d.clip_ood.size() && d.clip_ood[j]) {
      r.vector = in_stage("proximity", d.name + "/" + r.ood_set,
                          [&] { return proximity_vector(*d.clip_id, *d.clip_ood[j], config.mmd_c, config.mmd_degree); });
      r.vector->name = r.ood_set;
      vectors.push_back(*r.vector);
      owners.push_back(j);
    }
    records.push_back(std::move(r));
  }
  if (vectors.size() >= 3) {
    const BucketResult b = in_stage("proximity", d.name, [&] { return bucketize(vectors, config.buckets); });
    for (std::size_t i = 0; i < owners.size(); ++i) records[owners[i]].bucket = std::string(to_string(b.buckets[i]));
    for (const std::string& w : b.warnings) warnings.push_back("source '" + d.name + "': " + w);
  } else if (!d.ood.empty()) {
    warnings.push_back("source '" + d.name + "': fewer than 3 OOD sets with CLIP embeddings; buckets come from overrides only");
  }
  for (ProximityRecord& r : records) {
    bool found = false;
    const std::string o = override_for(config, d.name, r.ood_set, found);
    if (found) {
      r.bucket = o;
      r.overridden = true;
    } else if (r.bucket.empty()) {
      r.bucket = "unassigned";
    }
  }
  return records;
}

}  // namespace

PipelineReport run_pipeline(const ExperimentConfig& config, const PipelineStages& stages) {
  PipelineReport report;
  const auto selection = selected_methods(config);
  require(!selection.empty(), ErrorKind::InvalidConfig, "no method/variant pair matches the selection");

  for (std::size_t si = 0; si < config.sources.size(); ++si) {
    const SourceSpec& spec = config.sources[si];
    const SourceData d = in_stage("ingest", spec.name, [&] { return load_source(spec, config.seed + si); });
    const bool needs_scores = stages.tune || stages.metrics;
    std::optional<ScoringEngine> engine;
    if (needs_scores) {
      engine.emplace(d.train, d.head, config.engine);
    }

    std::map<std::string, std::string> buckets;
    if (stages.proximity) {
      auto recs = proximity_stage(config, d, report.warnings);
      for (const ProximityRecord& r : recs) buckets[r.ood_set] = r.bucket;
      report.proximity.insert(report.proximity.end(), recs.begin(), recs.end());
    } else {
      for (const FeatureSet& o : d.ood) {
        bool found = false;
        buckets[o.dataset_id] = override_for(config, d.name, o.dataset_id, found);
      }
    }
    if (!needs_scores) continue;

    const Matrix val_logits = engine->logits_of(d.validation);
    const Matrix test_logits = engine->logits_of(d.test);
    for (const auto& [method, variant] : selection) {
      const MethodInfo& info = method_info(method);
      const std::string subject = d.name + "/" + method + "/" + std::string(to_string(variant));
      if (const std::string why = unavailable(info, d); !why.empty()) {
        require(config.methods.empty(), ErrorKind::InvalidInput, "source '" + d.name + "': " + method + " needs data: " + why);
        report.warnings.push_back("source '" + d.name + "': skipped " + method + " (" + why + ")");
        continue;
      }

      HyperParams hp = config.hyperparameters;
      const Grid grid = grid_for(config, info);
      if (stages.tune && !grid.empty()) {
        const TuneResult t = in_stage("tune", subject, [&] {
          return tune(grid, hp, [&](const HyperParams& p) {
            return validation_augrc(*engine, d, method, variant, p, val_logits);
          });
        });
        hp = t.params;
        TuneRecord rec;
        rec.source = d.name;
        rec.method = method;
        rec.variant = std::string(to_string(variant));
        for (const auto& [name, _] : grid) rec.params[name] = hp.get(name);
        rec.objective = t.objective * 1000.0;
        rec.trials = t.trials.size();
        rec.protocol = std::string(to_string(d.validation_ood ? Protocol::OODDetection : Protocol::Misclassification));
        report.tuning.push_back(std::move(rec));
      }
      if (!stages.metrics) continue;

      const Vector test_conf = in_stage("score", subject + "/" + d.test.dataset_id,
                                        [&] { return engine->score(method, variant, d.test, hp).confidence(); });
      MetricRow key;
      key.source = d.name;
      key.paradigm = d.paradigm;
      key.method = method;
      key.variant = std::string(to_string(variant));
      key.ood_set = "id";
      key.bucket = "id";
      key.protocol = Protocol::Misclassification;
      key.n_id = d.test.size();
      in_stage("metrics", subject + "/id", [&] {
        const auto out = build_protocol(test_conf, *d.test.labels, test_logits, nullptr, Protocol::Misclassification);
        push_metrics(report.metrics, key, evaluate_outcomes(out));
        return 0;
      });
      for (const FeatureSet& ood : d.ood) {
        const Vector ood_conf = in_stage("score", subject + "/" + ood.dataset_id,
                                         [&] { return engine->score(method, variant, ood, hp).confidence(); });
        in_stage("metrics", subject + "/" + ood.dataset_id, [&] {
          const auto out = build_protocol(test_conf, *d.test.labels, test_logits, &ood_conf, Protocol::OODDetection);
          const MetricResult r = evaluate_outcomes(out);
          MetricRow k = key;
          k.ood_set = ood.dataset_id;
          k.bucket = buckets[ood.dataset_id];
          k.protocol = Protocol::OODDetection;
          k.n_id = r.n_success;
          k.n_ood = r.n_failure;
          push_metrics(report.metrics, k, r);
          return 0;
        });
      }
    }
  }

  if (stages.rank && stages.metrics) {
    report.regimes = in_stage("rank", "metrics", [&] { return rank_regimes(report.metrics, config.rank_metrics, config.ranking); });
  }
  return report;
}

// ---------------------------------------------------------------- ranking

std::vector<RegimeReport> rank_regimes(const std::vector<MetricRow>& rows, const std::vector<std::string>& metrics,
                                       const RankingOptions& options) {
  const std::vector<std::string> regimes{"id", "near", "mid", "far", "ood"};
  std::vector<RegimeReport> out;
  for (const std::string& regime : regimes) {
    RegimeReport rep;
    rep.name = regime;
    // block key -> method column -> loss
    std::map<std::string, std::map<std::string, double>> blocks;
    std::set<std::string> methods;
    for (const MetricRow& r : rows) {
      if (std::find(metrics.begin(), metrics.end(), r.metric) == metrics.end()) continue;
      const bool is_id = r.protocol == Protocol::Misclassification;
      if (regime == "id" ? !is_id : is_id) continue;
      if (regime != "id" && regime != "ood" && r.bucket != regime) continue;
      const std::string block = r.source + "|" + r.paradigm + "|" + r.ood_set + "|" + r.metric;
      const std::string column = r.method + "@" + r.variant;
      blocks[block][column] = r.metric == "auroc" ? -r.value : r.value;
      methods.insert(column);
    }
    // Drop blocks with a non-finite cell, then methods missing from any remaining block.
    for (auto it = blocks.begin(); it != blocks.end();) {
      const bool bad = std::any_of(it->second.begin(), it->second.end(), [](const auto& kv) { return !std::isfinite(kv.second); });
      if (bad) {
        rep.warnings.push_back("block '" + it->first + "' dropped: non-finite value");
        it = blocks.erase(it);
      } else {
        ++it;
      }
    }
    std::vector<std::string> columns;
    for (const std::string& m : methods) {
      const bool complete = !blocks.empty() && std::all_of(blocks.begin(), blocks.end(),
                                                           [&](const auto& b) { return b.second.count(m) > 0; });
      if (complete) {
        columns.push_back(m);
      } else if (!blocks.empty()) {
        rep.warnings.push_back("method '" + m + "' dropped: missing from some blocks");
      }
    }
    for (const auto& [key, _] : blocks) rep.block_keys.push_back(key);
    if (blocks.size() < 2 || columns.size() < 2) {
      if (!rows.empty()) {
        rep.warnings.push_back("regime skipped: " + std::to_string(blocks.size()) + " blocks, " +
                               std::to_string(columns.size()) + " methods (need at least 2 of each)");
      }
      out.push_back(std::move(rep));
      continue;
    }
    BlockTable table;
    table.values.resize(static_cast<Index>(blocks.size()), static_cast<Index>(columns.size()));
    table.method_ids = columns;
    table.block_keys = rep.block_keys;
    Index i = 0;
    for (const auto& [key, cells] : blocks) {
      for (std::size_t j = 0; j < columns.size(); ++j) table.values(i, static_cast<Index>(j)) = cells.at(columns[j]);
      ++i;
    }
    rep.report = top_cliques(table, options);
    out.push_back(std::move(rep));
  }
  return out;
}

// ---------------------------------------------------------------- emitters

namespace {

const char* kMetricsHeader = "source,paradigm,ood_set,bucket,protocol,method,variant,metric,value,n_id,n_ood";

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

double parse_number(const std::string& s, const std::string& where) {
  double x = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  require(res.ec == std::errc() && res.ptr == s.data() + s.size(), ErrorKind::InvalidInput,
          where + ": '" + s + "' is not a number");
  return x;
}

json number(double x) {
  if (std::isfinite(x)) return x;
  return format_double(x);
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(number(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::uint32_t crc_of(const std::string& bytes) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

std::string hex32(std::uint32_t v) {
  char buf[9];
  static const char* digits = "0123456789abcdef";
  for (int i = 7; i >= 0; --i) {
    buf[i] = digits[v & 0xF];
    v >>= 4;
  }
  buf[8] = '\0';
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  out << text;
  require(static_cast<bool>(out), ErrorKind::Io, "write failed for " + path.string());
}

std::string cliques_json(const std::vector<RegimeReport>& regimes) {
  json doc = json::array();
  for (const RegimeReport& r : regimes) {
    json j;
    j["regime"] = r.name;
    j["blocks"] = r.block_keys;
    j["warnings"] = r.warnings;
    if (r.report) {
      const CliqueReport& c = *r.report;
      j["methods"] = c.method_ids;
      json ranks = json::array();
      for (Index i = 0; i < c.friedman.mean_ranks.size(); ++i) ranks.push_back(number(c.friedman.mean_ranks[i]));
      j["mean_ranks"] = ranks;
      j["friedman"] = {{"q", number(c.friedman.q)},
                       {"f", number(c.friedman.f)},
                       {"p_value", number(c.friedman.p_value)},
                       {"perfect_agreement", c.friedman.perfect_agreement},
                       {"rejected", c.friedman_rejected}};
      j["alpha"] = c.alpha;
      j["adjusted_p"] = matrix_json(c.adjusted_p);
      json cliques = json::array();
      for (const Clique& q : c.cliques) {
        json members = json::array();
        for (Index m : q.members) members.push_back(c.method_ids[static_cast<std::size_t>(m)]);
        cliques.push_back({{"members", members}, {"mean_rank", number(q.mean_rank)}});
      }
      j["cliques"] = cliques;
      j["top_clique"] = c.top_clique;
      j["best_method"] = c.method_ids[static_cast<std::size_t>(c.best_method)];
      j["best_method_tied"] = c.best_method_tied;
      j["top_clique_tied"] = c.top_clique_tied;
      for (const std::string& w : c.warnings) j["warnings"].push_back(w);
    } else {
      j["methods"] = json::array();
    }
    doc.push_back(std::move(j));
  }
  return doc.dump(2) + "\n";
}

std::string membership_csv(const std::vector<RegimeReport>& regimes) {
  std::string out = "regime,method,mean_rank,in_top_clique,cliques\n";
  for (const RegimeReport& r : regimes) {
    if (!r.report) continue;
    const CliqueReport& c = *r.report;
    for (std::size_t m = 0; m < c.method_ids.size(); ++m) {
      std::string ids;
      for (std::size_t q = 0; q < c.cliques.size(); ++q) {
        const auto& mem = c.cliques[q].members;
        if (std::find(mem.begin(), mem.end(), static_cast<Index>(m)) != mem.end()) {
          if (!ids.empty()) ids += ';';
          ids += std::to_string(q);
        }
      }
      out += r.name + "," + csv_field(c.method_ids[m]) + "," + format_double(c.friedman.mean_ranks[static_cast<Index>(m)]) +
             "," + (c.in_top(static_cast<Index>(m)) ? "1" : "0") + "," + ids + "\n";
    }
  }
  return out;
}

std::string edges_csv(const std::vector<RegimeReport>& regimes) {
  std::string out = "regime,method_a,method_b,adjusted_p,edge\n";
  for (const RegimeReport& r : regimes) {
    if (!r.report) continue;
    const CliqueReport& c = *r.report;
    const Index k = static_cast<Index>(c.method_ids.size());
    for (Index i = 0; i < k; ++i) {
      for (Index j = i + 1; j < k; ++j) {
        out += r.name + "," + csv_field(c.method_ids[static_cast<std::size_t>(i)]) + "," +
               csv_field(c.method_ids[static_cast<std::size_t>(j)]) + "," + format_double(c.adjusted_p(i, j)) + "," +
               (c.graph.edge(i, j) ? "1" : "0") + "\n";
      }
    }
  }
  return out;
}

std::string proximity_csv(const std::vector<ProximityRecord>& recs) {
  std::string out = "source,ood_set,fd2,mmd2,d_nc,d_it,bucket,overridden\n";
  for (const ProximityRecord& r : recs) {
    out += csv_field(r.source) + "," + csv_field(r.ood_set);
    for (std::size_t c = 0; c < 4; ++c) out += "," + (r.vector ? format_double(r.vector->v[c]) : std::string());
    out += "," + r.bucket + "," + (r.overridden ? "1" : "0") + "\n";
  }
  return out;
}

std::string proximity_json(const std::vector<ProximityRecord>& recs) {
  json doc = json::array();
  for (const ProximityRecord& r : recs) {
    json j{{"source", r.source}, {"ood_set", r.ood_set}};
    if (r.vector) {
      for (std::size_t c = 0; c < 4; ++c) j[std::string(kProximityCoordinates[c])] = number(r.vector->v[c]);
    }
    j["bucket"] = r.bucket;
    j["overridden"] = r.overridden;
    doc.push_back(std::move(j));
  }
  return doc.dump(2) + "\n";
}

std::string tuning_json(const std::vector<TuneRecord>& recs) {
  json doc = json::array();
  for (const TuneRecord& r : recs) {
    json params = json::object();
    for (const auto& [k, v] : r.params) params[k] = number(v);
    doc.push_back({{"source", r.source},
                   {"method", r.method},
                   {"variant", r.variant},
                   {"protocol", r.protocol},
                   {"params", params},
                   {"validation_augrc", number(r.objective)},
                   {"trials", r.trials}});
  }
  return doc.dump(2) + "\n";
}

}  // namespace

std::string metrics_csv(const std::vector<MetricRow>& rows) {
  std::string out = std::string(kMetricsHeader) + "\n";
  for (const MetricRow& r : rows) {
    out += csv_field(r.source) + "," + csv_field(r.paradigm) + "," + csv_field(r.ood_set) + "," + r.bucket + "," +
           std::string(to_string(r.protocol)) + "," + r.method + "," + r.variant + "," + r.metric + "," +
           format_double(r.value) + "," + std::to_string(r.n_id) + "," + std::to_string(r.n_ood) + "\n";
  }
  return out;
}

std::vector<MetricRow> parse_metrics_csv(const std::string& text) {
  std::vector<MetricRow> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1) {
      require(line == kMetricsHeader, ErrorKind::InvalidInput, "metrics table: unexpected header '" + line + "'");
      continue;
    }
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    const std::string where = "metrics table line " + std::to_string(lineno);
    require(f.size() == 11, ErrorKind::InvalidInput, where + ": expected 11 fields");
    MetricRow r;
    r.source = f[0];
    r.paradigm = f[1];
    r.ood_set = f[2];
    r.bucket = f[3];
    if (f[4] == "ood_detection") {
      r.protocol = Protocol::OODDetection;
    } else if (f[4] == "misclassification") {
      r.protocol = Protocol::Misclassification;
    } else {
      fail(ErrorKind::InvalidInput, where + ": unknown protocol '" + f[4] + "'");
    }
    r.method = f[5];
    r.variant = f[6];
    r.metric = f[7];
    r.value = parse_number(f[8], where);
    r.n_id = static_cast<Index>(parse_number(f[9], where));
    r.n_ood = static_cast<Index>(parse_number(f[10], where));
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_reports(const PipelineReport& report, const ExperimentConfig& config, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  require(!ec, ErrorKind::Io, "cannot create output directory " + out_dir.string());

  std::vector<std::pair<std::string, std::string>> files;
  if (!report.metrics.empty()) files.emplace_back("metrics.csv", metrics_csv(report.metrics));
  if (!report.tuning.empty()) files.emplace_back("tuning.json", tuning_json(report.tuning));
  if (!report.proximity.empty()) {
    files.emplace_back("proximity.csv", proximity_csv(report.proximity));
    files.emplace_back("proximity.json", proximity_json(report.proximity));
  }
  if (!report.regimes.empty()) {
    files.emplace_back("cliques.json", cliques_json(report.regimes));
    files.emplace_back("membership.csv", membership_csv(report.regimes));
    files.emplace_back("edges.csv", edges_csv(report.regimes));
  }

  json manifest;
  manifest["tool"] = "oodlab";
  manifest["version"] = kVersion;
  manifest["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                      std::to_string(EIGEN_MINOR_VERSION);
  manifest["seed"] = config.seed;
  json sources = json::array();
  for (std::size_t i = 0; i < config.sources.size(); ++i) {
    const SourceSpec& s = config.sources[i];
    json j{{"name", s.name}, {"paradigm", s.paradigm}};
    if (s.synthetic) {
      j["synthetic_seed"] = s.synthetic->seed == 0 ? config.seed + i : s.synthetic->seed;
    }
    sources.push_back(std::move(j));
  }
  manifest["sources"] = sources;
  manifest["seeds"] = {{"kpca", config.engine.kpca.seed}, {"engine", config.engine.seed}, {"buckets", config.buckets.seed}};
  manifest["variance_fraction"] = config.engine.variance_fraction;
  manifest["mc_aggregation"] = config.engine.mc_mode == McAggregation::MeanProbability ? "mean_probability" : "mean_logit";
  manifest["alpha"] = config.ranking.alpha;
  manifest["rank_metrics"] = config.rank_metrics;
  json outputs = json::object();
  for (const auto& [name, text] : files) {
    write_text(out_dir / name, text);
    outputs[name] = {{"bytes", text.size()}, {"crc32", hex32(crc_of(text))}};
  }
  manifest["outputs"] = outputs;
  manifest["warnings"] = report.warnings;
  write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

// ---------------------------------------------------------------- fixture

SyntheticOptions fixture_options(std::uint64_t seed) {
  SyntheticOptions o;
  o.n_train = 600;
  o.n_validation = 400;
  o.n_test = 600;
  o.n_ood = 300;
  o.ood_shifts = {2.0, 4.0, 6.0, 8.0, 10.0};
  o.passes = 10;
  o.clip_rows = 200;
  o.seed = seed;
  return o;
}

fs::path write_fixture(const fs::path& dir, std::uint64_t seed) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorKind::Io, "cannot create fixture directory " + dir.string());
  json config;
  config["seed"] = seed;
  config["methods"] = "all";
  config["variants"] = "all";
  config["grids"] = {{"*", {{"temperature", {0.5, 1.0, 2.0}}}}};
  config["ranking"] = {{"alpha", 0.05}, {"metrics", {"augrc", "aurc"}}};
  json sources = json::array();
  const std::pair<const char*, const char*> names[] = {{"gauss-a", "ce"}, {"gauss-b", "dg"}};
  for (std::size_t si = 0; si < 2; ++si) {
    const std::string name = names[si].first;
    const SyntheticBenchmark b = make_synthetic(fixture_options(seed + si));
    const fs::path sub = dir / name;
    fs::create_directories(sub, ec);
    require(!ec, ErrorKind::Io, "cannot create fixture directory " + sub.string());
    auto put = [&](const FmxArray& a, const std::string& file) {
      write_fmx(a, sub / file);
      return name + "/" + file;
    };
    auto put_set = [&](const FeatureSet& s, const EmbeddingSet* clip) {
      json j;
      j["id"] = s.dataset_id;
      j["features"] = put(make_fmx(s.features, "features", DType::F64, s.dataset_id), s.dataset_id + "_features.fmx");
      if (s.logits) j["logits"] = put(make_fmx(*s.logits, "logits", DType::F64, s.dataset_id), s.dataset_id + "_logits.fmx");
      if (s.labels) j["labels"] = put(make_fmx(*s.labels, s.dataset_id), s.dataset_id + "_labels.fmx");
      if (s.has_passes()) j["passes"] = put(make_fmx(s.passes, DType::F64, s.dataset_id), s.dataset_id + "_passes.fmx");
      for (const auto& [ext, v] : s.external) {
        j["external"][ext] = put(make_fmx(v, "scores", DType::F64, s.dataset_id), s.dataset_id + "_" + ext + ".fmx");
      }
      if (clip) j["clip"] = put(make_fmx(clip->embeddings, "embeddings", DType::F64, s.dataset_id), s.dataset_id + "_clip.fmx");
      return j;
    };
    json src;
    src["name"] = name;
    src["paradigm"] = names[si].second;
    src["head"] = {{"weights", put(make_fmx(b.head.weights, "weights"), "head_weights.fmx")},
                   {"bias", put(make_fmx(b.head.bias, "bias"), "head_bias.fmx")}};
    src["train"] = put_set(b.train, nullptr);
    src["validation"] = put_set(b.validation, nullptr);
    src["test"] = put_set(b.test, &b.clip_id);
    json ood = json::array();
    for (std::size_t j = 0; j < b.ood.size(); ++j) ood.push_back(put_set(b.ood[j], &b.clip_ood[j]));
    src["ood"] = ood;
    src["clip"] = {{"labels", put(make_fmx(*b.clip_id.labels, "test"), "clip_labels.fmx")},
                   {"text", put(make_fmx(*b.clip_id.text_prototypes, "embeddings", DType::F64, "text"), "clip_text.fmx")}};
    sources.push_back(std::move(src));
  }
  config["sources"] = sources;
  const fs::path path = dir / "config.json";
  write_text(path, config.dump(2) + "\n");
  return path;
}

}  // namespace oodlab

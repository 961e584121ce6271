// Python module: method registry, scoring engine, metrics, proximity, ranking, FMX I/O and the
// experiment pipeline. Arrays cross the boundary as float64 NumPy arrays.
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>

#include "oodlab/engine.hpp"
#include "oodlab/fmx.hpp"
#include "oodlab/metrics.hpp"
#include "oodlab/pipeline.hpp"
#include "oodlab/proximity.hpp"
#include "oodlab/ranking.hpp"
#include "oodlab/registry.hpp"

namespace py = pybind11;
using namespace oodlab;

namespace {

HyperParams hyperparams_from(const py::dict& d) {
  HyperParams hp;
  for (const auto& [k, v] : d) hp.set(py::cast<std::string>(k), py::cast<double>(v));
  hp.validate();
  return hp;
}

std::vector<LabeledOutcome> outcomes_from(const Vector& confidence, const std::vector<bool>& failure) {
  require(static_cast<Index>(failure.size()) == confidence.size(), ErrorKind::InvalidInput,
          "confidence and failure flags differ in length");
  std::vector<LabeledOutcome> o(failure.size());
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = {confidence[static_cast<Index>(i)], failure[i]};
  return o;
}

py::dict metric_dict(const MetricResult& r) {
  py::dict d;
  d["aurc"] = r.aurc;
  d["augrc"] = r.augrc;
  d["auroc"] = r.auroc;
  d["fpr_at_95tpr"] = r.fpr_at_95tpr;
  d["n_success"] = r.n_success;
  d["n_failure"] = r.n_failure;
  return d;
}

py::dict clique_dict(const CliqueReport& r) {
  py::list cliques;
  for (const Clique& c : r.cliques) {
    py::list members;
    for (Index m : c.members) members.append(r.method_ids[static_cast<std::size_t>(m)]);
    py::dict e;
    e["members"] = members;
    e["mean_rank"] = c.mean_rank;
    cliques.append(e);
  }
  py::dict d;
  d["method_ids"] = r.method_ids;
  d["mean_ranks"] = r.friedman.mean_ranks;
  d["friedman_q"] = r.friedman.q;
  d["friedman_f"] = r.friedman.f;
  d["friedman_p"] = r.friedman.p_value;
  d["friedman_rejected"] = r.friedman_rejected;
  d["adjusted_p"] = r.adjusted_p;
  d["cliques"] = cliques;
  d["top_clique"] = r.top_clique;
  d["best_method"] = r.method_ids[static_cast<std::size_t>(r.best_method)];
  d["warnings"] = r.warnings;
  return d;
}

py::object fmx_to_array(const FmxArray& a) {
  if (a.shape.size() == 1 && a.dtype == DType::I32) return py::cast(a.as_labels());
  if (a.shape.size() == 1) return py::cast(a.as_vector());
  if (a.shape.size() == 3) return py::cast(a.as_passes());
  return py::cast(a.as_matrix());
}

DType parse_dtype_name(const std::string& s) {
  if (s == "f32") return DType::F32;
  if (s == "f64") return DType::F64;
  if (s == "i32") return DType::I32;
  fail(ErrorKind::Schema, "unknown dtype '" + s + "'");
}

}  // namespace

PYBIND11_MODULE(_oodlab, m) {
  m.doc() = "Confidence scoring, selective-classification metrics and rank-based comparison for OOD detection";
  m.attr("__version__") = kVersion;

  static py::exception<Error> error_type(m, "OodlabError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error_type.ptr())(std::string(to_string(e.kind())) + ": " + e.what());
      exc.attr("kind") = std::string(to_string(e.kind()));
      exc.attr("exit_code") = e.exit_code();
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  m.def("list_methods", [] {
    py::list out;
    for (const MethodInfo& info : method_registry()) {
      py::dict d;
      d["method_id"] = std::string(info.id);
      d["orientation"] = std::string(to_string(info.orientation));
      py::list variants, hps;
      for (Variant v : info.variants) variants.append(std::string(to_string(v)));
      for (auto h : info.hyperparameters) hps.append(std::string(h));
      d["variants"] = variants;
      d["hyperparameters"] = hps;
      d["summary"] = std::string(info.summary);
      out.append(d);
    }
    return out;
  });

  py::class_<FeatureSet>(m, "FeatureSet")
      .def(py::init([](Matrix features, std::optional<Labels> labels, std::optional<Matrix> logits,
                       std::vector<Matrix> passes, std::map<std::string, Vector> external, std::string dataset_id) {
             FeatureSet s;
             s.features = std::move(features);
             s.labels = std::move(labels);
             s.logits = std::move(logits);
             s.passes = std::move(passes);
             s.external = std::move(external);
             s.dataset_id = std::move(dataset_id);
             s.validate();
             return s;
           }),
           py::arg("features"), py::arg("labels") = py::none(), py::arg("logits") = py::none(),
           py::arg("passes") = std::vector<Matrix>{}, py::arg("external") = std::map<std::string, Vector>{},
           py::arg("dataset_id") = "")
      .def_readonly("features", &FeatureSet::features)
      .def_readonly("labels", &FeatureSet::labels)
      .def_readonly("logits", &FeatureSet::logits)
      .def_readonly("dataset_id", &FeatureSet::dataset_id)
      .def("__len__", &FeatureSet::size);

  py::class_<ClassifierHead>(m, "ClassifierHead")
      .def(py::init([](Matrix weights, std::optional<Vector> bias, double temperature) {
             ClassifierHead h;
             h.bias = bias ? *bias : Vector::Zero(weights.rows());
             h.weights = std::move(weights);
             h.temperature = temperature;
             h.validate();
             return h;
           }),
           py::arg("weights"), py::arg("bias") = py::none(), py::arg("temperature") = 1.0)
      .def_readonly("weights", &ClassifierHead::weights)
      .def_readonly("bias", &ClassifierHead::bias)
      .def("logits", py::overload_cast<const Matrix&>(&ClassifierHead::logits, py::const_));

  // The engine owns caches guarded by a mutex, so it lives behind a unique_ptr.
  py::class_<ScoringEngine, std::unique_ptr<ScoringEngine>>(m, "ScoringEngine")
      .def(py::init([](FeatureSet train, ClassifierHead head, double variance_fraction, std::uint64_t seed) {
             EngineOptions o;
             o.variance_fraction = variance_fraction;
             o.seed = seed;
             return std::make_unique<ScoringEngine>(std::move(train), std::move(head), o);
           }),
           py::arg("train"), py::arg("head"), py::arg("variance_fraction") = kDefaultVarianceFraction,
           py::arg("seed") = 0)
      .def(
          "score",
          [](const ScoringEngine& e, const std::string& method, const std::string& variant, const FeatureSet& data,
             const py::dict& hp) {
            ScoreVector s;
            {
              py::gil_scoped_release release;
              s = e.score(method, parse_variant(variant), data, hyperparams_from(hp));
            }
            return py::make_tuple(s.values, std::string(to_string(s.orientation)));
          },
          py::arg("method"), py::arg("variant") = "Unmodified", py::arg("data"), py::arg("hyperparameters") = py::dict())
      .def(
          "confidence",
          [](const ScoringEngine& e, const std::string& method, const std::string& variant, const FeatureSet& data,
             const py::dict& hp) { return e.score(method, parse_variant(variant), data, hyperparams_from(hp)).confidence(); },
          py::arg("method"), py::arg("variant") = "Unmodified", py::arg("data"), py::arg("hyperparameters") = py::dict())
      .def("logits_of", &ScoringEngine::logits_of);

  m.def("aurc", [](const Vector& c, const std::vector<bool>& f) { return aurc(outcomes_from(c, f)); },
        py::arg("confidence"), py::arg("failure"));
  m.def("augrc", [](const Vector& c, const std::vector<bool>& f) { return augrc(outcomes_from(c, f)); },
        py::arg("confidence"), py::arg("failure"));
  m.def("auroc", [](const Vector& id, const Vector& ood) { return auroc(id, ood); }, py::arg("id_scores"),
        py::arg("ood_scores"));
  m.def("fpr_at_tpr", [](const Vector& id, const Vector& ood, double tpr) { return fpr_at_tpr(id, ood, tpr); },
        py::arg("id_scores"), py::arg("ood_scores"), py::arg("tpr") = 0.95);
  m.def("evaluate", [](const Vector& c, const std::vector<bool>& f) { return metric_dict(evaluate_outcomes(outcomes_from(c, f))); },
        py::arg("confidence"), py::arg("failure"));
  m.def(
      "evaluate_detection",
      [](const Vector& id_conf, const Labels& labels, const Matrix& logits, const Vector& ood_conf) {
        return metric_dict(evaluate_outcomes(build_protocol(id_conf, labels, logits, &ood_conf, Protocol::OODDetection)));
      },
      py::arg("id_confidence"), py::arg("id_labels"), py::arg("id_logits"), py::arg("ood_confidence"));

  m.def("frechet_distance", &frechet_distance, py::arg("a"), py::arg("b"));
  m.def("mmd_poly_unbiased", &mmd_poly_unbiased, py::arg("x"), py::arg("y"), py::arg("c") = 1.0, py::arg("degree") = 3);
  m.def(
      "bucketize",
      [](const std::vector<std::pair<std::string, std::array<double, 4>>>& sets, std::uint64_t seed) {
        std::vector<ProximityVector> pv;
        for (const auto& [name, v] : sets) pv.push_back({name, v});
        BucketOptions o;
        o.seed = seed;
        const BucketResult r = bucketize(pv, o);
        py::dict d;
        for (std::size_t i = 0; i < r.names.size(); ++i) d[py::str(r.names[i])] = std::string(to_string(r.buckets[i]));
        return d;
      },
      py::arg("sets"), py::arg("seed") = 0,
      "sets: (name, (fd2, mmd2, d_nc, d_it)) pairs; returns name -> near/mid/far");

  m.def(
      "top_cliques",
      [](const Matrix& losses, std::vector<std::string> method_ids, double alpha) {
        BlockTable t;
        t.values = losses;
        for (Index i = 0; i < losses.rows(); ++i) t.block_keys.push_back("block-" + std::to_string(i));
        t.method_ids = std::move(method_ids);
        RankingOptions o;
        o.alpha = alpha;
        return clique_dict(top_cliques(t, o));
      },
      py::arg("losses"), py::arg("method_ids"), py::arg("alpha") = 0.05,
      "losses: blocks x methods, lower is better");
  m.def("holm_adjust", [](const std::vector<double>& p) { return holm_adjust(p); }, py::arg("p_values"));

  m.def("read_fmx", [](const std::filesystem::path& p) { return fmx_to_array(read_fmx(p)); }, py::arg("path"));
  m.def(
      "write_fmx",
      [](const std::filesystem::path& p, const Matrix& m, const std::string& role, const std::string& dtype,
         const std::string& dataset_id) { write_fmx(make_fmx(m, role, parse_dtype_name(dtype), dataset_id), p); },
      py::arg("path"), py::arg("array"), py::arg("role") = "features", py::arg("dtype") = "f64",
      py::arg("dataset_id") = "");
  m.def("load_matrix", &load_matrix, py::arg("path"));

  m.def("write_fixture", &write_fixture, py::arg("directory"), py::arg("seed") = 7);
  m.def(
      "run_pipeline",
      [](const std::filesystem::path& config, const std::filesystem::path& out, std::optional<std::uint64_t> seed) {
        const ExperimentConfig c = load_config(config, seed);
        PipelineReport r;
        {
          py::gil_scoped_release release;
          r = run_pipeline(c);
          write_reports(r, c, out);
        }
        py::dict d;
        d["metric_rows"] = r.metrics.size();
        d["tuned"] = r.tuning.size();
        py::dict regimes;
        for (const RegimeReport& reg : r.regimes) {
          regimes[py::str(reg.name)] = reg.report ? py::object(clique_dict(*reg.report)) : py::object(py::none());
        }
        d["regimes"] = regimes;
        d["warnings"] = r.warnings;
        return d;
      },
      py::arg("config"), py::arg("out"), py::arg("seed") = py::none(),
      "runs every stage, writes the reports under `out` and returns a summary");
}

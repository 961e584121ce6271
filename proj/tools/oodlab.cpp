// oodlab command line: registry listing, scoring, evaluation, tuning, proximity, ranking and
// the full pipeline. Exit codes: 0 ok, 2 config error, 3 data error, 4 numerical failure.
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "oodlab/engine.hpp"
#include "oodlab/pipeline.hpp"
#include "oodlab/registry.hpp"

namespace fs = std::filesystem;
using namespace oodlab;

namespace {

struct Common {
  std::string config;
  std::string out = "oodlab-out";
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c, bool config_required = true) {
  auto* opt = cmd->add_option("--config", c.config, "experiment config (JSON)");
  if (config_required) opt->required();
  cmd->add_option("--out", c.out, "output directory")->capture_default_str();
  cmd->add_option("--seed", c.seed, "overrides the config seed");
}

std::string family_name(MethodFamily f) {
  switch (f) {
    case MethodFamily::Probability: return "probability";
    case MethodFamily::Logit: return "logit";
    case MethodFamily::Feature: return "feature";
    case MethodFamily::Reconstruction: return "reconstruction";
    case MethodFamily::External: return "external";
    case MethodFamily::MonteCarlo: return "monte_carlo";
  }
  return "?";
}

void list_registry(bool as_json) {
  if (as_json) {
    nlohmann::ordered_json doc = nlohmann::ordered_json::array();
    for (const MethodInfo& m : method_registry()) {
      nlohmann::ordered_json variants = nlohmann::ordered_json::array();
      for (Variant v : m.variants) variants.push_back(std::string(to_string(v)));
      nlohmann::ordered_json hps = nlohmann::ordered_json::array();
      for (auto h : m.hyperparameters) hps.push_back(std::string(h));
      doc.push_back({{"method_id", std::string(m.id)},
                     {"orientation", std::string(to_string(m.orientation))},
                     {"family", family_name(m.family)},
                     {"variants", variants},
                     {"hyperparameters", hps},
                     {"summary", std::string(m.summary)}});
    }
    std::cout << doc.dump(2) << "\n";
    return;
  }
  std::cout << "method_id\torientation\tvariants\thyperparameters\n";
  for (const MethodInfo& m : method_registry()) {
    std::string variants;
    for (Variant v : m.variants) variants += (variants.empty() ? "" : ",") + std::string(to_string(v));
    std::string hps;
    for (auto h : m.hyperparameters) hps += (hps.empty() ? "" : ",") + std::string(h);
    std::cout << m.id << '\t' << to_string(m.orientation) << '\t' << variants << '\t' << (hps.empty() ? "-" : hps)
              << '\n';
  }
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << text;
}

// Raw per-sample scores for the test and OOD sets of every source.
void write_scores(const ExperimentConfig& config, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  std::string csv = "source,dataset,method,variant,orientation,row,value\n";
  for (std::size_t si = 0; si < config.sources.size(); ++si) {
    const SourceData d = load_source(config.sources[si], config.seed + si);
    const ScoringEngine engine(d.train, d.head, config.engine);
    std::vector<const FeatureSet*> sets{&d.test};
    for (const FeatureSet& o : d.ood) sets.push_back(&o);
    for (const MethodInfo& m : method_registry()) {
      if (!config.methods.empty() && std::find(config.methods.begin(), config.methods.end(), m.id) == config.methods.end()) {
        continue;
      }
      for (Variant v : m.variants) {
        if (!config.variants.empty() && std::find(config.variants.begin(), config.variants.end(), v) == config.variants.end()) {
          continue;
        }
        for (const FeatureSet* s : sets) {
          if (m.family == MethodFamily::MonteCarlo && !s->has_passes()) continue;
          if (m.family == MethodFamily::External && !s->external.count(std::string(m.id))) continue;
          const ScoreVector sv = engine.score(m.id, v, *s, config.hyperparameters);
          const std::string prefix = d.name + "," + s->dataset_id + "," + std::string(m.id) + "," +
                                     std::string(to_string(v)) + "," + std::string(to_string(sv.orientation)) + ",";
          for (Index i = 0; i < sv.size(); ++i) csv += prefix + std::to_string(i) + "," + format_double(sv.values[i]) + "\n";
        }
      }
    }
  }
  write_file(out_dir / "scores.csv", csv);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"oodlab: confidence scoring, evaluation and ranking for OOD detection"};
  app.require_subcommand(1);

  Common scores_opts;
  bool list = false;
  bool list_json = false;
  auto* scores = app.add_subcommand("scores", "list the method registry or dump raw scores");
  add_common(scores, scores_opts, false);
  scores->add_flag("--list", list, "print every method with orientation, variants and hyperparameters");
  scores->add_flag("--json", list_json, "with --list, emit JSON");

  Common eval_opts, tune_opts, prox_opts, rank_opts, pipe_opts, fixture_opts;
  auto* evaluate = app.add_subcommand("evaluate", "score test and OOD sets and write metrics.csv (no tuning)");
  add_common(evaluate, eval_opts);
  auto* tune_cmd = app.add_subcommand("tune", "grid-search hyperparameters on validation AUGRC");
  add_common(tune_cmd, tune_opts);
  auto* proximity = app.add_subcommand("proximity", "CLIP distances and near/mid/far buckets");
  add_common(proximity, prox_opts);
  std::string metrics_in;
  auto* rank = app.add_subcommand("rank", "Friedman / Conover-Holm top cliques per regime");
  add_common(rank, rank_opts, false);
  rank->add_option("--metrics", metrics_in, "rank an existing metrics.csv instead of running the pipeline");
  auto* pipeline = app.add_subcommand("pipeline", "every stage, every report");
  add_common(pipeline, pipe_opts);
  auto* fixture = app.add_subcommand("make-fixture", "write the synthetic fixture (FMX files + config.json)");
  fixture->add_option("--out", fixture_opts.out, "output directory")->capture_default_str();
  fixture->add_option("--seed", fixture_opts.seed, "fixture seed (default 7)");
  fixture->add_option("--config", fixture_opts.config, "ignored; accepted for a uniform surface");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (scores->parsed()) {
      if (list) {
        list_registry(list_json);
        return 0;
      }
      if (scores_opts.config.empty()) throw Error(ErrorKind::InvalidConfig, "scores needs --list or --config");
      write_scores(load_config(scores_opts.config, scores_opts.seed), scores_opts.out);
    } else if (evaluate->parsed()) {
      const ExperimentConfig c = load_config(eval_opts.config, eval_opts.seed);
      write_reports(run_pipeline(c, {.tune = false, .metrics = true, .proximity = true, .rank = false}), c, eval_opts.out);
    } else if (tune_cmd->parsed()) {
      const ExperimentConfig c = load_config(tune_opts.config, tune_opts.seed);
      write_reports(run_pipeline(c, {.tune = true, .metrics = false, .proximity = false, .rank = false}), c, tune_opts.out);
    } else if (proximity->parsed()) {
      const ExperimentConfig c = load_config(prox_opts.config, prox_opts.seed);
      write_reports(run_pipeline(c, {.tune = false, .metrics = false, .proximity = true, .rank = false}), c, prox_opts.out);
    } else if (rank->parsed()) {
      ExperimentConfig c;
      if (!rank_opts.config.empty()) c = load_config(rank_opts.config, rank_opts.seed);
      PipelineReport report;
      if (!metrics_in.empty()) {
        std::ifstream in(metrics_in, std::ios::binary);
        if (!in) throw Error(ErrorKind::Io, "cannot open metrics table " + metrics_in);
        std::stringstream ss;
        ss << in.rdbuf();
        report.regimes = rank_regimes(parse_metrics_csv(ss.str()), c.rank_metrics, c.ranking);
      } else {
        if (rank_opts.config.empty()) throw Error(ErrorKind::InvalidConfig, "rank needs --config or --metrics");
        report = run_pipeline(c);
        report.metrics.clear();
        report.tuning.clear();
        report.proximity.clear();
      }
      write_reports(report, c, rank_opts.out);
    } else if (pipeline->parsed()) {
      const ExperimentConfig c = load_config(pipe_opts.config, pipe_opts.seed);
      write_reports(run_pipeline(c), c, pipe_opts.out);
    } else if (fixture->parsed()) {
      const fs::path cfg = write_fixture(fixture_opts.out, fixture_opts.seed.value_or(7));
      std::cout << cfg.string() << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "oodlab: " << to_string(e.kind()) << ": " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "oodlab: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

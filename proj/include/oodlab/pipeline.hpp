#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "oodlab/core.hpp"
#include "oodlab/engine.hpp"
#include "oodlab/metrics.hpp"
#include "oodlab/proximity.hpp"
#include "oodlab/ranking.hpp"
#include "oodlab/synthetic.hpp"

namespace oodlab {

inline constexpr const char* kVersion = "0.1.0";

/// File locations for one split. Paths are resolved against the config file's directory.
struct SetSpec {
  std::string id;
  std::filesystem::path features;
  std::optional<std::filesystem::path> logits;
  std::optional<std::filesystem::path> labels;
  std::optional<std::filesystem::path> passes;
  std::map<std::string, std::filesystem::path> external;
  /// CLIP image embeddings of the same set, for proximity.
  std::optional<std::filesystem::path> clip;
};

struct SourceSpec {
  std::string name;
  std::string paradigm = "ce";
  /// Either a generated benchmark or files.
  std::optional<SyntheticOptions> synthetic;
  std::filesystem::path head_weights;
  std::optional<std::filesystem::path> head_bias;
  double head_temperature = 1.0;
  SetSpec train;
  SetSpec validation;
  std::optional<SetSpec> validation_ood;
  SetSpec test;
  std::vector<SetSpec> ood;
  std::optional<std::filesystem::path> clip_labels;
  std::optional<std::filesystem::path> clip_text;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::vector<std::string> methods;  // empty: every registered method
  std::vector<Variant> variants;     // empty: every supported variant
  HyperParams hyperparameters;
  /// Per-method grids; the "*" entry applies to every method declaring the hyperparameter.
  std::map<std::string, Grid> grids;
  EngineOptions engine;
  RankingOptions ranking;
  std::vector<std::string> rank_metrics{"augrc"};
  double mmd_c = 1.0;
  int mmd_degree = 3;
  BucketOptions buckets;
  /// "source/ood_set" or "ood_set" -> bucket.
  std::map<std::string, Bucket> bucket_overrides;
  std::vector<SourceSpec> sources;
  std::filesystem::path base_dir;
};

/// Parses the JSON document; throws InvalidConfig with the offending key. `seed`, when given,
/// replaces the document's seed before any derived seed is computed.
ExperimentConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir = {},
                              std::optional<std::uint64_t> seed = std::nullopt);
ExperimentConfig load_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed = std::nullopt);

/// Data for one source after ingest.
struct SourceData {
  std::string name;
  std::string paradigm;
  ClassifierHead head;
  FeatureSet train;
  FeatureSet validation;
  std::optional<FeatureSet> validation_ood;
  FeatureSet test;
  std::vector<FeatureSet> ood;
  std::optional<EmbeddingSet> clip_id;
  std::vector<std::optional<EmbeddingSet>> clip_ood;  // aligned with ood
};

SourceData load_source(const SourceSpec& spec, std::uint64_t seed);

struct MetricRow {
  std::string source;
  std::string paradigm;
  std::string ood_set;  // "id" for the misclassification block
  std::string bucket;   // "id", near/mid/far, or "unassigned"
  Protocol protocol = Protocol::OODDetection;
  std::string method;
  std::string variant;
  std::string metric;
  double value = 0.0;
  Index n_id = 0;
  Index n_ood = 0;
};

struct TuneRecord {
  std::string source;
  std::string method;
  std::string variant;
  std::map<std::string, double> params;
  double objective = 0.0;
  std::size_t trials = 0;
  std::string protocol;
};

struct ProximityRecord {
  std::string source;
  std::string ood_set;
  std::optional<ProximityVector> vector;
  std::string bucket;
  bool overridden = false;
};

struct RegimeReport {
  std::string name;
  std::vector<std::string> block_keys;
  std::optional<CliqueReport> report;
  std::vector<std::string> warnings;
};

struct PipelineReport {
  std::vector<TuneRecord> tuning;
  std::vector<MetricRow> metrics;
  std::vector<ProximityRecord> proximity;
  std::vector<RegimeReport> regimes;
  std::vector<std::string> warnings;
};

struct PipelineStages {
  bool tune = true;
  bool metrics = true;
  bool proximity = true;
  bool rank = true;
};

PipelineReport run_pipeline(const ExperimentConfig& config, const PipelineStages& stages = {});

/// Regimes "id", "near", "mid", "far" and "ood" built from the metric rows. Methods missing
/// from any block of a regime are dropped from that regime with a warning.
std::vector<RegimeReport> rank_regimes(const std::vector<MetricRow>& rows, const std::vector<std::string>& metrics,
                                       const RankingOptions& options);

/// Long-format metric table; the reader accepts what the writer emits.
std::string metrics_csv(const std::vector<MetricRow>& rows);
std::vector<MetricRow> parse_metrics_csv(const std::string& text);

/// Writes every report present in `report` under `out_dir` plus manifest.json.
void write_reports(const PipelineReport& report, const ExperimentConfig& config, const std::filesystem::path& out_dir);

/// Shortest round-trip decimal form; "nan" / "inf" / "-inf" for non-finite values.
std::string format_double(double x);

/// Bundled synthetic fixture as FMX files plus config.json that references them.
std::filesystem::path write_fixture(const std::filesystem::path& dir, std::uint64_t seed = 7);

/// The options behind the bundled fixture (smaller than the default benchmark).
SyntheticOptions fixture_options(std::uint64_t seed);

}  // namespace oodlab

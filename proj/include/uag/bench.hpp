#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uag/kg.hpp"
#include "uag/pipeline.hpp"
#include "uag/riskctl.hpp"
#include "uag/sample.hpp"

namespace uag {

// Knobs for the synthetic QA benchmark. hop_distribution maps hop count
// (1..4) to a nonnegative weight with positive total mass.
struct SyntheticSpec {
  std::size_t num_entities = 600;
  std::size_t num_relations = 24;
  std::size_t num_samples = 200;
  std::map<int, double> hop_distribution = {{1, 0.5}, {2, 0.5}};
  double distractor_edge_factor = 3.0;
  std::size_t vocabulary_size = 60;
  std::uint64_t seed = 7;
};

struct SyntheticDataset {
  KnowledgeGraph graph;
  std::vector<QASample> samples;
};

// Plants one gold relation chain per sample (topic -> ... -> 1..3 answers via
// a shared final relation), phrases the question from a fixed template set
// embedding the topic label and the chain's relation labels, then adds
// round(distractor_edge_factor * planted_edges) random edges drawn off the
// planted relation pool where possible. Fully determined by spec.seed.
SyntheticDataset generate_synthetic(const SyntheticSpec& spec);

// JSONL, one object per line: {"id", "question", "topic_entities", "answers"}.
// Malformed lines, empty topic_entities, or empty answers raise ParseError
// with the line number.
std::vector<QASample> load_samples(const std::filesystem::path& path);
void save_samples(std::span<const QASample> samples, const std::filesystem::path& path);

struct SplitSet {
  std::vector<QASample> quantile, ltt, validation, test;
};

// Seeded shuffle, then sizes by floor(fraction * n) with the remainder going
// to the largest fractional parts (ties -> earlier slice). Fractions must be
// positive and sum to 1 within 1e-9; any empty slice -> ContractError.
SplitSet split(std::span<const QASample> samples, const std::array<double, 4>& fractions,
               std::uint64_t seed);

// Fraction of rows whose prediction set intersects the gold set.
double ecr(std::span<const std::vector<std::string>> predictions,
           std::span<const std::vector<std::string>> gold);

// Mean prediction-set size.
double apss(std::span<const std::vector<std::string>> predictions);

// Non-conformal baseline: candidates from vacuous-threshold retrieval ranked
// by nonconformity(label, question) ascending, first k kept (stable ties).
std::vector<std::string> topk_baseline(Pipeline& pipeline, const QASample& sample, std::size_t k);

struct MetricsRow {
  double alpha = 0.0;
  std::string method;
  std::optional<double> ecr;
  std::optional<double> apss;
  std::size_t n_test = 0;
  std::size_t truncation_count = 0;
};

// One row per (alpha, method). Absent metrics (no valid configuration)
// serialize as "-". to_csv is the wide report; to_long_csv is
// (alpha, method, metric, value) for plotting.
struct MetricsReport {
  std::vector<MetricsRow> rows;
  std::string to_csv() const;
  std::string to_long_csv() const;
};

struct SweepOptions {
  std::vector<double> alphas;
  double delta = 0.05;
  FwerMethod fwer = FwerMethod::bonferroni;
  LambdaGrid grid;
  std::vector<std::size_t> topk = {1, 3};
  std::size_t workers = 1;
};

// Runs control() per alpha over the same splits and pipeline (calibration and
// retrieval caches shared), evaluates the selected lambda and the top-k
// baselines on the test split. Returns the report plus each alpha's
// controller result, in alphas order.
std::pair<MetricsReport, std::vector<RiskControlResult>> sweep(Pipeline& pipeline,
                                                               const SplitSet& splits,
                                                               const SweepOptions& options);

// Test-split evaluation of one already-calibrated configuration (quantiles
// from a controller artifact) against the top-k baselines.
MetricsReport evaluate_report(Pipeline& pipeline, const RiskControlResult& artifact,
                              std::span<const QASample> test, std::span<const std::size_t> topk,
                              std::size_t workers = 1);

}  // namespace uag

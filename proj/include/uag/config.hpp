#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "uag/bench.hpp"
#include "uag/evaluator.hpp"
#include "uag/http_clients.hpp"
#include "uag/riskctl.hpp"
#include "uag/scoring.hpp"

namespace uag {

// Resolved run settings. Precedence: built-in defaults < config file < UAG_*
// environment variables < command-line flags (the CLI applies the last two).
struct RunConfig {
  // data and artifacts
  std::string graph_path;
  std::string samples_path;
  std::string artifact_path;  // controller output (calibrate) / input (predict, evaluate)
  std::string out_path;       // report destination; empty -> stdout

  // risk control
  double alpha = 0.2;
  std::vector<double> alphas = {0.2, 0.4, 0.6};  // sweep
  double delta = 0.05;
  double grid_h1 = 0.3, grid_h2 = 0.3, grid_h3 = 0.1;
  FwerMethod fwer = FwerMethod::bonferroni;
  // dataset fractions: quantile, ltt, validation, test
  std::array<double, 4> split_fractions = {0.3, 0.3, 0.15, 0.25};

  // scoring
  std::string provider = "builtin";  // "builtin" or "http:<endpoint>"
  std::size_t embed_dim = 4096;
  std::uint64_t embed_seed = 17;
  SimilarityKind similarity = SimilarityKind::cosine;

  // generation
  std::string generator = "mock";  // "mock" or "http:<endpoint>"
  bool fail_open = false;

  // traversal
  int max_hops = 2;
  std::size_t frontier_budget = kDefaultFrontierBudget;

  // execution
  std::uint64_t seed = 7;
  std::size_t workers = 1;
  std::vector<std::size_t> topk = {1, 3};
  HttpOptions http;

  // synthetic generation
  SyntheticSpec synthetic;

  // Merges keys from a JSON config file; unknown keys raise ContractError so
  // typos fail loudly. Missing file raises IoError.
  void apply_file(const std::filesystem::path& path);
  void apply_json_text(std::string_view text, std::string_view origin);

  // Full resolved state, every key present, for the config echo.
  std::string to_json_string() const;

  PipelineOptions pipeline_options() const;
  SweepOptions sweep_options() const;
  void validate() const;
};

// "builtin" -> HashedBowProvider(embed_dim, embed_seed);
// "http:<endpoint>" -> HttpEmbeddingProvider. Anything else -> ContractError.
std::shared_ptr<const EmbeddingProvider> make_provider(const RunConfig& config);

// "mock" -> MockGenerator; "http:<endpoint>" -> HttpGenerator.
std::shared_ptr<Generator> make_generator(const RunConfig& config);

}  // namespace uag

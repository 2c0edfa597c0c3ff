#pragma once

#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "uag/conformal.hpp"
#include "uag/kg.hpp"
#include "uag/retriever.hpp"
#include "uag/sample.hpp"
#include "uag/scoring.hpp"

namespace uag {

// "Based on the following reasoning paths: P. Q?" where P renders each path
// as "e0 -> r1 -> e1 -> ..." joined by "; ", or "(none)" when empty. Q is the
// question with any trailing '?' stripped, '?' re-appended.
std::string build_prompt(const KnowledgeGraph& graph, std::span<const RelationPath> paths,
                         std::string_view question);

// Deterministic stand-in for an LLM: the deduplicated terminal entity labels
// of the paths, first-appearance order, joined by ", ". No paths -> "".
std::string mock_generate(const KnowledgeGraph& graph, std::span<const RelationPath> paths,
                          std::string_view question);

struct GenerationContext {
  const KnowledgeGraph& graph;
  std::string_view prompt;
  std::span<const RelationPath> paths;
  std::string_view question;
};

// Text generator. The mock consumes (paths, question); HTTP generators
// consume the prompt. Must be deterministic per prompt within a run so
// repeated prompts may be served from cache.
class Generator {
 public:
  virtual ~Generator() = default;
  virtual std::string generate(const GenerationContext& ctx) = 0;
  virtual std::string identity() const = 0;
};

class MockGenerator : public Generator {
 public:
  std::string generate(const GenerationContext& ctx) override;
  std::string identity() const override { return "mock"; }
};

// Prompt-keyed memo in front of another generator. Thread-safe.
class CachingGenerator : public Generator {
 public:
  explicit CachingGenerator(std::shared_ptr<Generator> inner) : inner_(std::move(inner)) {}
  std::string generate(const GenerationContext& ctx) override;
  std::string identity() const override { return inner_->identity(); }
  std::size_t cache_size() const;

 private:
  std::shared_ptr<Generator> inner_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, std::string> cache_;
};

// Calibration scores for the answer filter: one generation per sample over
// its given reasoning paths (from vacuous-threshold retrieval), then one
// score per gold answer against the generated text. sample_paths runs
// parallel to samples. Zero samples -> CalibrationError.
struct EvaluatorCalibration {
  std::vector<double> answer_scores;
  std::size_t used_samples = 0;
};

EvaluatorCalibration calibrate_evaluator(const KnowledgeGraph& graph,
                                         std::span<const QASample> samples,
                                         std::span<const std::vector<RelationPath>> sample_paths,
                                         Generator& generator, Scorer& scorer);

struct EvaluationOutcome {
  std::vector<EntityId> answers;  // candidate insertion order
  bool degraded = false;          // generator failed and fail_open kept all candidates
};

// Generates once over the candidate paths, then keeps candidates whose label
// scores within q3 of the generated text. On GeneratorError: fail_open keeps
// the full candidate set (degraded = true), otherwise the error propagates.
EvaluationOutcome evaluate(const KnowledgeGraph& graph, const CandidateSet& candidates,
                           std::string_view question, const ConformalQuantile& q3,
                           Generator& generator, Scorer& scorer, bool fail_open = false);

}  // namespace uag

#pragma once

#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "uag/evaluator.hpp"
#include "uag/kg.hpp"
#include "uag/retriever.hpp"
#include "uag/riskctl.hpp"
#include "uag/sample.hpp"
#include "uag/scoring.hpp"

namespace uag {

struct PipelineOptions {
  int max_hops = 2;
  std::size_t frontier_budget = kDefaultFrontierBudget;
  bool generator_fail_open = false;
};

// Per-question output with supporting evidence, for interactive use.
struct AnswerDetail {
  std::vector<std::string> answers;
  std::vector<std::vector<std::string>> answer_paths;  // rendered, parallel to answers
  std::size_t candidate_count = 0;
  bool truncated = false;
  bool degraded = false;
};

// Retrieval + generation + filtering over one graph, one embedding provider,
// and one generator. Implements RiskPipeline for the controller. Retrieval
// results are memoized per (question, topics, q1, q2) and generations per
// prompt, so sweeping a lambda grid re-traverses only when (a1, a2) changes.
class Pipeline : public RiskPipeline {
 public:
  Pipeline(const KnowledgeGraph& graph, std::shared_ptr<const EmbeddingProvider> provider,
           SimilarityKind kind, std::shared_ptr<Generator> generator, PipelineOptions options);

  // Builds the retriever and evaluator score sets. No-op when called again
  // with an identical split (compared by sample ids).
  void calibrate(std::span<const QASample> quantile_split) override;
  bool calibrated() const { return calibrated_; }

  LambdaQuantiles quantiles_for(const LambdaConfig& lambda) const override;
  SampleOutcome run(const QASample& sample, const LambdaQuantiles& quantiles) override;

  // Answers one question. Unknown topic labels raise LookupError (run()
  // instead drops unknown topics and returns an empty outcome when none
  // remain, so batch loss evaluation never throws on odd samples).
  AnswerDetail answer(std::string_view question, std::span<const std::string> topic_labels,
                      const LambdaQuantiles& quantiles);

  const RetrieverCalibration& retriever_calibration() const;
  const EvaluatorCalibration& evaluator_calibration() const;
  std::size_t evaluator_skipped() const { return evaluator_skipped_; }
  std::size_t calibration_truncations() const { return calibration_truncations_; }

  const KnowledgeGraph& graph() const { return graph_; }
  Scorer& scorer() { return scorer_; }
  const PipelineOptions& options() const { return options_; }
  std::string provider_identity() const { return provider_->identity(); }
  std::string generator_identity() const { return generator_->identity(); }

  void clear_caches();

 private:
  struct Retrieved {
    RetrievalResult result;
    std::vector<EntityId> topics;
  };
  // nullptr when no topic label resolves
  std::shared_ptr<const Retrieved> retrieve_cached(const QASample& sample,
                                                   const ConformalQuantile& q1,
                                                   const ConformalQuantile& q2);

  const KnowledgeGraph& graph_;
  std::shared_ptr<const EmbeddingProvider> provider_;
  std::shared_ptr<CachingGenerator> generator_;
  Scorer scorer_;
  PipelineOptions options_;

  bool calibrated_ = false;
  std::vector<std::string> calibration_fingerprint_;
  RetrieverCalibration retriever_cal_;
  EvaluatorCalibration evaluator_cal_;
  std::size_t evaluator_skipped_ = 0;
  std::size_t calibration_truncations_ = 0;

  mutable std::mutex cache_mu_;
  std::unordered_map<std::string, std::shared_ptr<const Retrieved>> retrieval_cache_;
};

}  // namespace uag

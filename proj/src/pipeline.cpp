#include "uag/pipeline.hpp"

#include <bit>

#include "uag/errors.hpp"

namespace uag {

namespace {

std::vector<EntityId> resolve_topics(const KnowledgeGraph& graph,
                                     std::span<const std::string> labels, bool strict) {
  std::vector<EntityId> topics;
  for (const std::string& label : labels) {
    const auto id = graph.find_entity(label);
    if (!id) {
      if (strict) throw LookupError("unknown entity: " + label);
      continue;
    }
    // duplicate seeds would collect every path twice
    if (std::find(topics.begin(), topics.end(), *id) == topics.end()) topics.push_back(*id);
  }
  return topics;
}

void append_hex_bits(std::string& out, double v) {
  const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(bits));
  out += buf;
}

}  // namespace

Pipeline::Pipeline(const KnowledgeGraph& graph, std::shared_ptr<const EmbeddingProvider> provider,
                   SimilarityKind kind, std::shared_ptr<Generator> generator,
                   PipelineOptions options)
    : graph_(graph),
      provider_(std::move(provider)),
      generator_(std::make_shared<CachingGenerator>(std::move(generator))),
      scorer_(provider_, kind),
      options_(options) {
  if (!graph_.finalized()) throw ContractError("pipeline requires a finalized graph");
  if (options_.max_hops < 1) throw ContractError("max_hops must be >= 1");
  if (options_.frontier_budget == 0) throw ContractError("frontier budget must be positive");
}

void Pipeline::calibrate(std::span<const QASample> quantile_split) {
  if (quantile_split.empty()) throw ContractError("calibration split must be nonempty");
  std::vector<std::string> fingerprint;
  fingerprint.reserve(quantile_split.size());
  for (const QASample& s : quantile_split) fingerprint.push_back(s.id);
  if (calibrated_ && fingerprint == calibration_fingerprint_) return;

  retriever_cal_ = calibrate_retriever(graph_, quantile_split, scorer_, options_.max_hops);

  // answer-score calibration over vacuous-threshold retrieval: every path
  // within max_hops is on the table, one generation per sample
  const LambdaQuantiles vacuous = LambdaQuantiles::vacuous();
  std::vector<QASample> usable;
  std::vector<std::vector<RelationPath>> usable_paths;
  evaluator_skipped_ = 0;
  calibration_truncations_ = 0;
  for (const QASample& sample : quantile_split) {
    const auto retrieved = retrieve_cached(sample, vacuous.q1, vacuous.q2);
    if (!retrieved) {
      ++evaluator_skipped_;
      continue;
    }
    if (retrieved->result.truncated) ++calibration_truncations_;
    usable.push_back(sample);
    usable_paths.push_back(retrieved->result.candidates.paths);
  }
  if (usable.empty()) {
    throw CalibrationError("no calibration sample has a topic entity in the graph");
  }
  evaluator_cal_ = calibrate_evaluator(graph_, usable, usable_paths, *generator_, scorer_);

  calibrated_ = true;
  calibration_fingerprint_ = std::move(fingerprint);
}

LambdaQuantiles Pipeline::quantiles_for(const LambdaConfig& lambda) const {
  if (!calibrated_) throw ContractError("pipeline is not calibrated");
  LambdaQuantiles q;
  q.q1 = conformal_quantile(retriever_cal_.step_scores, lambda.a1);
  q.q2 = conformal_quantile(retriever_cal_.path_scores, lambda.a2);
  q.q3 = conformal_quantile(evaluator_cal_.answer_scores, lambda.a3);
  return q;
}

SampleOutcome Pipeline::run(const QASample& sample, const LambdaQuantiles& quantiles) {
  const auto retrieved = retrieve_cached(sample, quantiles.q1, quantiles.q2);
  if (!retrieved) return SampleOutcome{};  // no topic resolves: empty set, loss 1

  SampleOutcome out;
  out.truncated = retrieved->result.truncated;
  out.candidate_count = retrieved->result.candidates.size();
  const EvaluationOutcome eval =
      evaluate(graph_, retrieved->result.candidates, sample.question, quantiles.q3, *generator_,
               scorer_, options_.generator_fail_open);
  out.degraded = eval.degraded;
  out.answers.reserve(eval.answers.size());
  for (EntityId id : eval.answers) out.answers.push_back(graph_.entity_label(id));
  return out;
}

AnswerDetail Pipeline::answer(std::string_view question,
                              std::span<const std::string> topic_labels,
                              const LambdaQuantiles& quantiles) {
  if (topic_labels.empty()) throw ContractError("at least one topic entity is required");
  const std::vector<EntityId> topics = resolve_topics(graph_, topic_labels, /*strict=*/true);

  const RetrievalResult retrieval =
      retrieve(graph_, question, topics, quantiles.q1, quantiles.q2, options_.max_hops, scorer_,
               options_.frontier_budget);
  const EvaluationOutcome eval = evaluate(graph_, retrieval.candidates, question, quantiles.q3,
                                          *generator_, scorer_, options_.generator_fail_open);

  AnswerDetail detail;
  detail.candidate_count = retrieval.candidates.size();
  detail.truncated = retrieval.truncated;
  detail.degraded = eval.degraded;
  for (EntityId id : eval.answers) {
    detail.answers.push_back(graph_.entity_label(id));
    std::vector<std::string> rendered;
    const auto& entry = retrieval.candidates.entries[retrieval.candidates.index.at(id)];
    rendered.reserve(entry.path_indices.size());
    for (std::size_t pi : entry.path_indices) {
      rendered.push_back(graph_.render_path(retrieval.candidates.paths[pi]));
    }
    detail.answer_paths.push_back(std::move(rendered));
  }
  return detail;
}

const RetrieverCalibration& Pipeline::retriever_calibration() const {
  if (!calibrated_) throw ContractError("pipeline is not calibrated");
  return retriever_cal_;
}

const EvaluatorCalibration& Pipeline::evaluator_calibration() const {
  if (!calibrated_) throw ContractError("pipeline is not calibrated");
  return evaluator_cal_;
}

void Pipeline::clear_caches() {
  std::lock_guard<std::mutex> lock(cache_mu_);
  retrieval_cache_.clear();
}

std::shared_ptr<const Pipeline::Retrieved> Pipeline::retrieve_cached(
    const QASample& sample, const ConformalQuantile& q1, const ConformalQuantile& q2) {
  std::vector<EntityId> topics = resolve_topics(graph_, sample.topic_entities, /*strict=*/false);
  if (topics.empty()) return nullptr;

  std::string key(sample.question);
  key += '\x1f';
  for (EntityId t : topics) {
    key += std::to_string(t);
    key += ',';
  }
  key += '\x1f';
  append_hex_bits(key, q1.value);
  append_hex_bits(key, q2.value);

  {
    std::lock_guard<std::mutex> lock(cache_mu_);
    if (auto it = retrieval_cache_.find(key); it != retrieval_cache_.end()) return it->second;
  }
  auto retrieved = std::make_shared<Retrieved>();
  retrieved->topics = topics;
  retrieved->result = retrieve(graph_, sample.question, topics, q1, q2, options_.max_hops,
                               scorer_, options_.frontier_budget);
  std::lock_guard<std::mutex> lock(cache_mu_);
  return retrieval_cache_.emplace(std::move(key), std::move(retrieved)).first->second;
}

}  // namespace uag

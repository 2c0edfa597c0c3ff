#include "uag/evaluator.hpp"

#include <unordered_set>

#include "uag/errors.hpp"

namespace uag {

namespace {

std::string normalize_question(std::string_view question) {
  std::string q(question);
  while (!q.empty() && q.back() == '?') q.pop_back();
  return q + '?';
}

}  // namespace

std::string build_prompt(const KnowledgeGraph& graph, std::span<const RelationPath> paths,
                         std::string_view question) {
  std::string rendered;
  if (paths.empty()) {
    rendered = "(none)";
  } else {
    for (std::size_t i = 0; i < paths.size(); ++i) {
      if (i > 0) rendered += "; ";
      rendered += graph.render_path(paths[i]);
    }
  }
  return "Based on the following reasoning paths: " + rendered + ". " +
         normalize_question(question);
}

std::string mock_generate(const KnowledgeGraph& graph, std::span<const RelationPath> paths,
                          std::string_view /*question*/) {
  std::string out;
  std::unordered_set<EntityId> seen;
  for (const RelationPath& path : paths) {
    const EntityId terminal = path.terminal();
    if (!seen.insert(terminal).second) continue;
    if (!out.empty()) out += ", ";
    out += graph.entity_label(terminal);
  }
  return out;
}

std::string MockGenerator::generate(const GenerationContext& ctx) {
  return mock_generate(ctx.graph, ctx.paths, ctx.question);
}

std::string CachingGenerator::generate(const GenerationContext& ctx) {
  const std::string key(ctx.prompt);
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  std::string text = inner_->generate(ctx);
  std::lock_guard<std::mutex> lock(mu_);
  return cache_.emplace(key, std::move(text)).first->second;
}

std::size_t CachingGenerator::cache_size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return cache_.size();
}

EvaluatorCalibration calibrate_evaluator(const KnowledgeGraph& graph,
                                         std::span<const QASample> samples,
                                         std::span<const std::vector<RelationPath>> sample_paths,
                                         Generator& generator, Scorer& scorer) {
  if (samples.size() != sample_paths.size()) {
    throw ContractError("samples and sample_paths must be parallel");
  }
  if (samples.empty()) throw CalibrationError("evaluator calibration requires samples");

  EvaluatorCalibration cal;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const QASample& sample = samples[i];
    const std::string prompt = build_prompt(graph, sample_paths[i], sample.question);
    const std::string generated =
        generator.generate(GenerationContext{graph, prompt, sample_paths[i], sample.question});
    for (const std::string& answer : sample.answers) {
      cal.answer_scores.push_back(scorer.score(answer, generated));
    }
    ++cal.used_samples;
  }
  return cal;
}

EvaluationOutcome evaluate(const KnowledgeGraph& graph, const CandidateSet& candidates,
                           std::string_view question, const ConformalQuantile& q3,
                           Generator& generator, Scorer& scorer, bool fail_open) {
  const std::string prompt = build_prompt(graph, candidates.paths, question);
  std::string generated;
  try {
    generated = generator.generate(GenerationContext{graph, prompt, candidates.paths, question});
  } catch (const GeneratorError&) {
    if (!fail_open) throw;
    EvaluationOutcome out;
    out.degraded = true;
    out.answers.reserve(candidates.entries.size());
    for (const auto& entry : candidates.entries) out.answers.push_back(entry.entity);
    return out;
  }

  EvaluationOutcome out;
  for (const auto& entry : candidates.entries) {
    if (admits(q3, scorer.score(graph.entity_label(entry.entity), generated))) {
      out.answers.push_back(entry.entity);
    }
  }
  return out;
}

}  // namespace uag

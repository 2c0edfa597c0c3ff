#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "uag/conformal.hpp"
#include "uag/kg.hpp"
#include "uag/sample.hpp"
#include "uag/scoring.hpp"

namespace uag {

inline constexpr std::size_t kDefaultFrontierBudget = 10000;

// Joins question and path context for scoring: pieces glued with single
// spaces, question first.
std::string join_context(std::string_view question, std::span<const std::string> relation_labels);

// Calibration score sets for the two traversal thresholds. step_scores holds
// one entry per gold-path step (question + relation prefix vs. next
// relation); path_scores one entry per gold path (question vs. full relation
// chain).
struct RetrieverCalibration {
  std::vector<double> step_scores;
  std::vector<double> path_scores;
  std::size_t used_samples = 0;
  std::size_t skipped_samples = 0;
};

// Walks every gold path (each topic x each answer, simple paths within
// max_hops) of each sample. Samples whose topics or answers are absent from
// the graph, or whose answers are unreachable within max_hops, are skipped
// and counted. Zero usable samples -> CalibrationError.
RetrieverCalibration calibrate_retriever(const KnowledgeGraph& graph,
                                         std::span<const QASample> samples, Scorer& scorer,
                                         int max_hops);

// Entities reached by admitted paths, in first-collection order. paths holds
// every admitted path once, in collection order; entries reference them by
// index.
struct CandidateSet {
  struct Entry {
    EntityId entity;
    std::vector<std::size_t> path_indices;
  };
  std::vector<Entry> entries;
  std::vector<RelationPath> paths;
  std::unordered_map<EntityId, std::size_t> index;

  std::size_t size() const { return entries.size(); }
  bool contains(EntityId e) const { return index.count(e) != 0; }
  void add(EntityId entity, RelationPath path);
};

struct RetrievalResult {
  CandidateSet candidates;
  bool truncated = false;    // frontier budget exhausted with work remaining
  std::size_t expansions = 0;  // queue pops consumed
};

// Breadth-first traversal from the topic entities. A frontier path extends
// along edge (r, s) when the step score (question + relation prefix vs. r)
// passes q1; the reached entity joins the candidate set when the path score
// (question vs. full relation chain) passes q2. Both tests require the
// extended path to stay simple and within max_hops. Topics must be nonempty
// and valid ids; budget counts queue pops, and exhausting it with the queue
// nonempty sets truncated.
RetrievalResult retrieve(const KnowledgeGraph& graph, std::string_view question,
                         std::span<const EntityId> topics, const ConformalQuantile& q1,
                         const ConformalQuantile& q2, int max_hops, Scorer& scorer,
                         std::size_t frontier_budget = kDefaultFrontierBudget);

}  // namespace uag

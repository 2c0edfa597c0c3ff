#include "uag/retriever.hpp"

#include <deque>

#include "uag/errors.hpp"

namespace uag {

std::string join_context(std::string_view question,
                         std::span<const std::string> relation_labels) {
  std::string out(question);
  for (const auto& label : relation_labels) {
    out += ' ';
    out += label;
  }
  return out;
}

RetrieverCalibration calibrate_retriever(const KnowledgeGraph& graph,
                                         std::span<const QASample> samples, Scorer& scorer,
                                         int max_hops) {
  if (max_hops < 1) throw ContractError("max_hops must be >= 1");

  RetrieverCalibration cal;
  for (const QASample& sample : samples) {
    std::vector<EntityId> topics, answers;
    for (const auto& t : sample.topic_entities) {
      if (auto id = graph.find_entity(t)) topics.push_back(*id);
    }
    for (const auto& a : sample.answers) {
      if (auto id = graph.find_entity(a)) answers.push_back(*id);
    }
    if (topics.empty() || answers.empty()) {
      ++cal.skipped_samples;
      continue;
    }

    bool contributed = false;
    for (EntityId topic : topics) {
      for (EntityId answer : answers) {
        for (const RelationPath& path : graph.gold_paths(topic, answer, max_hops)) {
          std::vector<std::string> chain;
          chain.reserve(path.steps.size());
          for (const Step& s : path.steps) chain.push_back(graph.relation_label(s.relation));

          // one step score per hop: question plus the relation prefix vs.
          // the relation taken next
          std::string prefix(sample.question);
          std::string full_chain;
          for (std::size_t j = 0; j < chain.size(); ++j) {
            cal.step_scores.push_back(scorer.score(prefix, chain[j]));
            prefix += ' ';
            prefix += chain[j];
            if (j > 0) full_chain += ' ';
            full_chain += chain[j];
          }
          cal.path_scores.push_back(scorer.score(sample.question, full_chain));
          contributed = true;
        }
      }
    }
    if (contributed) {
      ++cal.used_samples;
    } else {
      ++cal.skipped_samples;  // answers unreachable within max_hops
    }
  }
  if (cal.used_samples == 0) {
    throw CalibrationError("no calibration sample yields a usable gold path");
  }
  return cal;
}

void CandidateSet::add(EntityId entity, RelationPath path) {
  const std::size_t path_index = paths.size();
  paths.push_back(std::move(path));
  if (auto it = index.find(entity); it != index.end()) {
    entries[it->second].path_indices.push_back(path_index);
    return;
  }
  index.emplace(entity, entries.size());
  entries.push_back(Entry{entity, {path_index}});
}

RetrievalResult retrieve(const KnowledgeGraph& graph, std::string_view question,
                         std::span<const EntityId> topics, const ConformalQuantile& q1,
                         const ConformalQuantile& q2, int max_hops, Scorer& scorer,
                         std::size_t frontier_budget) {
  if (topics.empty()) throw ContractError("retrieve requires at least one topic entity");
  if (max_hops < 1) throw ContractError("max_hops must be >= 1");
  if (frontier_budget == 0) throw ContractError("frontier budget must be positive");

  struct Item {
    EntityId node;
    EntityId start;
    std::vector<Step> steps;
    std::string chain;  // relation labels so far, space-joined
  };

  std::deque<Item> queue;
  for (EntityId topic : topics) {
    graph.neighbors(topic);  // validates the id on a finalized graph
    queue.push_back(Item{topic, topic, {}, {}});
  }

  RetrievalResult out;
  const std::string question_text(question);
  while (!queue.empty()) {
    if (out.expansions >= frontier_budget) {
      out.truncated = true;
      break;
    }
    ++out.expansions;
    Item item = std::move(queue.front());
    queue.pop_front();

    if (static_cast<int>(item.steps.size()) + 1 > max_hops) continue;

    const std::string prefix_text =
        item.chain.empty() ? question_text : question_text + ' ' + item.chain;
    for (const Step& step : graph.neighbors(item.node)) {
      // extended path must stay simple
      bool seen = step.entity == item.start;
      for (const Step& prev : item.steps) {
        if (prev.entity == step.entity) {
          seen = true;
          break;
        }
      }
      if (seen) continue;

      const std::string& relation = graph.relation_label(step.relation);
      const std::string chain =
          item.chain.empty() ? relation : item.chain + ' ' + relation;

      if (admits(q2, scorer.score(question_text, chain))) {
        RelationPath path{item.start, item.steps};
        path.steps.push_back(step);
        out.candidates.add(step.entity, std::move(path));
      }
      if (admits(q1, scorer.score(prefix_text, relation))) {
        Item next{step.entity, item.start, item.steps, chain};
        next.steps.push_back(step);
        queue.push_back(std::move(next));
      }
    }
  }
  return out;
}

}  // namespace uag

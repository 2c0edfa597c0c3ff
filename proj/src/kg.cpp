#include "uag/kg.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "uag/errors.hpp"

namespace uag {

EntityId KnowledgeGraph::intern_entity(std::string_view label) {
  if (auto it = entity_index_.find(std::string(label)); it != entity_index_.end()) {
    return it->second;
  }
  if (label.empty()) throw ContractError("entity label must be nonempty");
  const EntityId id = static_cast<EntityId>(entity_labels_.size());
  entity_labels_.emplace_back(label);
  entity_index_.emplace(entity_labels_.back(), id);
  adjacency_.emplace_back();
  return id;
}

RelationId KnowledgeGraph::intern_relation(std::string_view label) {
  if (auto it = relation_index_.find(std::string(label)); it != relation_index_.end()) {
    return it->second;
  }
  if (label.empty()) throw ContractError("relation label must be nonempty");
  const RelationId id = static_cast<RelationId>(relation_labels_.size());
  relation_labels_.emplace_back(label);
  relation_index_.emplace(relation_labels_.back(), id);
  return id;
}

void KnowledgeGraph::add_triple(EntityId head, RelationId relation, EntityId tail) {
  if (finalized_) throw ContractError("graph is finalized");
  require_entity(head);
  require_entity(tail);
  if (relation < 0 || static_cast<std::size_t>(relation) >= relation_labels_.size()) {
    throw LookupError("unknown relation id " + std::to_string(relation));
  }
  if (!triple_set_.emplace(TripleKey{head, relation, tail}, true).second) return;
  adjacency_[static_cast<std::size_t>(head)].push_back(Step{relation, tail});
  ++triple_count_;
}

void KnowledgeGraph::add_triple(std::string_view head, std::string_view relation,
                                std::string_view tail) {
  const EntityId h = intern_entity(head);
  const RelationId r = intern_relation(relation);
  const EntityId t = intern_entity(tail);
  add_triple(h, r, t);
}

void KnowledgeGraph::finalize() {
  if (finalized_) return;
  for (auto& edges : adjacency_) {
    std::sort(edges.begin(), edges.end(), [this](const Step& a, const Step& b) {
      const std::string& ra = relation_labels_[static_cast<std::size_t>(a.relation)];
      const std::string& rb = relation_labels_[static_cast<std::size_t>(b.relation)];
      if (ra != rb) return ra < rb;
      return entity_labels_[static_cast<std::size_t>(a.entity)] <
             entity_labels_[static_cast<std::size_t>(b.entity)];
    });
  }
  finalized_ = true;
}

std::optional<EntityId> KnowledgeGraph::find_entity(std::string_view label) const {
  auto it = entity_index_.find(std::string(label));
  if (it == entity_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<RelationId> KnowledgeGraph::find_relation(std::string_view label) const {
  auto it = relation_index_.find(std::string(label));
  if (it == relation_index_.end()) return std::nullopt;
  return it->second;
}

const std::string& KnowledgeGraph::entity_label(EntityId id) const {
  require_entity(id);
  return entity_labels_[static_cast<std::size_t>(id)];
}

const std::string& KnowledgeGraph::relation_label(RelationId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= relation_labels_.size()) {
    throw LookupError("unknown relation id " + std::to_string(id));
  }
  return relation_labels_[static_cast<std::size_t>(id)];
}

std::span<const Step> KnowledgeGraph::neighbors(EntityId v) const {
  require_finalized();
  require_entity(v);
  return adjacency_[static_cast<std::size_t>(v)];
}

bool KnowledgeGraph::has_triple(EntityId head, RelationId relation, EntityId tail) const {
  return triple_set_.count(TripleKey{head, relation, tail}) != 0;
}

std::vector<RelationPath> KnowledgeGraph::gold_paths(EntityId src, EntityId dst,
                                                     int max_hops) const {
  require_finalized();
  require_entity(src);
  require_entity(dst);
  if (max_hops < 0) throw ContractError("max_hops must be nonnegative");

  std::vector<RelationPath> out;
  std::vector<Step> stack;
  std::vector<EntityId> on_path{src};
  auto visits = [&](EntityId e) {
    return std::find(on_path.begin(), on_path.end(), e) != on_path.end();
  };

  auto dfs = [&](auto&& self, EntityId node) -> void {
    if (static_cast<int>(stack.size()) >= max_hops) return;
    for (const Step& step : neighbors(node)) {
      if (visits(step.entity)) continue;
      stack.push_back(step);
      if (step.entity == dst) {
        // nothing past dst can reach dst again on a simple path
        out.push_back(RelationPath{src, stack});
      } else {
        on_path.push_back(step.entity);
        self(self, step.entity);
        on_path.pop_back();
      }
      stack.pop_back();
    }
  };
  dfs(dfs, src);

  // DFS emission over (relation, entity)-sorted edges is not lexicographic
  // across different path lengths; pin the contract order explicitly.
  auto label_key = [this](const RelationPath& p) {
    std::pair<std::vector<std::string_view>, std::vector<std::string_view>> key;
    for (const Step& s : p.steps) {
      key.first.emplace_back(relation_labels_[static_cast<std::size_t>(s.relation)]);
      key.second.emplace_back(entity_labels_[static_cast<std::size_t>(s.entity)]);
    }
    return key;
  };
  std::stable_sort(out.begin(), out.end(), [&](const RelationPath& a, const RelationPath& b) {
    return label_key(a) < label_key(b);
  });
  return out;
}

std::string KnowledgeGraph::render_path(const RelationPath& path) const {
  std::string out = entity_label(path.start);
  for (const Step& step : path.steps) {
    out += " → ";
    out += relation_label(step.relation);
    out += " → ";
    out += entity_label(step.entity);
  }
  return out;
}

void KnowledgeGraph::require_finalized() const {
  if (!finalized_) throw ContractError("graph is not finalized");
}

void KnowledgeGraph::require_entity(EntityId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= entity_labels_.size()) {
    throw LookupError("unknown entity id " + std::to_string(id));
  }
}

KnowledgeGraph load_graph(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open graph file: " + path.string());

  KnowledgeGraph graph;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::size_t t1 = line.find('\t');
    const std::size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t2 == std::string::npos || line.find('\t', t2 + 1) != std::string::npos) {
      throw ParseError(path.string(), line_no, "expected head<TAB>relation<TAB>tail");
    }
    const std::string head = line.substr(0, t1);
    const std::string relation = line.substr(t1 + 1, t2 - t1 - 1);
    const std::string tail = line.substr(t2 + 1);
    if (head.empty() || relation.empty() || tail.empty()) {
      throw ParseError(path.string(), line_no, "empty field");
    }
    graph.add_triple(head, relation, tail);
  }
  if (graph.triple_count() == 0) {
    throw ParseError(path.string(), 0, "graph file contains no triples");
  }
  graph.finalize();
  return graph;
}

void save_graph(const KnowledgeGraph& graph, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write graph file: " + path.string());
  for (std::size_t h = 0; h < graph.entity_count(); ++h) {
    const EntityId head = static_cast<EntityId>(h);
    for (const Step& step : graph.neighbors(head)) {
      out << graph.entity_label(head) << '\t' << graph.relation_label(step.relation) << '\t'
          << graph.entity_label(step.entity) << '\n';
    }
  }
  if (!out.flush()) throw IoError("failed writing graph file: " + path.string());
}

}  // namespace uag

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace uag {

using EntityId = std::int32_t;
using RelationId = std::int32_t;

struct Triple {
  EntityId head;
  RelationId relation;
  EntityId tail;
  friend bool operator==(const Triple&, const Triple&) = default;
};

// One outgoing edge: relation taken, entity reached.
struct Step {
  RelationId relation;
  EntityId entity;
  friend bool operator==(const Step&, const Step&) = default;
};

// Directed path: start entity plus a sequence of (relation, entity) steps.
struct RelationPath {
  EntityId start = -1;
  std::vector<Step> steps;

  std::size_t length() const { return steps.size(); }
  EntityId terminal() const { return steps.empty() ? start : steps.back().entity; }
  friend bool operator==(const RelationPath&, const RelationPath&) = default;
};

// Directed multi-relational graph over interned string labels.
// Build with intern/add_triple, then finalize(); queries require a finalized
// graph. A finalized graph is immutable and safe for concurrent reads.
class KnowledgeGraph {
 public:
  EntityId intern_entity(std::string_view label);
  RelationId intern_relation(std::string_view label);

  // Duplicate triples collapse to one edge. Must precede finalize().
  void add_triple(EntityId head, RelationId relation, EntityId tail);
  void add_triple(std::string_view head, std::string_view relation, std::string_view tail);

  // Sorts every adjacency list by (relation label, neighbor label).
  void finalize();
  bool finalized() const { return finalized_; }

  std::optional<EntityId> find_entity(std::string_view label) const;
  std::optional<RelationId> find_relation(std::string_view label) const;
  const std::string& entity_label(EntityId id) const;
  const std::string& relation_label(RelationId id) const;

  std::size_t entity_count() const { return entity_labels_.size(); }
  std::size_t relation_count() const { return relation_labels_.size(); }
  std::size_t triple_count() const { return triple_count_; }

  // Outgoing edges of v in (relation label, neighbor label) order.
  std::span<const Step> neighbors(EntityId v) const;

  bool has_triple(EntityId head, RelationId relation, EntityId tail) const;

  // All simple directed paths src -> dst with 1..max_hops steps, sorted by
  // relation-label sequence (ties by entity-label sequence). src == dst
  // yields the empty list: zero-length paths are excluded by definition and
  // any longer return trip would revisit src.
  std::vector<RelationPath> gold_paths(EntityId src, EntityId dst, int max_hops) const;

  // "e0 -> r1 -> e1 -> ..." with unicode arrows, used in prompts and traces.
  std::string render_path(const RelationPath& path) const;

 private:
  void require_finalized() const;
  void require_entity(EntityId id) const;

  std::vector<std::string> entity_labels_;
  std::vector<std::string> relation_labels_;
  std::unordered_map<std::string, EntityId> entity_index_;
  std::unordered_map<std::string, RelationId> relation_index_;
  std::vector<std::vector<Step>> adjacency_;
  struct TripleKey {
    EntityId head;
    RelationId relation;
    EntityId tail;
    friend bool operator==(const TripleKey&, const TripleKey&) = default;
  };
  struct TripleKeyHash {
    std::size_t operator()(const TripleKey& k) const {
      std::uint64_t h = static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.head));
      h = h * 0x9E3779B97F4A7C15ULL + static_cast<std::uint32_t>(k.relation);
      h = h * 0x9E3779B97F4A7C15ULL + static_cast<std::uint32_t>(k.tail);
      h ^= h >> 29;
      return static_cast<std::size_t>(h);
    }
  };
  std::unordered_map<TripleKey, bool, TripleKeyHash> triple_set_;
  std::size_t triple_count_ = 0;
  bool finalized_ = false;
};

// Reads tab-separated "head\trelation\ttail" lines. Blank lines and lines
// starting with '#' are skipped. Malformed lines raise ParseError with the
// line number; an empty graph raises ParseError on line 0.
KnowledgeGraph load_graph(const std::filesystem::path& path);

// Writes the graph in load_graph's format, heads in interning order.
// Entities with no incident edge are not representable and are dropped.
void save_graph(const KnowledgeGraph& graph, const std::filesystem::path& path);

}  // namespace uag

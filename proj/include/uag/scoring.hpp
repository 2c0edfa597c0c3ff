#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace uag {

enum class SimilarityKind { cosine, l1 };

std::string_view to_string(SimilarityKind kind);
SimilarityKind similarity_from_string(std::string_view name);

// Fixed-dimension real vector stored sparse: (index, value) pairs sorted by
// index, zeros omitted. dense() materializes the full vector.
struct Embedding {
  std::size_t dim = 0;
  std::vector<std::pair<std::uint32_t, double>> entries;

  bool zero() const { return entries.empty(); }
  double norm() const;
  double at(std::size_t index) const;
  std::vector<double> dense() const;

  static Embedding from_dense(std::span<const double> values);
};

// Hashed bag of words: lowercase, split on non-alphanumeric runs (bytes
// >= 0x80 count as word bytes so UTF-8 words survive), bucket tokens by a
// seeded stable hash mod dim, count, L2-normalize. Empty text -> zero vector.
// dim must be >= 8.
Embedding hashed_bow_embed(std::string_view text, std::size_t dim, std::uint64_t seed);

// Distance between embeddings of equal dimension:
//   cosine -> 1 - cos(a, b), clamped to [0, 2]; any zero operand scores 2
//   l1     -> sum |a_i - b_i|
double nonconformity(const Embedding& a, const Embedding& b, SimilarityKind kind);

// Source of embeddings. embed() must be deterministic per (identity, text) so
// results can be cached; implementations must be safe for concurrent calls.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual Embedding embed(std::string_view text) const = 0;
  virtual std::vector<Embedding> embed_batch(std::span<const std::string> texts) const;
  // Stable cache-key component, e.g. "hashed-bow:dim=4096:seed=17".
  virtual std::string identity() const = 0;
};

class HashedBowProvider : public EmbeddingProvider {
 public:
  HashedBowProvider(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {}
  Embedding embed(std::string_view text) const override;
  std::string identity() const override;
  std::size_t dim() const { return dim_; }

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

// nonconformity(embed(a), embed(b)); symmetric in a and b for both kinds.
double score_pair(const EmbeddingProvider& provider, std::string_view a, std::string_view b,
                  SimilarityKind kind);

// Provider front end with the in-process embedding cache, keyed by
// (provider identity, text). Cached entries are never evicted and element
// references stay valid for the Scorer's lifetime. Thread-safe.
class Scorer {
 public:
  Scorer(std::shared_ptr<const EmbeddingProvider> provider, SimilarityKind kind);

  const Embedding& embedding(std::string_view text);
  double score(std::string_view a, std::string_view b);

  SimilarityKind kind() const { return kind_; }
  const EmbeddingProvider& provider() const { return *provider_; }
  std::size_t cache_size() const;

 private:
  std::shared_ptr<const EmbeddingProvider> provider_;
  SimilarityKind kind_;
  mutable std::mutex mu_;
  // node-based map: rehash does not move elements
  std::unordered_map<std::string, Embedding> cache_;
};

}  // namespace uag

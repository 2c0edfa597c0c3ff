#include "uag/scoring.hpp"

#include <algorithm>
#include <cmath>

#include "uag/errors.hpp"
#include "uag/rng.hpp"

namespace uag {

std::string_view to_string(SimilarityKind kind) {
  return kind == SimilarityKind::cosine ? "cosine" : "l1";
}

SimilarityKind similarity_from_string(std::string_view name) {
  if (name == "cosine") return SimilarityKind::cosine;
  if (name == "l1") return SimilarityKind::l1;
  throw ContractError("unknown similarity kind: " + std::string(name));
}

double Embedding::norm() const {
  double acc = 0.0;
  for (const auto& [idx, v] : entries) acc += v * v;
  return std::sqrt(acc);
}

double Embedding::at(std::size_t index) const {
  if (index >= dim) throw ContractError("embedding index out of range");
  auto it = std::lower_bound(entries.begin(), entries.end(), index,
                             [](const auto& e, std::size_t i) { return e.first < i; });
  if (it != entries.end() && it->first == index) return it->second;
  return 0.0;
}

std::vector<double> Embedding::dense() const {
  std::vector<double> out(dim, 0.0);
  for (const auto& [idx, v] : entries) out[idx] = v;
  return out;
}

Embedding Embedding::from_dense(std::span<const double> values) {
  Embedding e;
  e.dim = values.size();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] != 0.0) e.entries.emplace_back(static_cast<std::uint32_t>(i), values[i]);
  }
  return e;
}

namespace {

bool is_word_byte(unsigned char c) {
  // bytes >= 0x80 keep UTF-8 sequences inside one token
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

unsigned char lower_ascii(unsigned char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<unsigned char>(c - 'A' + 'a') : c;
}

}  // namespace

Embedding hashed_bow_embed(std::string_view text, std::size_t dim, std::uint64_t seed) {
  if (dim < 8) throw ContractError("embedding dim must be >= 8");

  std::vector<std::pair<std::uint32_t, double>> counts;
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    const std::uint32_t bucket = static_cast<std::uint32_t>(stable_hash64(token, seed) % dim);
    counts.emplace_back(bucket, 1.0);
    token.clear();
  };
  for (unsigned char c : text) {
    if (is_word_byte(c)) {
      token.push_back(static_cast<char>(lower_ascii(c)));
    } else {
      flush();
    }
  }
  flush();

  Embedding e;
  e.dim = dim;
  if (counts.empty()) return e;

  std::sort(counts.begin(), counts.end());
  double norm_sq = 0.0;
  for (std::size_t i = 0; i < counts.size();) {
    std::size_t j = i;
    double total = 0.0;
    while (j < counts.size() && counts[j].first == counts[i].first) {
      total += counts[j].second;
      ++j;
    }
    e.entries.emplace_back(counts[i].first, total);
    norm_sq += total * total;
    i = j;
  }
  const double norm = std::sqrt(norm_sq);
  for (auto& [idx, v] : e.entries) v /= norm;
  return e;
}

double nonconformity(const Embedding& a, const Embedding& b, SimilarityKind kind) {
  if (a.dim != b.dim) throw ContractError("embedding dimension mismatch");
  if (kind == SimilarityKind::cosine) {
    if (a.zero() || b.zero()) return 2.0;
    double dot = 0.0;
    auto ia = a.entries.begin();
    auto ib = b.entries.begin();
    while (ia != a.entries.end() && ib != b.entries.end()) {
      if (ia->first < ib->first) {
        ++ia;
      } else if (ib->first < ia->first) {
        ++ib;
      } else {
        dot += ia->second * ib->second;
        ++ia;
        ++ib;
      }
    }
    const double denom = a.norm() * b.norm();
    const double score = 1.0 - dot / denom;
    return std::clamp(score, 0.0, 2.0);
  }
  // l1: merge walk over the union of support
  double total = 0.0;
  auto ia = a.entries.begin();
  auto ib = b.entries.begin();
  while (ia != a.entries.end() || ib != b.entries.end()) {
    if (ib == b.entries.end() || (ia != a.entries.end() && ia->first < ib->first)) {
      total += std::abs(ia->second);
      ++ia;
    } else if (ia == a.entries.end() || ib->first < ia->first) {
      total += std::abs(ib->second);
      ++ib;
    } else {
      total += std::abs(ia->second - ib->second);
      ++ia;
      ++ib;
    }
  }
  return total;
}

std::vector<Embedding> EmbeddingProvider::embed_batch(std::span<const std::string> texts) const {
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed(t));
  return out;
}

Embedding HashedBowProvider::embed(std::string_view text) const {
  return hashed_bow_embed(text, dim_, seed_);
}

std::string HashedBowProvider::identity() const {
  return "hashed-bow:dim=" + std::to_string(dim_) + ":seed=" + std::to_string(seed_);
}

double score_pair(const EmbeddingProvider& provider, std::string_view a, std::string_view b,
                  SimilarityKind kind) {
  return nonconformity(provider.embed(a), provider.embed(b), kind);
}

Scorer::Scorer(std::shared_ptr<const EmbeddingProvider> provider, SimilarityKind kind)
    : provider_(std::move(provider)), kind_(kind) {
  if (!provider_) throw ContractError("scorer requires a provider");
}

const Embedding& Scorer::embedding(std::string_view text) {
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (auto it = cache_.find(std::string(text)); it != cache_.end()) return it->second;
  }
  Embedding e = provider_->embed(text);
  std::lock_guard<std::mutex> lock(mu_);
  auto [it, inserted] = cache_.emplace(std::string(text), std::move(e));
  return it->second;
}

double Scorer::score(std::string_view a, std::string_view b) {
  const Embedding& ea = embedding(a);
  const Embedding& eb = embedding(b);
  return nonconformity(ea, eb, kind_);
}

std::size_t Scorer::cache_size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return cache_.size();
}

}  // namespace uag

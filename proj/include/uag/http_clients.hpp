#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "uag/evaluator.hpp"
#include "uag/scoring.hpp"

namespace uag {

struct HttpOptions {
  int timeout_ms = 10000;
  int retries = 2;            // additional attempts after the first
  int max_in_flight = 4;      // generator concurrency bound
  int max_new_tokens = 10;
};

// POST {base_url}/embed {"texts": [...]} -> {"embeddings": [[...], ...]}.
// Connection failures and 5xx are retried; 4xx and malformed payloads fail
// immediately. All failures surface as ProviderError.
class HttpEmbeddingProvider : public EmbeddingProvider {
 public:
  HttpEmbeddingProvider(std::string base_url, HttpOptions options = {});
  ~HttpEmbeddingProvider() override;

  Embedding embed(std::string_view text) const override;
  std::vector<Embedding> embed_batch(std::span<const std::string> texts) const override;
  std::string identity() const override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// POST {base_url}/generate {"prompt": ..., "max_new_tokens": N} -> {"text": ...}.
// Same retry policy; failures surface as GeneratorError. Concurrent calls are
// bounded by options.max_in_flight.
class HttpGenerator : public Generator {
 public:
  HttpGenerator(std::string base_url, HttpOptions options = {});
  ~HttpGenerator() override;

  std::string generate(const GenerationContext& ctx) override;
  std::string identity() const override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace uag

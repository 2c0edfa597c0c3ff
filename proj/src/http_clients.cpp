#include "uag/http_clients.hpp"

#include <semaphore>

#include <httplib.h>
#include <json.hpp>

#include "uag/errors.hpp"

namespace uag {

namespace {

std::string normalize_base_url(std::string url) {
  if (url.rfind("http://", 0) != 0 && url.rfind("https://", 0) != 0) {
    url = "http://" + url;
  }
  while (!url.empty() && url.back() == '/') url.pop_back();
  return url;
}

// POST with bounded retries: connection failures and 5xx retry, 4xx and
// malformed bodies fail immediately. E is the error type to surface.
template <typename E>
nlohmann::json post_json(const std::string& base_url, const std::string& path,
                         const nlohmann::json& body, const HttpOptions& options) {
  std::string last_failure = "no attempt made";
  for (int attempt = 0; attempt <= options.retries; ++attempt) {
    httplib::Client client(base_url);
    const time_t secs = options.timeout_ms / 1000;
    const time_t usecs = (options.timeout_ms % 1000) * 1000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);

    auto res = client.Post(path, body.dump(), "application/json");
    if (!res) {
      last_failure = path + ": " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_failure = path + ": server returned " + std::to_string(res->status);
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      throw E(path + ": unexpected status " + std::to_string(res->status));
    }
    nlohmann::json j = nlohmann::json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw E(path + ": response body is not a JSON object");
    }
    return j;
  }
  throw E("request failed after " + std::to_string(options.retries + 1) +
          " attempt(s); last failure: " + last_failure);
}

}  // namespace

struct HttpEmbeddingProvider::Impl {
  std::string base_url;
  HttpOptions options;
};

HttpEmbeddingProvider::HttpEmbeddingProvider(std::string base_url, HttpOptions options)
    : impl_(new Impl{normalize_base_url(std::move(base_url)), options}) {}

HttpEmbeddingProvider::~HttpEmbeddingProvider() = default;

Embedding HttpEmbeddingProvider::embed(std::string_view text) const {
  const std::vector<std::string> texts{std::string(text)};
  return embed_batch(texts).front();
}

std::vector<Embedding> HttpEmbeddingProvider::embed_batch(
    std::span<const std::string> texts) const {
  if (texts.empty()) return {};
  nlohmann::json body;
  body["texts"] = std::vector<std::string>(texts.begin(), texts.end());
  const nlohmann::json response =
      post_json<ProviderError>(impl_->base_url, "/embed", body, impl_->options);

  if (!response.contains("embeddings") || !response["embeddings"].is_array()) {
    throw ProviderError("/embed: response lacks an embeddings array");
  }
  const auto& rows = response["embeddings"];
  if (rows.size() != texts.size()) {
    throw ProviderError("/embed: expected " + std::to_string(texts.size()) +
                        " embeddings, got " + std::to_string(rows.size()));
  }
  std::vector<Embedding> out;
  out.reserve(rows.size());
  std::size_t dim = 0;
  for (const auto& row : rows) {
    if (!row.is_array()) throw ProviderError("/embed: embedding row is not an array");
    std::vector<double> values;
    values.reserve(row.size());
    for (const auto& v : row) {
      if (!v.is_number()) throw ProviderError("/embed: embedding component is not a number");
      values.push_back(v.get<double>());
    }
    if (dim == 0) {
      dim = values.size();
      if (dim == 0) throw ProviderError("/embed: empty embedding row");
    } else if (values.size() != dim) {
      throw ProviderError("/embed: inconsistent embedding dimensions");
    }
    out.push_back(Embedding::from_dense(values));
  }
  return out;
}

std::string HttpEmbeddingProvider::identity() const { return "http-embed:" + impl_->base_url; }

struct HttpGenerator::Impl {
  std::string base_url;
  HttpOptions options;
  std::counting_semaphore<> in_flight;

  Impl(std::string url, HttpOptions opts)
      : base_url(std::move(url)),
        options(opts),
        in_flight(opts.max_in_flight > 0 ? opts.max_in_flight : 1) {}
};

HttpGenerator::HttpGenerator(std::string base_url, HttpOptions options)
    : impl_(new Impl(normalize_base_url(std::move(base_url)), options)) {}

HttpGenerator::~HttpGenerator() = default;

std::string HttpGenerator::generate(const GenerationContext& ctx) {
  nlohmann::json body;
  body["prompt"] = std::string(ctx.prompt);
  body["max_new_tokens"] = impl_->options.max_new_tokens;

  impl_->in_flight.acquire();
  struct Release {
    std::counting_semaphore<>& sem;
    ~Release() { sem.release(); }
  } release{impl_->in_flight};

  const nlohmann::json response =
      post_json<GeneratorError>(impl_->base_url, "/generate", body, impl_->options);
  if (!response.contains("text") || !response["text"].is_string()) {
    throw GeneratorError("/generate: response lacks a text field");
  }
  return response["text"].get<std::string>();
}

std::string HttpGenerator::identity() const { return "http-generate:" + impl_->base_url; }

}  // namespace uag

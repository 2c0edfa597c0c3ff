#include "uag/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "uag/errors.hpp"

namespace uag {

namespace {

using nlohmann::json;

[[noreturn]] void bad_key(std::string_view origin, std::string_view key, std::string_view why) {
  throw ContractError(std::string(origin) + ": config key '" + std::string(key) + "' " +
                      std::string(why));
}

double as_number(const json& v, std::string_view origin, std::string_view key) {
  if (!v.is_number()) bad_key(origin, key, "must be a number");
  return v.get<double>();
}

std::size_t as_size(const json& v, std::string_view origin, std::string_view key) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    bad_key(origin, key, "must be a nonnegative integer");
  }
  return v.get<std::size_t>();
}

std::string as_string(const json& v, std::string_view origin, std::string_view key) {
  if (!v.is_string()) bad_key(origin, key, "must be a string");
  return v.get<std::string>();
}

void apply_http(HttpOptions& http, const json& j, std::string_view origin) {
  for (const auto& [key, value] : j.items()) {
    if (key == "timeout_ms") {
      http.timeout_ms = static_cast<int>(as_size(value, origin, key));
    } else if (key == "retries") {
      http.retries = static_cast<int>(as_size(value, origin, key));
    } else if (key == "max_in_flight") {
      http.max_in_flight = static_cast<int>(as_size(value, origin, key));
    } else if (key == "max_new_tokens") {
      http.max_new_tokens = static_cast<int>(as_size(value, origin, key));
    } else {
      bad_key(origin, "http." + key, "is not recognized");
    }
  }
}

void apply_synthetic(SyntheticSpec& spec, const json& j, std::string_view origin) {
  for (const auto& [key, value] : j.items()) {
    if (key == "num_entities") {
      spec.num_entities = as_size(value, origin, key);
    } else if (key == "num_relations") {
      spec.num_relations = as_size(value, origin, key);
    } else if (key == "num_samples") {
      spec.num_samples = as_size(value, origin, key);
    } else if (key == "distractor_edge_factor") {
      spec.distractor_edge_factor = as_number(value, origin, key);
    } else if (key == "vocabulary_size") {
      spec.vocabulary_size = as_size(value, origin, key);
    } else if (key == "seed") {
      spec.seed = static_cast<std::uint64_t>(as_size(value, origin, key));
    } else if (key == "hop_distribution") {
      if (!value.is_object()) bad_key(origin, key, "must map hop count to weight");
      spec.hop_distribution.clear();
      for (const auto& [hop_key, weight] : value.items()) {
        int hops = 0;
        try {
          hops = std::stoi(hop_key);
        } catch (const std::exception&) {
          bad_key(origin, key, "has a non-integer hop count");
        }
        spec.hop_distribution[hops] = as_number(weight, origin, key);
      }
    } else {
      bad_key(origin, "synthetic." + key, "is not recognized");
    }
  }
}

}  // namespace

void RunConfig::apply_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  apply_json_text(buffer.str(), path.string());
}

void RunConfig::apply_json_text(std::string_view text, std::string_view origin) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw ContractError(std::string(origin) + ": config must be a JSON object");
  }
  for (const auto& [key, value] : j.items()) {
    if (key == "graph") {
      graph_path = as_string(value, origin, key);
    } else if (key == "samples") {
      samples_path = as_string(value, origin, key);
    } else if (key == "artifact") {
      artifact_path = as_string(value, origin, key);
    } else if (key == "out") {
      out_path = as_string(value, origin, key);
    } else if (key == "alpha") {
      alpha = as_number(value, origin, key);
    } else if (key == "alphas") {
      if (!value.is_array() || value.empty()) bad_key(origin, key, "must be a nonempty array");
      alphas.clear();
      for (const auto& v : value) alphas.push_back(as_number(v, origin, key));
    } else if (key == "delta") {
      delta = as_number(value, origin, key);
    } else if (key == "grid") {
      if (!value.is_object()) bad_key(origin, key, "must be an object with h1/h2/h3");
      for (const auto& [gk, gv] : value.items()) {
        if (gk == "h1") {
          grid_h1 = as_number(gv, origin, gk);
        } else if (gk == "h2") {
          grid_h2 = as_number(gv, origin, gk);
        } else if (gk == "h3") {
          grid_h3 = as_number(gv, origin, gk);
        } else {
          bad_key(origin, "grid." + gk, "is not recognized");
        }
      }
    } else if (key == "fwer") {
      fwer = fwer_from_string(as_string(value, origin, key));
    } else if (key == "splits") {
      if (!value.is_object()) bad_key(origin, key, "must be an object");
      for (const auto& [sk, sv] : value.items()) {
        if (sk == "quantile") {
          split_fractions[0] = as_number(sv, origin, sk);
        } else if (sk == "ltt") {
          split_fractions[1] = as_number(sv, origin, sk);
        } else if (sk == "validation") {
          split_fractions[2] = as_number(sv, origin, sk);
        } else if (sk == "test") {
          split_fractions[3] = as_number(sv, origin, sk);
        } else {
          bad_key(origin, "splits." + sk, "is not recognized");
        }
      }
    } else if (key == "provider") {
      provider = as_string(value, origin, key);
    } else if (key == "embed_dim") {
      embed_dim = as_size(value, origin, key);
    } else if (key == "embed_seed") {
      embed_seed = static_cast<std::uint64_t>(as_size(value, origin, key));
    } else if (key == "similarity") {
      similarity = similarity_from_string(as_string(value, origin, key));
    } else if (key == "generator") {
      generator = as_string(value, origin, key);
    } else if (key == "fail_open") {
      if (!value.is_boolean()) bad_key(origin, key, "must be a boolean");
      fail_open = value.get<bool>();
    } else if (key == "max_hops") {
      max_hops = static_cast<int>(as_size(value, origin, key));
    } else if (key == "frontier_budget") {
      frontier_budget = as_size(value, origin, key);
    } else if (key == "seed") {
      seed = static_cast<std::uint64_t>(as_size(value, origin, key));
    } else if (key == "workers") {
      workers = as_size(value, origin, key);
    } else if (key == "topk") {
      if (!value.is_array()) bad_key(origin, key, "must be an array");
      topk.clear();
      for (const auto& v : value) topk.push_back(as_size(v, origin, key));
    } else if (key == "http") {
      if (!value.is_object()) bad_key(origin, key, "must be an object");
      apply_http(http, value, origin);
    } else if (key == "synthetic") {
      if (!value.is_object()) bad_key(origin, key, "must be an object");
      apply_synthetic(synthetic, value, origin);
    } else {
      bad_key(origin, key, "is not recognized");
    }
  }
}

std::string RunConfig::to_json_string() const {
  json j;
  j["graph"] = graph_path;
  j["samples"] = samples_path;
  j["artifact"] = artifact_path;
  j["out"] = out_path;
  j["alpha"] = alpha;
  j["alphas"] = alphas;
  j["delta"] = delta;
  j["grid"] = {{"h1", grid_h1}, {"h2", grid_h2}, {"h3", grid_h3}};
  j["fwer"] = std::string(to_string(fwer));
  j["splits"] = {{"quantile", split_fractions[0]},
                 {"ltt", split_fractions[1]},
                 {"validation", split_fractions[2]},
                 {"test", split_fractions[3]}};
  j["provider"] = provider;
  j["embed_dim"] = embed_dim;
  j["embed_seed"] = embed_seed;
  j["similarity"] = std::string(to_string(similarity));
  j["generator"] = generator;
  j["fail_open"] = fail_open;
  j["max_hops"] = max_hops;
  j["frontier_budget"] = frontier_budget;
  j["seed"] = seed;
  j["workers"] = workers;
  j["topk"] = topk;
  j["http"] = {{"timeout_ms", http.timeout_ms},
               {"retries", http.retries},
               {"max_in_flight", http.max_in_flight},
               {"max_new_tokens", http.max_new_tokens}};
  json hops = json::object();
  for (const auto& [h, w] : synthetic.hop_distribution) hops[std::to_string(h)] = w;
  j["synthetic"] = {{"num_entities", synthetic.num_entities},
                    {"num_relations", synthetic.num_relations},
                    {"num_samples", synthetic.num_samples},
                    {"hop_distribution", std::move(hops)},
                    {"distractor_edge_factor", synthetic.distractor_edge_factor},
                    {"vocabulary_size", synthetic.vocabulary_size},
                    {"seed", synthetic.seed}};
  return j.dump();
}

PipelineOptions RunConfig::pipeline_options() const {
  PipelineOptions options;
  options.max_hops = max_hops;
  options.frontier_budget = frontier_budget;
  options.generator_fail_open = fail_open;
  return options;
}

SweepOptions RunConfig::sweep_options() const {
  SweepOptions options;
  options.alphas = alphas;
  options.delta = delta;
  options.fwer = fwer;
  options.grid = lambda_grid(grid_h1, grid_h2, grid_h3);
  options.topk = topk;
  options.workers = std::max<std::size_t>(
      1, workers != 0 ? workers : std::thread::hardware_concurrency());
  return options;
}

void RunConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ContractError("alpha must be in (0, 1)");
  if (!(delta > 0.0 && delta < 1.0)) throw ContractError("delta must be in (0, 1)");
  for (double a : alphas) {
    if (!(a > 0.0 && a < 1.0)) throw ContractError("every sweep alpha must be in (0, 1)");
  }
  if (alphas.empty()) throw ContractError("alphas must be nonempty");
  double total = 0.0;
  for (double f : split_fractions) {
    if (!(f > 0.0)) throw ContractError("split fractions must be positive");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ContractError("split fractions must sum to 1");
  if (max_hops < 1) throw ContractError("max_hops must be >= 1");
  if (frontier_budget == 0) throw ContractError("frontier_budget must be positive");
  if (embed_dim < 8) throw ContractError("embed_dim must be >= 8");
  for (std::size_t k : topk) {
    if (k < 1) throw ContractError("topk entries must be >= 1");
  }
  lambda_grid(grid_h1, grid_h2, grid_h3);  // validates the step sizes
}

namespace {

// "http:<endpoint>" -> endpoint; tolerates a full URL after the prefix
std::string http_endpoint(std::string_view spec) {
  std::string rest(spec.substr(5));
  if (rest.rfind("//", 0) == 0) return "http:" + rest;
  return rest;
}

}  // namespace

std::shared_ptr<const EmbeddingProvider> make_provider(const RunConfig& config) {
  if (config.provider == "builtin") {
    return std::make_shared<HashedBowProvider>(config.embed_dim, config.embed_seed);
  }
  if (config.provider.rfind("http:", 0) == 0) {
    return std::make_shared<HttpEmbeddingProvider>(http_endpoint(config.provider), config.http);
  }
  throw ContractError("provider must be 'builtin' or 'http:<endpoint>', got '" +
                      config.provider + "'");
}

std::shared_ptr<Generator> make_generator(const RunConfig& config) {
  if (config.generator == "mock") return std::make_shared<MockGenerator>();
  if (config.generator.rfind("http:", 0) == 0) {
    return std::make_shared<HttpGenerator>(http_endpoint(config.generator), config.http);
  }
  throw ContractError("generator must be 'mock' or 'http:<endpoint>', got '" + config.generator +
                      "'");
}

}  // namespace uag

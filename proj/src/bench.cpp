#include "uag/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include <json.hpp>

#include "parallel_util.hpp"
#include "uag/errors.hpp"
#include "uag/rng.hpp"

namespace uag {

namespace {

// Relation vocabulary. Must stay disjoint from question-template words and
// the chain joiner "then": shared tokens would shift the score geometry that
// separates gold steps from distractors.
constexpr const char* kWordPool[] = {
    "aurora",  "basalt",  "canyon",  "delta",   "ember",   "fjord",   "glacier", "harbor",
    "island",  "juniper", "kelp",    "lagoon",  "meadow",  "nectar",  "orchid",  "prairie",
    "quartz",  "reef",    "summit",  "tundra",  "valley",  "willow",  "zephyr",  "amber",
    "birch",   "cedar",   "dune",    "elm",     "fern",    "grove",   "hazel",   "iris",
    "jade",    "kestrel", "lotus",   "maple",   "nettle",  "oak",     "pine",    "quince",
    "rowan",   "sage",    "thistle", "umber",   "violet",  "wren",    "yarrow",  "alder",
    "bramble", "clover",  "dahlia",  "echo",    "flint",   "garnet",  "heather", "indigo",
    "jasper",  "krill",   "larch",   "mica",    "nimbus",  "onyx",    "petal",   "quill",
    "ridge",   "slate",   "topaz",   "urchin",  "vapor",   "walnut",  "xenon",   "yew",
    "zinc",    "apricot", "brook",   "cobalt",  "drift",   "eddy",    "frost",   "gorge",
    "hollow",  "inlet",   "jetty",   "knoll",   "ledge",   "marsh",   "notch",   "outcrop",
    "pebble",  "rapids",  "shoal",   "terrace", "upland",  "vernal",  "wharf",   "yonder"};

// All templates carry the same non-placeholder token count so question norms
// depend only on hop count, keeping gold step scores in tight clusters.
constexpr const char* kTemplatePrefix[] = {"Which destinations does ", "What endpoints does ",
                                           "Which results does "};
constexpr const char* kTemplateMiddle[] = {" reach following ", " attain following ",
                                           " obtain following "};

std::string pad_index(std::string_view prefix, std::size_t index, int width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%0*zu", std::string(prefix).c_str(), width, index);
  return std::string(buf);
}

void validate_spec(const SyntheticSpec& spec) {
  if (spec.num_samples == 0) throw ContractError("num_samples must be positive");
  if (spec.num_entities == 0) throw ContractError("num_entities must be positive");
  if (spec.num_relations == 0) throw ContractError("num_relations must be positive");
  if (spec.vocabulary_size < 4) throw ContractError("vocabulary_size must be >= 4");
  if (spec.num_relations * 2 > spec.vocabulary_size) {
    throw ContractError("vocabulary_size must be >= 2 * num_relations");
  }
  if (!(spec.distractor_edge_factor >= 0.0) ||
      !std::isfinite(spec.distractor_edge_factor)) {
    throw ContractError("distractor_edge_factor must be finite and >= 0");
  }
  if (spec.hop_distribution.empty()) throw ContractError("hop_distribution must be nonempty");
  double mass = 0.0;
  for (const auto& [hops, weight] : spec.hop_distribution) {
    if (hops < 1 || hops > 4) throw ContractError("hop counts must be in 1..4");
    if (!(weight >= 0.0)) throw ContractError("hop weights must be nonnegative");
    mass += weight;
  }
  if (!(mass > 0.0)) throw ContractError("hop_distribution must have positive mass");
}

}  // namespace

SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
  validate_spec(spec);
  Rng rng(derive_seed(spec.seed, "synthetic"));

  std::vector<std::string> words;
  for (const char* w : kWordPool) {
    if (words.size() == spec.vocabulary_size) break;
    words.emplace_back(w);
  }
  for (std::size_t i = words.size(); i < spec.vocabulary_size; ++i) {
    words.push_back(pad_index("term", i, 3));
  }
  rng.shuffle(words);

  SyntheticDataset data;
  std::vector<RelationId> relations;
  relations.reserve(spec.num_relations);
  for (std::size_t i = 0; i < spec.num_relations; ++i) {
    relations.push_back(data.graph.intern_relation(words[2 * i] + " " + words[2 * i + 1]));
  }
  // planted chains draw from the head of the relation list; distractor edges
  // prefer the tail so off-template edges score far from any question
  const std::size_t plantable =
      std::max<std::size_t>(1, (spec.num_relations * 7 + 9) / 10);
  std::vector<int> hop_values;
  std::vector<double> hop_cumulative;
  for (const auto& [hops, weight] : spec.hop_distribution) {
    hop_values.push_back(hops);
    hop_cumulative.push_back(weight + (hop_cumulative.empty() ? 0.0 : hop_cumulative.back()));
  }
  const int max_planted_hops = *std::max_element(hop_values.begin(), hop_values.end());
  if (plantable < static_cast<std::size_t>(max_planted_hops)) {
    throw ContractError("num_relations too small for the requested hop distribution");
  }

  std::size_t next_entity = 0;
  auto fresh_entity = [&] { return data.graph.intern_entity(pad_index("n", next_entity++, 5)); };

  for (std::size_t i = 0; i < spec.num_samples; ++i) {
    const int hops = hop_values[rng.next_weighted(hop_cumulative)];
    const std::size_t answer_count = 1 + rng.next_below(3);

    // hops distinct chain relations, partial Fisher-Yates over the pool
    std::vector<std::size_t> pool(plantable);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    std::vector<RelationId> chain;
    for (int j = 0; j < hops; ++j) {
      const std::size_t pick = j + rng.next_below(plantable - static_cast<std::size_t>(j));
      std::swap(pool[static_cast<std::size_t>(j)], pool[pick]);
      chain.push_back(relations[pool[static_cast<std::size_t>(j)]]);
    }

    const EntityId topic = fresh_entity();
    EntityId cursor = topic;
    for (int j = 0; j + 1 < hops; ++j) {
      const EntityId mid = fresh_entity();
      data.graph.add_triple(cursor, chain[static_cast<std::size_t>(j)], mid);
      cursor = mid;
    }
    QASample sample;
    sample.id = pad_index("s", i, 5);
    sample.topic_entities.push_back(data.graph.entity_label(topic));
    for (std::size_t a = 0; a < answer_count; ++a) {
      const EntityId answer = fresh_entity();
      data.graph.add_triple(cursor, chain.back(), answer);
      sample.answers.push_back(data.graph.entity_label(answer));
    }

    std::string chain_text;
    for (std::size_t j = 0; j < chain.size(); ++j) {
      if (j > 0) chain_text += " then ";
      chain_text += data.graph.relation_label(chain[j]);
    }
    const std::size_t t = rng.next_below(3);
    sample.question = std::string(kTemplatePrefix[t]) + data.graph.entity_label(topic) +
                      kTemplateMiddle[t] + chain_text + "?";
    data.samples.push_back(std::move(sample));
  }

  while (data.graph.entity_count() < spec.num_entities) fresh_entity();

  const std::size_t planted_edges = data.graph.triple_count();
  const auto target = static_cast<std::size_t>(
      std::llround(spec.distractor_edge_factor * static_cast<double>(planted_edges)));
  const std::size_t entity_total = data.graph.entity_count();
  for (std::size_t e = 0; e < target; ++e) {
    for (int attempt = 0; attempt < 30; ++attempt) {
      const auto head = static_cast<EntityId>(rng.next_below(entity_total));
      const auto tail = static_cast<EntityId>(rng.next_below(entity_total));
      if (head == tail) continue;
      const std::size_t offset =
          plantable < spec.num_relations ? plantable + rng.next_below(spec.num_relations - plantable)
                                         : rng.next_below(spec.num_relations);
      const RelationId rel = relations[offset];
      if (data.graph.has_triple(head, rel, tail)) continue;
      data.graph.add_triple(head, rel, tail);
      break;
    }
  }

  data.graph.finalize();
  return data;
}

std::vector<QASample> load_samples(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open samples file: " + path.string());

  std::vector<QASample> samples;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw ParseError(path.string(), line_no, "not a JSON object");
    }
    QASample s;
    try {
      s.id = j.at("id").get<std::string>();
      s.question = j.at("question").get<std::string>();
      s.topic_entities = j.at("topic_entities").get<std::vector<std::string>>();
      s.answers = j.at("answers").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
    if (s.id.empty()) throw ParseError(path.string(), line_no, "empty id");
    if (!ids.insert(s.id).second) {
      throw ParseError(path.string(), line_no, "duplicate sample id: " + s.id);
    }
    if (s.topic_entities.empty()) {
      throw ParseError(path.string(), line_no, "topic_entities must be nonempty");
    }
    if (s.answers.empty()) throw ParseError(path.string(), line_no, "answers must be nonempty");
    samples.push_back(std::move(s));
  }
  return samples;
}

void save_samples(std::span<const QASample> samples, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write samples file: " + path.string());
  for (const QASample& s : samples) {
    nlohmann::json j;
    j["id"] = s.id;
    j["question"] = s.question;
    j["topic_entities"] = s.topic_entities;
    j["answers"] = s.answers;
    out << j.dump() << '\n';
  }
  if (!out.flush()) throw IoError("failed writing samples file: " + path.string());
}

SplitSet split(std::span<const QASample> samples, const std::array<double, 4>& fractions,
               std::uint64_t seed) {
  double total = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) throw ContractError("split fractions must be positive");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ContractError("split fractions must sum to 1");
  if (samples.size() < 4) throw ContractError("too few samples to split");

  std::vector<QASample> shuffled(samples.begin(), samples.end());
  Rng rng(derive_seed(seed, "split"));
  rng.shuffle(shuffled);

  const std::size_t n = shuffled.size();
  std::array<std::size_t, 4> sizes{};
  std::array<double, 4> remainders{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    const double exact = fractions[i] * static_cast<double>(n);
    sizes[i] = static_cast<std::size_t>(std::floor(exact));
    remainders[i] = exact - std::floor(exact);
    assigned += sizes[i];
  }
  std::array<std::size_t, 4> order{0, 1, 2, 3};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) sizes[order[i % 4]] += 1;
  for (std::size_t s : sizes) {
    if (s == 0) throw ContractError("a split slice is empty; adjust fractions or sample count");
  }

  SplitSet out;
  auto cursor = shuffled.begin();
  auto take = [&](std::vector<QASample>& dst, std::size_t count) {
    dst.assign(cursor, cursor + static_cast<std::ptrdiff_t>(count));
    cursor += static_cast<std::ptrdiff_t>(count);
  };
  take(out.quantile, sizes[0]);
  take(out.ltt, sizes[1]);
  take(out.validation, sizes[2]);
  take(out.test, sizes[3]);
  return out;
}

double ecr(std::span<const std::vector<std::string>> predictions,
           std::span<const std::vector<std::string>> gold) {
  if (predictions.size() != gold.size() || predictions.empty()) {
    throw ContractError("ecr requires matching nonempty prediction and gold lists");
  }
  std::size_t covered = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    std::unordered_set<std::string_view> set(predictions[i].begin(), predictions[i].end());
    for (const std::string& g : gold[i]) {
      if (set.count(g)) {
        ++covered;
        break;
      }
    }
  }
  return static_cast<double>(covered) / static_cast<double>(predictions.size());
}

double apss(std::span<const std::vector<std::string>> predictions) {
  if (predictions.empty()) throw ContractError("apss requires a nonempty prediction list");
  std::size_t total = 0;
  for (const auto& p : predictions) total += p.size();
  return static_cast<double>(total) / static_cast<double>(predictions.size());
}

std::vector<std::string> topk_baseline(Pipeline& pipeline, const QASample& sample,
                                       std::size_t k) {
  // vacuous thresholds: every within-hops candidate, insertion order
  const SampleOutcome outcome = pipeline.run(sample, LambdaQuantiles::vacuous());
  std::vector<std::pair<double, std::string>> ranked;
  ranked.reserve(outcome.answers.size());
  for (const std::string& label : outcome.answers) {
    ranked.emplace_back(pipeline.scorer().score(label, sample.question), label);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < ranked.size() && i < k; ++i) out.push_back(ranked[i].second);
  return out;
}

namespace {

std::string format_double(double v, const char* spec_fmt) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec_fmt, v);
  return std::string(buf);
}

std::string metric_or_dash(const std::optional<double>& v) {
  return v ? format_double(*v, "%.6f") : std::string("-");
}

struct TestEval {
  std::optional<double> ecr_value;
  std::optional<double> apss_value;
  std::size_t truncations = 0;
};

TestEval run_test_eval(Pipeline& pipeline, const LambdaQuantiles& quantiles,
                       std::span<const QASample> test, std::size_t workers) {
  std::vector<std::vector<std::string>> predictions(test.size());
  std::vector<std::vector<std::string>> gold(test.size());
  std::vector<std::uint8_t> truncated(test.size(), 0);
  detail::parallel_for(test.size(), workers, [&](std::size_t i) {
    SampleOutcome outcome = pipeline.run(test[i], quantiles);
    predictions[i] = std::move(outcome.answers);
    gold[i] = test[i].answers;
    truncated[i] = outcome.truncated ? 1 : 0;
  });
  TestEval eval;
  eval.ecr_value = ecr(predictions, gold);
  eval.apss_value = apss(predictions);
  eval.truncations = std::accumulate(truncated.begin(), truncated.end(), std::size_t{0});
  return eval;
}

void append_topk_rows(Pipeline& pipeline, std::span<const QASample> test,
                      std::span<const std::size_t> topk, double alpha, std::size_t workers,
                      std::vector<MetricsRow>& rows,
                      std::vector<std::vector<std::vector<std::string>>>& cache,
                      std::size_t& vacuous_truncations) {
  if (cache.empty()) {
    cache.resize(topk.size());
    std::vector<std::uint8_t> truncated(test.size(), 0);
    for (std::size_t ki = 0; ki < topk.size(); ++ki) cache[ki].resize(test.size());
    detail::parallel_for(test.size(), workers, [&](std::size_t i) {
      const SampleOutcome vac = pipeline.run(test[i], LambdaQuantiles::vacuous());
      truncated[i] = vac.truncated ? 1 : 0;
      for (std::size_t ki = 0; ki < topk.size(); ++ki) {
        cache[ki][i] = topk_baseline(pipeline, test[i], topk[ki]);
      }
    });
    vacuous_truncations = std::accumulate(truncated.begin(), truncated.end(), std::size_t{0});
  }
  std::vector<std::vector<std::string>> gold;
  gold.reserve(test.size());
  for (const QASample& s : test) gold.push_back(s.answers);
  for (std::size_t ki = 0; ki < topk.size(); ++ki) {
    MetricsRow row;
    row.alpha = alpha;
    row.method = "top" + std::to_string(topk[ki]);
    row.ecr = ecr(cache[ki], gold);
    row.apss = apss(cache[ki]);
    row.n_test = test.size();
    row.truncation_count = vacuous_truncations;
    rows.push_back(std::move(row));
  }
}

}  // namespace

std::string MetricsReport::to_csv() const {
  std::string out = "alpha,method,ecr,apss,n_test,truncation_count\n";
  for (const MetricsRow& row : rows) {
    out += format_double(row.alpha, "%.6g");
    out += ',';
    out += row.method;
    out += ',';
    out += metric_or_dash(row.ecr);
    out += ',';
    out += metric_or_dash(row.apss);
    out += ',';
    out += std::to_string(row.n_test);
    out += ',';
    out += std::to_string(row.truncation_count);
    out += '\n';
  }
  return out;
}

std::string MetricsReport::to_long_csv() const {
  std::string out = "alpha,method,metric,value\n";
  for (const MetricsRow& row : rows) {
    const std::string prefix = format_double(row.alpha, "%.6g") + ',' + row.method + ',';
    out += prefix + "ecr," + metric_or_dash(row.ecr) + '\n';
    out += prefix + "apss," + metric_or_dash(row.apss) + '\n';
    out += prefix + "n_test," + std::to_string(row.n_test) + '\n';
    out += prefix + "truncation_count," + std::to_string(row.truncation_count) + '\n';
  }
  return out;
}

std::pair<MetricsReport, std::vector<RiskControlResult>> sweep(Pipeline& pipeline,
                                                               const SplitSet& splits,
                                                               const SweepOptions& options) {
  if (options.alphas.empty()) throw ContractError("sweep requires at least one alpha");
  if (splits.test.empty()) throw ContractError("sweep requires a nonempty test split");

  MetricsReport report;
  std::vector<RiskControlResult> artifacts;
  std::vector<std::vector<std::vector<std::string>>> topk_cache;
  std::size_t vacuous_truncations = 0;

  for (double alpha : options.alphas) {
    RiskControlResult result =
        control(pipeline, options.grid, alpha, options.delta, options.fwer, splits.quantile,
                splits.ltt, splits.validation, options.workers);

    MetricsRow row;
    row.alpha = alpha;
    row.method = "uag";
    row.n_test = splits.test.size();
    if (result.selected) {
      const TestEval eval =
          run_test_eval(pipeline, result.selected_quantiles, splits.test, options.workers);
      row.ecr = eval.ecr_value;
      row.apss = eval.apss_value;
      row.truncation_count = eval.truncations;
    }
    report.rows.push_back(std::move(row));
    append_topk_rows(pipeline, splits.test, options.topk, alpha, options.workers, report.rows,
                     topk_cache, vacuous_truncations);
    artifacts.push_back(std::move(result));
  }
  return {std::move(report), std::move(artifacts)};
}

MetricsReport evaluate_report(Pipeline& pipeline, const RiskControlResult& artifact,
                              std::span<const QASample> test, std::span<const std::size_t> topk,
                              std::size_t workers) {
  if (test.empty()) throw ContractError("evaluation requires a nonempty test split");

  MetricsReport report;
  MetricsRow row;
  row.alpha = artifact.target_alpha;
  row.method = "uag";
  row.n_test = test.size();
  if (artifact.selected) {
    const TestEval eval = run_test_eval(pipeline, artifact.selected_quantiles, test, workers);
    row.ecr = eval.ecr_value;
    row.apss = eval.apss_value;
    row.truncation_count = eval.truncations;
  }
  report.rows.push_back(std::move(row));

  std::vector<std::vector<std::vector<std::string>>> topk_cache;
  std::size_t vacuous_truncations = 0;
  append_topk_rows(pipeline, test, topk, artifact.target_alpha, workers, report.rows, topk_cache,
                   vacuous_truncations);
  return report;
}

}  // namespace uag

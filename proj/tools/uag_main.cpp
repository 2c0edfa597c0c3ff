#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "uag/bench.hpp"
#include "uag/config.hpp"
#include "uag/errors.hpp"
#include "uag/kg.hpp"
#include "uag/pipeline.hpp"
#include "uag/riskctl.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 2;        // bad config or input
constexpr int kExitNoValidConfig = 3;  // controller accepted no lambda
constexpr int kExitUnknownEntity = 4;
constexpr int kExitServiceFailure = 5;

// flag values; presence is checked via count() so config-file values survive
// unless the user actually passed the flag or set its UAG_* variable
struct Flags {
  std::string config, graph, samples, artifact, out;
  double alpha = 0.0, delta = 0.0;
  std::vector<double> alphas;
  std::uint64_t seed = 0;
  std::size_t workers = 0, frontier_budget = 0;
  int max_hops = 0;
  std::string fwer, similarity, provider, generator, question;
  std::vector<std::string> topics;
  std::vector<std::size_t> topk;
};

void add_io_flags(CLI::App* cmd, Flags& f, bool with_samples) {
  cmd->add_option("--config", f.config, "JSON config file")->envname("UAG_CONFIG");
  cmd->add_option("--graph", f.graph, "graph TSV path")->envname("UAG_GRAPH");
  if (with_samples) {
    cmd->add_option("--samples", f.samples, "samples JSONL path")->envname("UAG_SAMPLES");
  }
}

void add_pipeline_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--similarity", f.similarity, "nonconformity distance")
      ->check(CLI::IsMember({"cosine", "l1"}))
      ->envname("UAG_SIMILARITY");
  cmd->add_option("--provider", f.provider, "embedding provider: builtin or http:<endpoint>")
      ->envname("UAG_PROVIDER");
  cmd->add_option("--generator", f.generator, "generator: mock or http:<endpoint>")
      ->envname("UAG_GENERATOR");
  cmd->add_option("--max-hops", f.max_hops, "traversal depth bound")->envname("UAG_MAX_HOPS");
  cmd->add_option("--frontier-budget", f.frontier_budget, "traversal expansion budget")
      ->envname("UAG_FRONTIER_BUDGET");
  cmd->add_option("--workers", f.workers, "worker threads (0 = hardware)")
      ->envname("UAG_WORKERS");
}

void add_risk_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--delta", f.delta, "family-wise error budget")->envname("UAG_DELTA");
  cmd->add_option("--fwer", f.fwer, "family-wise error method")
      ->check(CLI::IsMember({"bonferroni", "fixed-sequence"}))
      ->envname("UAG_FWER");
  cmd->add_option("--seed", f.seed, "run seed")->envname("UAG_SEED");
}

// config precedence: defaults < file < UAG_* env < flags (CLI11 folds env
// into flag presence)
uag::RunConfig resolve_config(const CLI::App* cmd, const Flags& f) {
  uag::RunConfig cfg;
  if (cmd->count("--config")) cfg.apply_file(f.config);

  auto set_if = [&](const char* flag, auto apply) {
    if (cmd->get_option_no_throw(flag) && cmd->count(flag)) apply();
  };
  set_if("--graph", [&] { cfg.graph_path = f.graph; });
  set_if("--samples", [&] { cfg.samples_path = f.samples; });
  set_if("--artifact", [&] { cfg.artifact_path = f.artifact; });
  set_if("--out", [&] { cfg.out_path = f.out; });
  set_if("--alpha", [&] { cfg.alpha = f.alpha; });
  set_if("--alphas", [&] { cfg.alphas = f.alphas; });
  set_if("--delta", [&] { cfg.delta = f.delta; });
  set_if("--seed", [&] {
    cfg.seed = f.seed;
    cfg.synthetic.seed = f.seed;
  });
  set_if("--workers", [&] { cfg.workers = f.workers; });
  set_if("--fwer", [&] { cfg.fwer = uag::fwer_from_string(f.fwer); });
  set_if("--similarity", [&] { cfg.similarity = uag::similarity_from_string(f.similarity); });
  set_if("--provider", [&] { cfg.provider = f.provider; });
  set_if("--generator", [&] { cfg.generator = f.generator; });
  set_if("--max-hops", [&] { cfg.max_hops = f.max_hops; });
  set_if("--frontier-budget", [&] { cfg.frontier_budget = f.frontier_budget; });
  set_if("--topk", [&] { cfg.topk = f.topk; });
  cfg.validate();
  std::cerr << "config: " << cfg.to_json_string() << "\n";
  return cfg;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw uag::IoError("cannot write: " + path);
  out << text;
  if (!out.flush()) throw uag::IoError("failed writing: " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw uag::IoError("cannot open: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

uag::Pipeline make_pipeline(const uag::RunConfig& cfg, const uag::KnowledgeGraph& graph) {
  return uag::Pipeline(graph, uag::make_provider(cfg), cfg.similarity, uag::make_generator(cfg),
                       cfg.pipeline_options());
}

// calibrate stamps pipeline facts into the artifact; predict and evaluate
// refuse artifacts produced under a different scoring setup
void check_artifact_compat(const nlohmann::json& artifact, const uag::RunConfig& cfg,
                           const uag::Pipeline& pipeline) {
  if (artifact.contains("provider_identity") &&
      artifact["provider_identity"].get<std::string>() != pipeline.provider_identity()) {
    throw uag::ContractError("artifact was calibrated with provider '" +
                             artifact["provider_identity"].get<std::string>() +
                             "' but this run uses '" + pipeline.provider_identity() + "'");
  }
  if (artifact.contains("similarity") &&
      artifact["similarity"].get<std::string>() != std::string(uag::to_string(cfg.similarity))) {
    throw uag::ContractError("artifact similarity kind does not match this run");
  }
  if (artifact.contains("max_hops") && artifact["max_hops"].get<int>() != cfg.max_hops) {
    throw uag::ContractError("artifact max_hops does not match this run");
  }
}

int cmd_generate(const uag::RunConfig& cfg) {
  if (cfg.graph_path.empty() || cfg.samples_path.empty()) {
    throw uag::ContractError("generate requires graph and samples output paths");
  }
  const uag::SyntheticDataset data = uag::generate_synthetic(cfg.synthetic);
  uag::save_graph(data.graph, cfg.graph_path);
  uag::save_samples(data.samples, cfg.samples_path);
  std::cout << "graph: " << cfg.graph_path << " (" << data.graph.entity_count() << " entities, "
            << data.graph.relation_count() << " relations, " << data.graph.triple_count()
            << " triples)\n";
  std::cout << "samples: " << cfg.samples_path << " (" << data.samples.size() << " samples)\n";
  return kExitOk;
}

int cmd_calibrate(const uag::RunConfig& cfg) {
  if (cfg.graph_path.empty() || cfg.samples_path.empty()) {
    throw uag::ContractError("calibrate requires graph and samples paths");
  }
  if (cfg.artifact_path.empty()) throw uag::ContractError("calibrate requires an artifact path");

  const uag::KnowledgeGraph graph = uag::load_graph(cfg.graph_path);
  const std::vector<uag::QASample> samples = uag::load_samples(cfg.samples_path);
  const uag::SplitSet splits = uag::split(samples, cfg.split_fractions, cfg.seed);
  uag::Pipeline pipeline = make_pipeline(cfg, graph);

  const uag::SweepOptions sweep_opts = cfg.sweep_options();
  const uag::RiskControlResult result =
      uag::control(pipeline, sweep_opts.grid, cfg.alpha, cfg.delta, cfg.fwer, splits.quantile,
                   splits.ltt, splits.validation, sweep_opts.workers);

  nlohmann::json artifact = nlohmann::json::parse(result.to_json_string());
  artifact["provider_identity"] = pipeline.provider_identity();
  artifact["generator_identity"] = pipeline.generator_identity();
  artifact["similarity"] = std::string(uag::to_string(cfg.similarity));
  artifact["max_hops"] = cfg.max_hops;
  artifact["frontier_budget"] = cfg.frontier_budget;
  artifact["seed"] = cfg.seed;
  artifact["calibration"] = {
      {"retriever_used", pipeline.retriever_calibration().used_samples},
      {"retriever_skipped", pipeline.retriever_calibration().skipped_samples},
      {"step_scores", pipeline.retriever_calibration().step_scores.size()},
      {"path_scores", pipeline.retriever_calibration().path_scores.size()},
      {"evaluator_used", pipeline.evaluator_calibration().used_samples},
      {"evaluator_skipped", pipeline.evaluator_skipped()},
      {"answer_scores", pipeline.evaluator_calibration().answer_scores.size()},
      {"retrieval_truncations", pipeline.calibration_truncations()}};
  write_text(cfg.artifact_path, artifact.dump(2) + "\n");

  std::cout << "artifact: " << cfg.artifact_path << "\n";
  std::cout << "valid configurations: " << result.lambda_valid.size() << "/"
            << result.grid.configs.size() << "\n";
  if (result.selected) {
    std::cout << "selected lambda: " << result.selected->to_string() << "\n";
    return kExitOk;
  }
  std::cout << "no-valid-configuration\n";
  return kExitNoValidConfig;
}

int cmd_predict(const uag::RunConfig& cfg, const std::string& question,
                const std::vector<std::string>& topics) {
  if (cfg.graph_path.empty()) throw uag::ContractError("predict requires a graph path");
  if (cfg.artifact_path.empty()) throw uag::ContractError("predict requires an artifact path");
  if (question.empty()) throw uag::ContractError("predict requires --question");
  if (topics.empty()) throw uag::ContractError("predict requires --topics");

  const uag::KnowledgeGraph graph = uag::load_graph(cfg.graph_path);
  const std::string artifact_text = read_text(cfg.artifact_path);
  const uag::RiskControlResult artifact =
      uag::RiskControlResult::from_json_string(artifact_text);
  uag::Pipeline pipeline = make_pipeline(cfg, graph);
  check_artifact_compat(nlohmann::json::parse(artifact_text), cfg, pipeline);

  if (!artifact.selected) {
    std::cerr << "error: artifact holds no valid configuration\n";
    return kExitNoValidConfig;
  }

  const uag::AnswerDetail detail =
      pipeline.answer(question, topics, artifact.selected_quantiles);
  for (const std::string& answer : detail.answers) std::cout << answer << "\n";

  nlohmann::json record;
  record["question"] = question;
  record["topics"] = topics;
  record["answers"] = detail.answers;
  nlohmann::json paths = nlohmann::json::object();
  for (std::size_t i = 0; i < detail.answers.size(); ++i) {
    paths[detail.answers[i]] = detail.answer_paths[i];
  }
  record["paths"] = std::move(paths);
  record["alpha"] = artifact.target_alpha;
  record["lambda"] = {artifact.selected->a1, artifact.selected->a2, artifact.selected->a3};
  record["candidate_count"] = detail.candidate_count;
  record["truncated"] = detail.truncated;
  record["degraded"] = detail.degraded;
  std::cout << record.dump() << "\n";
  return kExitOk;
}

int cmd_evaluate(const uag::RunConfig& cfg) {
  if (cfg.graph_path.empty() || cfg.samples_path.empty()) {
    throw uag::ContractError("evaluate requires graph and samples paths");
  }
  if (cfg.artifact_path.empty()) throw uag::ContractError("evaluate requires an artifact path");

  const uag::KnowledgeGraph graph = uag::load_graph(cfg.graph_path);
  const std::vector<uag::QASample> samples = uag::load_samples(cfg.samples_path);
  const uag::SplitSet splits = uag::split(samples, cfg.split_fractions, cfg.seed);
  const std::string artifact_text = read_text(cfg.artifact_path);
  const uag::RiskControlResult artifact =
      uag::RiskControlResult::from_json_string(artifact_text);
  uag::Pipeline pipeline = make_pipeline(cfg, graph);
  check_artifact_compat(nlohmann::json::parse(artifact_text), cfg, pipeline);

  const uag::MetricsReport report = uag::evaluate_report(
      pipeline, artifact, splits.test, cfg.topk, cfg.sweep_options().workers);
  if (cfg.out_path.empty()) {
    std::cout << report.to_csv();
  } else {
    write_text(cfg.out_path, report.to_csv());
    std::cout << "report: " << cfg.out_path << "\n";
  }
  return kExitOk;
}

int cmd_sweep(const uag::RunConfig& cfg) {
  if (cfg.graph_path.empty() || cfg.samples_path.empty()) {
    throw uag::ContractError("sweep requires graph and samples paths");
  }

  const uag::KnowledgeGraph graph = uag::load_graph(cfg.graph_path);
  const std::vector<uag::QASample> samples = uag::load_samples(cfg.samples_path);
  const uag::SplitSet splits = uag::split(samples, cfg.split_fractions, cfg.seed);
  uag::Pipeline pipeline = make_pipeline(cfg, graph);

  const auto [report, artifacts] = uag::sweep(pipeline, splits, cfg.sweep_options());
  if (cfg.out_path.empty()) {
    std::cout << report.to_csv();
  } else {
    write_text(cfg.out_path, report.to_csv());
    std::filesystem::path long_path(cfg.out_path);
    long_path.replace_extension(".long.csv");
    write_text(long_path.string(), report.to_long_csv());
    std::cout << "report: " << cfg.out_path << "\n";
    std::cout << "long report: " << long_path.string() << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"risk-controlled question answering over knowledge graphs"};
  app.require_subcommand(1);
  Flags f;

  CLI::App* generate = app.add_subcommand("generate", "write a synthetic graph + samples");
  add_io_flags(generate, f, true);
  generate->add_option("--seed", f.seed, "generation seed")->envname("UAG_SEED");

  CLI::App* calibrate = app.add_subcommand("calibrate", "run risk-controlled calibration");
  add_io_flags(calibrate, f, true);
  calibrate->add_option("--artifact", f.artifact, "artifact output path")
      ->envname("UAG_ARTIFACT");
  calibrate->add_option("--alpha", f.alpha, "target miscoverage")->envname("UAG_ALPHA");
  add_risk_flags(calibrate, f);
  add_pipeline_flags(calibrate, f);

  CLI::App* predict = app.add_subcommand("predict", "answer one question with an artifact");
  add_io_flags(predict, f, false);
  predict->add_option("--artifact", f.artifact, "artifact path")->envname("UAG_ARTIFACT");
  predict->add_option("--question", f.question, "question text")->envname("UAG_QUESTION");
  predict->add_option("--topics", f.topics, "topic entity labels")
      ->delimiter(',')
      ->envname("UAG_TOPICS");
  add_pipeline_flags(predict, f);

  CLI::App* evaluate = app.add_subcommand("evaluate", "score an artifact on the test split");
  add_io_flags(evaluate, f, true);
  evaluate->add_option("--artifact", f.artifact, "artifact path")->envname("UAG_ARTIFACT");
  evaluate->add_option("--out", f.out, "report path (default stdout)")->envname("UAG_OUT");
  evaluate->add_option("--topk", f.topk, "baseline set sizes")
      ->delimiter(',')
      ->envname("UAG_TOPK");
  evaluate->add_option("--seed", f.seed, "run seed")->envname("UAG_SEED");
  add_pipeline_flags(evaluate, f);

  CLI::App* sweep = app.add_subcommand("sweep", "calibrate and evaluate across alphas");
  add_io_flags(sweep, f, true);
  sweep->add_option("--out", f.out, "report path (default stdout)")->envname("UAG_OUT");
  sweep->add_option("--alphas", f.alphas, "target miscoverage levels")
      ->delimiter(',')
      ->envname("UAG_ALPHAS");
  sweep->add_option("--topk", f.topk, "baseline set sizes")
      ->delimiter(',')
      ->envname("UAG_TOPK");
  add_risk_flags(sweep, f);
  add_pipeline_flags(sweep, f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInvalid;
  }

  try {
    if (app.got_subcommand(generate)) return cmd_generate(resolve_config(generate, f));
    if (app.got_subcommand(calibrate)) return cmd_calibrate(resolve_config(calibrate, f));
    if (app.got_subcommand(predict)) {
      return cmd_predict(resolve_config(predict, f), f.question, f.topics);
    }
    if (app.got_subcommand(evaluate)) return cmd_evaluate(resolve_config(evaluate, f));
    if (app.got_subcommand(sweep)) return cmd_sweep(resolve_config(sweep, f));
    throw uag::ContractError("no command given");
  } catch (const uag::LookupError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUnknownEntity;
  } catch (const uag::ProviderError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitServiceFailure;
  } catch (const uag::GeneratorError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitServiceFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
}

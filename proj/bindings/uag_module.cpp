#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "uag/bench.hpp"
#include "uag/conformal.hpp"
#include "uag/errors.hpp"
#include "uag/evaluator.hpp"
#include "uag/kg.hpp"
#include "uag/pipeline.hpp"
#include "uag/riskctl.hpp"
#include "uag/scoring.hpp"

namespace py = pybind11;

namespace {

// python-facing pipelines always use the builtin provider and mock generator;
// HTTP-backed runs go through the CLI
std::unique_ptr<uag::Pipeline> make_builtin_pipeline(const uag::KnowledgeGraph& graph,
                                                     std::size_t dim, std::uint64_t seed,
                                                     const std::string& similarity, int max_hops,
                                                     std::size_t frontier_budget, bool fail_open) {
  uag::PipelineOptions options;
  options.max_hops = max_hops;
  options.frontier_budget = frontier_budget;
  options.generator_fail_open = fail_open;
  return std::make_unique<uag::Pipeline>(graph, std::make_shared<uag::HashedBowProvider>(dim, seed),
                                         uag::similarity_from_string(similarity),
                                         std::make_shared<uag::MockGenerator>(), options);
}

}  // namespace

PYBIND11_MODULE(uag, m) {
  m.doc() = "risk-controlled question answering over knowledge graphs";

  py::register_exception<uag::ParseError>(m, "ParseError");
  py::register_exception<uag::ContractError>(m, "ContractError");
  py::register_exception<uag::LookupError>(m, "GraphLookupError");
  py::register_exception<uag::CalibrationError>(m, "CalibrationError");

  py::class_<uag::Step>(m, "Step")
      .def_readonly("relation", &uag::Step::relation)
      .def_readonly("entity", &uag::Step::entity);

  py::class_<uag::RelationPath>(m, "RelationPath")
      .def_readonly("start", &uag::RelationPath::start)
      .def_readonly("steps", &uag::RelationPath::steps)
      .def("length", &uag::RelationPath::length)
      .def("terminal", &uag::RelationPath::terminal);

  py::class_<uag::KnowledgeGraph>(m, "KnowledgeGraph")
      .def(py::init<>())
      .def("add_triple",
           py::overload_cast<std::string_view, std::string_view, std::string_view>(
               &uag::KnowledgeGraph::add_triple))
      .def("finalize", &uag::KnowledgeGraph::finalize)
      .def("entity_count", &uag::KnowledgeGraph::entity_count)
      .def("relation_count", &uag::KnowledgeGraph::relation_count)
      .def("triple_count", &uag::KnowledgeGraph::triple_count)
      .def("find_entity", &uag::KnowledgeGraph::find_entity)
      .def("entity_label", &uag::KnowledgeGraph::entity_label)
      .def("relation_label", &uag::KnowledgeGraph::relation_label)
      .def("neighbors",
           [](const uag::KnowledgeGraph& g, uag::EntityId v) {
             const auto span = g.neighbors(v);
             return std::vector<uag::Step>(span.begin(), span.end());
           })
      .def("gold_paths", &uag::KnowledgeGraph::gold_paths)
      .def("render_path", &uag::KnowledgeGraph::render_path);

  m.def("load_graph", [](const std::string& path) { return uag::load_graph(path); });
  m.def("save_graph",
        [](const uag::KnowledgeGraph& g, const std::string& path) { uag::save_graph(g, path); });

  py::class_<uag::Embedding>(m, "Embedding")
      .def_readonly("dim", &uag::Embedding::dim)
      .def("zero", &uag::Embedding::zero)
      .def("norm", &uag::Embedding::norm)
      .def("dense", &uag::Embedding::dense);

  m.def("hashed_bow_embed", &uag::hashed_bow_embed, py::arg("text"), py::arg("dim"),
        py::arg("seed"));
  m.def("nonconformity", [](const uag::Embedding& a, const uag::Embedding& b,
                            const std::string& kind) {
    return uag::nonconformity(a, b, uag::similarity_from_string(kind));
  });
  m.def("score_pair", [](const std::string& a, const std::string& b, std::size_t dim,
                         std::uint64_t seed, const std::string& kind) {
    return uag::score_pair(uag::HashedBowProvider(dim, seed), a, b,
                           uag::similarity_from_string(kind));
  });

  py::class_<uag::ConformalQuantile>(m, "ConformalQuantile")
      .def_readonly("value", &uag::ConformalQuantile::value)
      .def_readonly("alpha", &uag::ConformalQuantile::alpha)
      .def_readonly("n", &uag::ConformalQuantile::n)
      .def_readonly("rank", &uag::ConformalQuantile::rank)
      .def_static("vacuous", &uag::ConformalQuantile::vacuous)
      .def("to_json", &uag::ConformalQuantile::to_json_string)
      .def_static("from_json", &uag::ConformalQuantile::from_json_string)
      .def(
          "__eq__",
          [](const uag::ConformalQuantile& a, const uag::ConformalQuantile& b) { return a == b; },
          py::is_operator());

  m.def("conformal_quantile", [](const std::vector<double>& scores, double alpha) {
    return uag::conformal_quantile(scores, alpha);
  });
  m.def("prediction_set_indices",
        [](const std::vector<double>& scores, const uag::ConformalQuantile& q) {
          return uag::prediction_set_indices(scores, q);
        });

  py::class_<uag::QASample>(m, "QASample")
      .def(py::init([](std::string id, std::string question, std::vector<std::string> topics,
                       std::vector<std::string> answers) {
             return uag::QASample{std::move(id), std::move(question), std::move(topics),
                                  std::move(answers)};
           }),
           py::arg("id"), py::arg("question"), py::arg("topic_entities"), py::arg("answers"))
      .def_readwrite("id", &uag::QASample::id)
      .def_readwrite("question", &uag::QASample::question)
      .def_readwrite("topic_entities", &uag::QASample::topic_entities)
      .def_readwrite("answers", &uag::QASample::answers);

  m.def("load_samples", [](const std::string& path) { return uag::load_samples(path); });
  m.def("save_samples", [](const std::vector<uag::QASample>& samples, const std::string& path) {
    uag::save_samples(samples, path);
  });

  py::class_<uag::SyntheticSpec>(m, "SyntheticSpec")
      .def(py::init<>())
      .def_readwrite("num_entities", &uag::SyntheticSpec::num_entities)
      .def_readwrite("num_relations", &uag::SyntheticSpec::num_relations)
      .def_readwrite("num_samples", &uag::SyntheticSpec::num_samples)
      .def_readwrite("hop_distribution", &uag::SyntheticSpec::hop_distribution)
      .def_readwrite("distractor_edge_factor", &uag::SyntheticSpec::distractor_edge_factor)
      .def_readwrite("vocabulary_size", &uag::SyntheticSpec::vocabulary_size)
      .def_readwrite("seed", &uag::SyntheticSpec::seed);

  py::class_<uag::SyntheticDataset>(m, "SyntheticDataset")
      .def_readonly("graph", &uag::SyntheticDataset::graph)
      .def_readonly("samples", &uag::SyntheticDataset::samples);

  m.def("generate_synthetic", &uag::generate_synthetic);

  py::class_<uag::SplitSet>(m, "SplitSet")
      .def_readonly("quantile", &uag::SplitSet::quantile)
      .def_readonly("ltt", &uag::SplitSet::ltt)
      .def_readonly("validation", &uag::SplitSet::validation)
      .def_readonly("test", &uag::SplitSet::test);

  m.def("split", [](const std::vector<uag::QASample>& samples, std::array<double, 4> fractions,
                    std::uint64_t seed) { return uag::split(samples, fractions, seed); });

  m.def("ecr", [](const std::vector<std::vector<std::string>>& predictions,
                  const std::vector<std::vector<std::string>>& gold) {
    return uag::ecr(predictions, gold);
  });
  m.def("apss",
        [](const std::vector<std::vector<std::string>>& p) { return uag::apss(p); });

  py::class_<uag::LambdaConfig>(m, "LambdaConfig")
      .def(py::init([](double a1, double a2, double a3) {
             return uag::LambdaConfig{a1, a2, a3};
           }),
           py::arg("a1"), py::arg("a2"), py::arg("a3"))
      .def_readonly("a1", &uag::LambdaConfig::a1)
      .def_readonly("a2", &uag::LambdaConfig::a2)
      .def_readonly("a3", &uag::LambdaConfig::a3)
      .def("__repr__", &uag::LambdaConfig::to_string)
      .def(
          "__eq__",
          [](const uag::LambdaConfig& a, const uag::LambdaConfig& b) { return a == b; },
          py::is_operator());

  py::class_<uag::LambdaGrid>(m, "LambdaGrid")
      .def_readonly("axis1", &uag::LambdaGrid::axis1)
      .def_readonly("axis2", &uag::LambdaGrid::axis2)
      .def_readonly("axis3", &uag::LambdaGrid::axis3)
      .def_readonly("configs", &uag::LambdaGrid::configs);

  m.def("lambda_grid", &uag::lambda_grid, py::arg("h1") = 0.3, py::arg("h2") = 0.3,
        py::arg("h3") = 0.1);
  m.def("binomial_tail_pvalue", &uag::binomial_tail_pvalue, py::arg("n"), py::arg("alpha"),
        py::arg("loss_sum"));
  m.def("fwer_bonferroni", [](const std::vector<double>& p, double delta) {
    return uag::fwer_bonferroni(p, delta);
  });
  m.def("fwer_fixed_sequence", [](const std::vector<double>& p, double delta) {
    return uag::fwer_fixed_sequence(p, delta);
  });

  py::class_<uag::LambdaQuantiles>(m, "LambdaQuantiles")
      .def_readonly("q1", &uag::LambdaQuantiles::q1)
      .def_readonly("q2", &uag::LambdaQuantiles::q2)
      .def_readonly("q3", &uag::LambdaQuantiles::q3)
      .def_static("vacuous", &uag::LambdaQuantiles::vacuous);

  py::class_<uag::SampleOutcome>(m, "SampleOutcome")
      .def_readonly("answers", &uag::SampleOutcome::answers)
      .def_readonly("candidate_count", &uag::SampleOutcome::candidate_count)
      .def_readonly("truncated", &uag::SampleOutcome::truncated)
      .def_readonly("degraded", &uag::SampleOutcome::degraded);

  py::class_<uag::AnswerDetail>(m, "AnswerDetail")
      .def_readonly("answers", &uag::AnswerDetail::answers)
      .def_readonly("answer_paths", &uag::AnswerDetail::answer_paths)
      .def_readonly("candidate_count", &uag::AnswerDetail::candidate_count)
      .def_readonly("truncated", &uag::AnswerDetail::truncated)
      .def_readonly("degraded", &uag::AnswerDetail::degraded);

  py::class_<uag::LambdaAudit>(m, "LambdaAudit")
      .def_readonly("lambda_config", &uag::LambdaAudit::lambda)
      .def_readonly("p_value", &uag::LambdaAudit::p_value)
      .def_readonly("loss_sum", &uag::LambdaAudit::loss_sum)
      .def_readonly("loss_n", &uag::LambdaAudit::loss_n)
      .def_readonly("validation_apss", &uag::LambdaAudit::validation_apss);

  py::class_<uag::RiskControlResult>(m, "RiskControlResult")
      .def_readonly("target_alpha", &uag::RiskControlResult::target_alpha)
      .def_readonly("delta", &uag::RiskControlResult::delta)
      .def_readonly("audit", &uag::RiskControlResult::audit)
      .def_readonly("lambda_valid", &uag::RiskControlResult::lambda_valid)
      .def_readonly("selected", &uag::RiskControlResult::selected)
      .def_readonly("selected_quantiles", &uag::RiskControlResult::selected_quantiles)
      .def("no_valid_configuration", &uag::RiskControlResult::no_valid_configuration)
      .def("to_json", &uag::RiskControlResult::to_json_string)
      .def_static("from_json", &uag::RiskControlResult::from_json_string);

  py::class_<uag::Pipeline>(m, "Pipeline")
      .def(py::init(&make_builtin_pipeline), py::arg("graph"), py::arg("dim") = 4096,
           py::arg("seed") = 17, py::arg("similarity") = "cosine", py::arg("max_hops") = 2,
           py::arg("frontier_budget") = uag::kDefaultFrontierBudget,
           py::arg("fail_open") = false, py::keep_alive<1, 2>())
      .def("calibrate",
           [](uag::Pipeline& p, const std::vector<uag::QASample>& samples) {
             p.calibrate(samples);
           })
      .def("quantiles_for", &uag::Pipeline::quantiles_for)
      .def("run", &uag::Pipeline::run)
      .def("answer",
           [](uag::Pipeline& p, const std::string& question,
              const std::vector<std::string>& topics, const uag::LambdaQuantiles& q) {
             return p.answer(question, topics, q);
           })
      .def("clear_caches", &uag::Pipeline::clear_caches);

  m.def(
      "control",
      [](uag::Pipeline& pipeline, const uag::LambdaGrid& grid, double alpha, double delta,
         const std::string& fwer, const std::vector<uag::QASample>& quantile,
         const std::vector<uag::QASample>& ltt, const std::vector<uag::QASample>& validation,
         std::size_t workers) {
        return uag::control(pipeline, grid, alpha, delta, uag::fwer_from_string(fwer), quantile,
                            ltt, validation, workers);
      },
      py::arg("pipeline"), py::arg("grid"), py::arg("alpha"), py::arg("delta"),
      py::arg("fwer") = "bonferroni", py::arg("quantile_split"), py::arg("ltt_split"),
      py::arg("validation_split"), py::arg("workers") = 1);

  m.def("build_prompt", [](const uag::KnowledgeGraph& g,
                           const std::vector<uag::RelationPath>& paths,
                           const std::string& question) {
    return uag::build_prompt(g, paths, question);
  });
  m.def("mock_generate", [](const uag::KnowledgeGraph& g,
                            const std::vector<uag::RelationPath>& paths,
                            const std::string& question) {
    return uag::mock_generate(g, paths, question);
  });

#ifdef VERSION_INFO
  m.attr("__version__") = VERSION_INFO;
#else
  m.attr("__version__") = "dev";
#endif
}

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <doctest.h>

namespace {

namespace fs = std::filesystem;

std::string cli_bin() {
  const char* bin = std::getenv("UAG_CLI_BIN");
  REQUIRE(bin != nullptr);
  return bin;
}

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

// runs `<prefix> <bin> <args>` under /bin/sh, capturing stdout and stderr
RunResult run_cli(const std::string& args, const std::string& prefix = "") {
  static int counter = 0;
  const fs::path err_path =
      fs::temp_directory_path() / ("uag_cli_err_" + std::to_string(counter++) + ".txt");
  std::string command = prefix;
  if (!command.empty()) command += ' ';
  command += '"' + cli_bin() + "\" " + args + " 2>" + err_path.string();

  RunResult result;
  FILE* pipe = popen(command.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buffer[4096];
  std::size_t n = 0;
  while ((n = fread(buffer, 1, sizeof(buffer), pipe)) > 0) result.out.append(buffer, n);
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;

  std::ifstream err(err_path);
  std::stringstream ss;
  ss << err.rdbuf();
  result.err = ss.str();
  fs::remove(err_path);
  return result;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// one shared workspace with a small generated dataset and artifact
struct Workspace {
  fs::path dir;
  fs::path graph, samples, config, artifact;

  Workspace() {
    dir = fs::temp_directory_path() / "uag_cli_ws";
    fs::remove_all(dir);
    fs::create_directories(dir);
    graph = dir / "graph.tsv";
    samples = dir / "samples.jsonl";
    config = dir / "config.json";
    artifact = dir / "artifact.json";
    std::ofstream cfg(config);
    cfg << R"({
      "embed_dim": 256,
      "grid": {"h1": 0.5, "h2": 0.5, "h3": 0.5},
      "alpha": 0.9,
      "delta": 0.5,
      "alphas": [0.6, 0.9],
      "synthetic": {"num_entities": 150, "num_samples": 80, "vocabulary_size": 60}
    })";
  }

  std::string io_flags() const {
    return "--config " + config.string() + " --graph " + graph.string() + " --samples " +
           samples.string();
  }

  // predict takes no --samples option
  std::string predict_flags() const {
    return "--config " + config.string() + " --graph " + graph.string() + " --artifact " +
           artifact.string();
  }
};

Workspace& workspace() {
  static Workspace ws;
  return ws;
}

}  // namespace

TEST_CASE("generate writes deterministic dataset files") {
  auto& ws = workspace();
  const auto first = run_cli("generate " + ws.io_flags() + " --seed 3");
  CHECK(first.exit_code == 0);
  CHECK(first.out.find("graph:") != std::string::npos);
  CHECK(first.out.find("samples:") != std::string::npos);
  CHECK(first.err.find("config: {") != std::string::npos);
  REQUIRE(fs::exists(ws.graph));
  REQUIRE(fs::exists(ws.samples));

  const std::string graph_bytes = slurp(ws.graph);
  const std::string sample_bytes = slurp(ws.samples);
  const auto second = run_cli("generate " + ws.io_flags() + " --seed 3");
  CHECK(second.exit_code == 0);
  CHECK(slurp(ws.graph) == graph_bytes);
  CHECK(slurp(ws.samples) == sample_bytes);
}

TEST_CASE("generate rejects an empty request before touching outputs") {
  auto& ws = workspace();
  const fs::path bad_config = ws.dir / "bad_config.json";
  {
    std::ofstream out(bad_config);
    out << R"({"synthetic": {"num_samples": 0}})";
  }
  const std::string graph_bytes = slurp(ws.graph);
  const auto rejected =
      run_cli("generate --config " + bad_config.string() + " --graph " + ws.graph.string() +
              " --samples " + ws.samples.string() + " --seed 3");
  CHECK(rejected.exit_code == 2);
  CHECK(slurp(ws.graph) == graph_bytes);
}

TEST_CASE("calibrate writes a deterministic artifact and reports validity") {
  auto& ws = workspace();
  const auto first =
      run_cli("calibrate " + ws.io_flags() + " --artifact " + ws.artifact.string() + " --seed 3");
  REQUIRE(first.exit_code == 0);
  CHECK(first.out.find("valid configurations:") != std::string::npos);
  CHECK(first.out.find("selected lambda:") != std::string::npos);
  REQUIRE(fs::exists(ws.artifact));

  const std::string artifact_bytes = slurp(ws.artifact);
  CHECK(artifact_bytes.find("\"schema\"") != std::string::npos);
  CHECK(artifact_bytes.find("\"provider_identity\"") != std::string::npos);
  const auto second =
      run_cli("calibrate " + ws.io_flags() + " --artifact " + ws.artifact.string() + " --seed 3");
  CHECK(second.exit_code == 0);
  CHECK(slurp(ws.artifact) == artifact_bytes);
}

TEST_CASE("calibrate exits 3 when no configuration certifies") {
  auto& ws = workspace();
  const fs::path artifact = ws.dir / "impossible.json";
  const auto result = run_cli("calibrate " + ws.io_flags() + " --artifact " + artifact.string() +
                              " --seed 3 --delta 0.000000001 --alpha 0.05");
  CHECK(result.exit_code == 3);
  CHECK(result.out.find("no-valid-configuration") != std::string::npos);
  CHECK(fs::exists(artifact));  // the audit artifact is still written
}

TEST_CASE("predict answers a planted question") {
  auto& ws = workspace();
  // pull a sample straight from the generated JSONL
  std::ifstream in(ws.samples);
  std::string line;
  REQUIRE(std::getline(in, line));
  const auto q_pos = line.find("\"question\":\"");
  REQUIRE(q_pos != std::string::npos);
  const auto q_end = line.find('"', q_pos + 12);
  const std::string question = line.substr(q_pos + 12, q_end - q_pos - 12);
  const auto t_pos = line.find("\"topic_entities\":[\"");
  REQUIRE(t_pos != std::string::npos);
  const auto t_end = line.find('"', t_pos + 19);
  const std::string topic = line.substr(t_pos + 19, t_end - t_pos - 19);

  const auto result = run_cli("predict " + ws.predict_flags() + " --question \"" + question +
                              "\" --topics " + topic);
  CHECK(result.exit_code == 0);
  CHECK(result.out.find("\"answers\"") != std::string::npos);  // trailing JSON record
  CHECK(result.out.find("\"lambda\"") != std::string::npos);
}

TEST_CASE("predict distinguishes unknown topics from missing lambdas") {
  auto& ws = workspace();
  const auto unknown =
      run_cli("predict " + ws.predict_flags() + " --question \"q?\" --topics not-a-node");
  CHECK(unknown.exit_code == 4);

  const fs::path impossible = ws.dir / "impossible.json";
  REQUIRE(fs::exists(impossible));
  const auto no_lambda = run_cli("predict --config " + ws.config.string() + " --graph " +
                                 ws.graph.string() + " --artifact " + impossible.string() +
                                 " --question \"q?\" --topics n00000");
  CHECK(no_lambda.exit_code == 3);
}

TEST_CASE("evaluate emits the report CSV") {
  auto& ws = workspace();
  const auto result = run_cli("evaluate " + ws.io_flags() + " --artifact " +
                              ws.artifact.string() + " --seed 3");
  CHECK(result.exit_code == 0);
  CHECK(result.out.rfind("alpha,method,ecr,apss,n_test,truncation_count\n", 0) == 0);
  CHECK(result.out.find("uag") != std::string::npos);
  CHECK(result.out.find("top1") != std::string::npos);
}

TEST_CASE("sweep writes wide and long reports") {
  auto& ws = workspace();
  const fs::path out = ws.dir / "sweep.csv";
  const auto result = run_cli("sweep " + ws.io_flags() + " --seed 3 --out " + out.string());
  CHECK(result.exit_code == 0);
  REQUIRE(fs::exists(out));
  const auto wide = slurp(out);
  CHECK(wide.rfind("alpha,method,", 0) == 0);
  CHECK(wide.find("\n0.6,uag,") != std::string::npos);
  CHECK(wide.find("\n0.9,uag,") != std::string::npos);
  const fs::path long_path = ws.dir / "sweep.long.csv";
  REQUIRE(fs::exists(long_path));
  CHECK(slurp(long_path).rfind("alpha,method,metric,value\n", 0) == 0);

  // without --out the wide report goes to stdout, byte-identical
  const auto again = run_cli("sweep " + ws.io_flags() + " --seed 3");
  CHECK(again.exit_code == 0);
  CHECK(again.out == wide);
}

TEST_CASE("environment variables sit between config and flags") {
  auto& ws = workspace();
  const auto env_only =
      run_cli("calibrate " + ws.io_flags() + " --artifact " + ws.artifact.string() + " --seed 3",
              "UAG_ALPHA=0.8");
  CHECK(env_only.exit_code == 0);
  CHECK(env_only.err.find("\"alpha\":0.8") != std::string::npos);

  const auto flag_wins =
      run_cli("calibrate " + ws.io_flags() + " --artifact " + ws.artifact.string() +
                  " --seed 3 --alpha 0.9",
              "UAG_ALPHA=0.8");
  CHECK(flag_wins.exit_code == 0);
  CHECK(flag_wins.err.find("\"alpha\":0.9") != std::string::npos);

  // restore the canonical artifact for any later reader
  const auto restore =
      run_cli("calibrate " + ws.io_flags() + " --artifact " + ws.artifact.string() + " --seed 3");
  CHECK(restore.exit_code == 0);
}

TEST_CASE("usage errors exit 2") {
  auto& ws = workspace();
  CHECK(run_cli("").exit_code == 2);
  CHECK(run_cli("frobnicate").exit_code == 2);
  CHECK(run_cli("calibrate --no-such-flag").exit_code == 2);
  // missing --question is rejected after parsing, still a usage error
  CHECK(run_cli("predict " + ws.predict_flags()).exit_code == 2);
  CHECK(run_cli("--help").exit_code == 0);
  CHECK(run_cli("calibrate --samples /nonexistent.jsonl --graph " + ws.graph.string() +
                " --artifact " + ws.artifact.string())
            .exit_code == 2);
}

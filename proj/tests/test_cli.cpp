// End-to-end checks of the installed CLI surface: subcommands, exit codes,
// and file outputs. The binary path arrives via the TOKENWALK_BIN env var.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"

namespace {

namespace fs = std::filesystem;

std::string binary_path() {
  const char* bin = std::getenv("TOKENWALK_BIN");
  REQUIRE_MESSAGE(bin != nullptr, "TOKENWALK_BIN must point at the tokenwalk binary");
  return bin;
}

int run_command(const std::string& args) {
  const std::string cmd = binary_path() + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("tokenwalk_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  REQUIRE(out.good());
  out << text;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kRunConfig = R"({
  "algorithm": "apibcd",
  "tau": 0.5,
  "n_walks": 2,
  "max_events": 30,
  "seed": 4,
  "selection": "markov",
  "topology": {"n_agents": 5, "zeta": 0.8},
  "dataset": {"synthetic": {"task": "regression", "rows": 40, "features": 3,
              "noise_sigma": 0.2}},
  "compute": "zero",
  "output": {"trace": "run.csv", "manifest": "run.manifest.json"}
})";

}  // namespace

TEST_CASE("help exits cleanly") { CHECK(run_command("--help") == 0); }

TEST_CASE("run writes trace and manifest, exit 0") {
  const fs::path dir = temp_dir("run");
  write_file(dir / "config.json", kRunConfig);
  const int code = run_command("run --config " + (dir / "config.json").string() +
                               " --outdir " + dir.string());
  CHECK(code == 0);
  CHECK(fs::exists(dir / "run.csv"));
  CHECK(fs::exists(dir / "run.manifest.json"));
  CHECK(slurp(dir / "run.csv").rfind("event,sim_time_s,comm_units,", 0) == 0);
}

TEST_CASE("flag overrides take precedence over config keys") {
  const fs::path dir = temp_dir("override");
  write_file(dir / "config.json", kRunConfig);
  const int code = run_command("run --config " + (dir / "config.json").string() +
                               " --outdir " + dir.string() + " --max-events 7");
  CHECK(code == 0);
  const std::string csv = slurp(dir / "run.csv");
  CHECK(csv.find("\n7,") != std::string::npos);
  CHECK(csv.find("\n8,") == std::string::npos);
}

TEST_CASE("validation failures exit 1") {
  const fs::path dir = temp_dir("bad");
  write_file(dir / "bad.json", "{\"algorithm\": \"ibcd\"}");
  CHECK(run_command("run --config " + (dir / "bad.json").string()) == 1);
  CHECK(run_command("run --config " + (dir / "missing.json").string()) == 1);
}

TEST_CASE("solver failures exit 2") {
  const fs::path dir = temp_dir("solver");
  write_file(dir / "config.json", R"({
    "algorithm": "ibcd",
    "tau": 1.0,
    "inner_tol": 1e-300,
    "max_events": 10,
    "seed": 1,
    "selection": "markov",
    "topology": {"n_agents": 3, "zeta": 1.0},
    "dataset": {"synthetic": {"task": "classification", "rows": 30, "features": 3,
                "margin": 0.2}},
    "compute": "zero"
  })");
  CHECK(run_command("run --config " + (dir / "config.json").string() + " --outdir " +
                    dir.string()) == 2);
}

TEST_CASE("verify passes cleanly and flags violations with exit 3") {
  const fs::path dir = temp_dir("verify");
  write_file(dir / "ok.json", R"({
    "theorem": "thm1",
    "seeds": [1, 2],
    "iterations": 120,
    "loss": "least-squares",
    "inner_tol": 1e-10,
    "taus": [1.0],
    "topology": {"n_agents": 6, "zeta": 0.7},
    "synthetic": {"rows": 50, "features": 4, "noise_sigma": 0.2},
    "selection": "markov",
    "output": {"report": "report.json"}
  })");
  CHECK(run_command("verify --config " + (dir / "ok.json").string() + " --outdir " +
                    dir.string()) == 0);
  CHECK(slurp(dir / "report.json").find("\"all_pass\": true") != std::string::npos);

  write_file(dir / "loose.json", R"({
    "theorem": "thm2",
    "seeds": [5, 6],
    "iterations": 800,
    "loss": "logistic",
    "inner_tol": 1e-2,
    "taus": [0.5],
    "walks": [2],
    "topology": {"n_agents": 6, "zeta": 0.7},
    "synthetic": {"rows": 60, "features": 4, "margin": 2.0},
    "selection": "markov"
  })");
  CHECK(run_command("verify --config " + (dir / "loose.json").string()) == 3);
}

TEST_CASE("compare writes the merged csv") {
  const fs::path dir = temp_dir("compare");
  write_file(dir / "compare.json", R"({
    "base": {
      "tau": 1.0,
      "max_events": 25,
      "seed": 6,
      "selection": "cyclic",
      "topology": {"n_agents": 5, "zeta": 0.9, "require_cycle": true},
      "dataset": {"synthetic": {"task": "regression", "rows": 40, "features": 3,
                  "noise_sigma": 0.2}},
      "compute": "zero"
    },
    "algorithms": [
      {"algorithm": "ibcd"},
      {"algorithm": "wpg", "alpha": 0.05}
    ],
    "output": {"csv": "cmp.csv"}
  })");
  CHECK(run_command("compare --config " + (dir / "compare.json").string() + " --outdir " +
                    dir.string()) == 0);
  const std::string csv = slurp(dir / "cmp.csv");
  CHECK(csv.rfind("algorithm,event,", 0) == 0);
  CHECK(csv.find("\nibcd,1,") != std::string::npos);
  CHECK(csv.find("\nwpg,1,") != std::string::npos);
}

TEST_CASE("gendata emits data plus truth sidecar") {
  const fs::path dir = temp_dir("gendata");
  const std::string base = (dir / "synth").string();
  CHECK(run_command("gendata --out " + base +
                    " --task classification --rows 20 --features 4 --margin 0.4 --seed 3") == 0);
  CHECK(fs::exists(base + ".libsvm"));
  CHECK(slurp(base + ".truth.json").find("hyperplane") != std::string::npos);
}

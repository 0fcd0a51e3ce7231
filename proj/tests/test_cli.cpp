#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

fs::path test_root() {
  static const fs::path root = [] {
    fs::path p = fs::temp_directory_path() /
                 ("consensus_cli_" + std::to_string(::getpid()));
    fs::create_directories(p);
    return p;
  }();
  return root;
}

struct CommandResult {
  int code = -1;
  std::string output;
};

CommandResult run_cli(const std::string& args,
                      const std::string& env_prefix = "") {
  static int counter = 0;
  const fs::path capture =
      test_root() / ("capture" + std::to_string(counter++) + ".txt");
  const std::string cmd = env_prefix + std::string(CONSENSUS_CLI_PATH) + " " +
                          args + " >" + capture.string() + " 2>&1";
  const int raw = std::system(cmd.c_str());
  CommandResult result;
  result.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::ifstream in(capture);
  std::ostringstream text;
  text << in.rdbuf();
  result.output = text.str();
  return result;
}

std::string write_config(const std::string& name, const std::string& text) {
  const fs::path p = test_root() / name;
  std::ofstream out(p);
  out << text;
  return p.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

const char* kSimulateConfig =
    "model = gaussian mean0=-1 mean1=1 sd=1\n"
    "n = 5\n"
    "seed = 42\n";

const char* kExperimentConfig =
    "experiment = learning_curve\n"
    "model = gaussian mean0=-1 mean1=1 sd=1\n"
    "n = 2, 3, 4, 5\n"
    "trials = 50\n"
    "seed = 5\n";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("simulate is deterministic for a fixed seed") {
  const std::string cfg = write_config("sim.cfg", kSimulateConfig);
  const CommandResult a = run_cli("simulate --config " + cfg);
  const CommandResult b = run_cli("simulate --config " + cfg);
  CHECK((a.code == 0 || a.code == 2));
  CHECK(a.code == b.code);
  CHECK(a.output == b.output);
  CHECK(a.output.rfind("n=5 state=", 0) == 0);
  CHECK(a.output.find("t=1 votes=") != std::string::npos);
}

TEST_CASE("simulate accepts a seed override and requires one somewhere") {
  const std::string cfg = write_config(
      "sim_noseed.cfg", "model = gaussian mean0=-1 mean1=1 sd=1\nn = 3\n");
  const CommandResult missing = run_cli("simulate --config " + cfg);
  CHECK(missing.code == 1);
  CHECK(missing.output.find("error:") != std::string::npos);

  const CommandResult a = run_cli("simulate --config " + cfg + " --seed 7");
  const CommandResult b = run_cli("simulate --config " + cfg + " --seed 7");
  const CommandResult c = run_cli("simulate --config " + cfg + " --seed 8");
  CHECK((a.code == 0 || a.code == 2));
  CHECK(a.output == b.output);
  CHECK(a.output != c.output);
}

TEST_CASE("a lone agent yields a one round transcript and no certificate") {
  const std::string cfg = write_config(
      "sim_solo.cfg", "model = gaussian mean0=-1 mean1=1 sd=1\nn = 1\nseed = 5\n");
  const CommandResult r = run_cli("simulate --config " + cfg);
  CHECK(r.code == 2);
  int newlines = 0;
  for (char ch : r.output) {
    if (ch == '\n') ++newlines;
  }
  CHECK(newlines == 2);
}

TEST_CASE("configuration errors exit with status one") {
  const std::string no_model =
      write_config("sim_nomodel.cfg", "n = 5\nseed = 1\n");
  CHECK(run_cli("simulate --config " + no_model).code == 1);

  const std::string truncated =
      write_config("sim_bad.cfg", "model = gaussian mean0=-1\nn = 3\nseed = 1\n");
  const CommandResult r = run_cli("simulate --config " + truncated);
  CHECK(r.code == 1);
  CHECK(r.output.find("error:") != std::string::npos);

  CHECK(run_cli("simulate --config /nonexistent/sim.cfg").code == 1);
}

TEST_CASE("experiment writes results and refuses accidental overwrites") {
  const std::string cfg = write_config("exp.cfg", kExperimentConfig);
  const fs::path dir = test_root() / "exp_out";

  const CommandResult first =
      run_cli("experiment --config " + cfg + " --out " + dir.string());
  CHECK(first.code == 0);
  CHECK(fs::exists(dir / "results.csv"));
  CHECK(fs::exists(dir / "summary.json"));

  const std::string csv = slurp(dir / "results.csv");
  CHECK(csv.rfind("experiment,n,round,estimate,stderr,trials,extra\n", 0) == 0);
  const std::string summary = slurp(dir / "summary.json");
  CHECK(summary.find("\"run_id\"") != std::string::npos);
  CHECK(summary.find("\"learning_rate\"") != std::string::npos);

  const CommandResult blocked =
      run_cli("experiment --config " + cfg + " --out " + dir.string());
  CHECK(blocked.code == 1);
  CHECK(blocked.output.find("exists") != std::string::npos);

  const CommandResult forced = run_cli("experiment --config " + cfg +
                                       " --out " + dir.string() + " --force");
  CHECK(forced.code == 0);
  CHECK(slurp(dir / "results.csv") == csv);
}

TEST_CASE("experiments are reproducible across worker counts") {
  const std::string cfg = write_config("exp_workers.cfg", kExperimentConfig);
  const fs::path one = test_root() / "exp_w1";
  const fs::path four = test_root() / "exp_w4";
  const fs::path env = test_root() / "exp_env";

  CHECK(run_cli("experiment --config " + cfg + " --out " + one.string() +
                " --workers 1")
            .code == 0);
  CHECK(run_cli("experiment --config " + cfg + " --out " + four.string() +
                " --workers 4")
            .code == 0);
  CHECK(run_cli("experiment --config " + cfg + " --out " + env.string(),
                "CONSENSUS_WORKERS=3 ")
            .code == 0);

  const std::string csv = slurp(one / "results.csv");
  CHECK(slurp(four / "results.csv") == csv);
  CHECK(slurp(env / "results.csv") == csv);
  CHECK(slurp(four / "summary.json") == slurp(one / "summary.json"));
}

TEST_CASE("verify exercises the oracle stream") {
  const CommandResult r = run_cli("verify --instances 5 --seed 42");
  CHECK(r.code == 0);
  CHECK(r.output.find("instance=0 vectors=8 rounds=5 result=MATCH") !=
        std::string::npos);
  CHECK(r.output.find("checked=6 diverged=0") != std::string::npos);

  const CommandResult none = run_cli("verify --instances 0");
  CHECK(none.code == 0);
  CHECK(none.output.find("warning") != std::string::npos);
}

TEST_CASE("validate-model reports diagnostics") {
  const std::string good = write_config(
      "good_model.cfg", "model = gaussian mean0=-1 mean1=1 sd=1\n");
  const CommandResult ok = run_cli("validate-model --config " + good);
  CHECK(ok.code == 0);
  CHECK(ok.output.find("ok") != std::string::npos);
  CHECK(ok.output.find("E[exp(-llr) | state 1]") != std::string::npos);

  const std::string bad = write_config(
      "bad_model.cfg", "model = gaussian mean0=1 mean1=1 sd=1\n");
  const CommandResult invalid = run_cli("validate-model --config " + bad);
  CHECK(invalid.code == 1);
  CHECK(invalid.output.find("violation") != std::string::npos);
}

TEST_CASE("usage errors exit with status one") {
  CHECK(run_cli("").code == 1);
  CHECK(run_cli("simulate").code == 1);  // --config is required
  CHECK(run_cli("frobnicate").code == 1);
  CHECK(run_cli("--help").code == 0);
}

}  // TEST_SUITE("cli")

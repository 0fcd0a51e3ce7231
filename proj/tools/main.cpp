#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "consensus/config.hpp"
#include "consensus/engine.hpp"
#include "consensus/harness.hpp"
#include "consensus/oracle.hpp"
#include "consensus/rng.hpp"
#include "consensus/signal_model.hpp"

// Exit codes: 0 success, 1 config or IO error, 2 uncertified cap-out,
// 3 engine/oracle divergence.

namespace {

namespace fs = std::filesystem;

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> max_rounds;
  std::optional<unsigned> workers;
  std::string out_dir = ".";
  bool force = false;
  std::uint64_t instances = 1000;
  std::uint64_t verify_seed = 42;
};

unsigned resolve_workers(const std::optional<unsigned>& flag) {
  if (flag) return *flag;
  const char* env = std::getenv("CONSENSUS_WORKERS");
  if (env == nullptr || *env == '\0') return 0;
  char* end = nullptr;
  const unsigned long value = std::strtoul(env, &end, 10);
  if (end == nullptr || *end != '\0') {
    throw consensus::ConfigError(0, std::string("CONSENSUS_WORKERS is not an integer: '") + env +
                                        "'");
  }
  return static_cast<unsigned>(value);
}

int run_simulate(const Options& opt) {
  const consensus::ParsedConfig parsed = consensus::parse_config_file(opt.config_path);
  if (!parsed.model) throw consensus::ConfigError(0, "missing key 'model'");
  if (parsed.agent_counts.empty()) throw consensus::ConfigError(0, "missing key 'n'");
  std::optional<std::uint64_t> seed = opt.seed ? opt.seed : parsed.seed;
  if (!seed) {
    throw consensus::ConfigError(0, "missing key 'seed' (set it in the config or pass --seed)");
  }
  const int max_rounds = opt.max_rounds ? *opt.max_rounds : parsed.max_rounds.value_or(200);

  const consensus::ModelDiagnostics diag = consensus::validate_model(*parsed.model);
  if (!diag.ok) throw consensus::ConfigError(0, "invalid model: " + diag.violations.front());

  std::mt19937_64 rng(consensus::derive_trial_seed(*seed, 0));
  const consensus::SimulationResult result = consensus::run_to_consensus(
      *parsed.model, parsed.agent_counts.front(), max_rounds, rng);
  std::cout << consensus::write_transcript(result);
  return result.certified ? 0 : 2;
}

int run_experiment_cmd(const Options& opt) {
  const consensus::ParsedConfig parsed = consensus::parse_config_file(opt.config_path);
  const consensus::ExperimentConfig cfg = consensus::to_experiment_config(
      parsed, opt.seed, opt.max_rounds, resolve_workers(opt.workers));

  std::error_code ec;
  fs::create_directories(opt.out_dir, ec);
  if (ec) {
    std::cerr << "error: cannot create output directory '" << opt.out_dir
              << "': " << ec.message() << '\n';
    return 1;
  }
  const fs::path csv_path = fs::path(opt.out_dir) / "results.csv";
  const fs::path json_path = fs::path(opt.out_dir) / "summary.json";
  if (!opt.force && (fs::exists(csv_path) || fs::exists(json_path))) {
    std::cerr << "error: " << csv_path.string() << " or " << json_path.string()
              << " already exists (pass --force to overwrite)\n";
    return 1;
  }

  std::optional<consensus::LearningRateEstimate> estimate;
  const consensus::ResultTable table = consensus::run_experiment(cfg, &estimate);

  auto write_file = [](const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    out.close();
    if (!out) {
      std::cerr << "error: cannot write '" << path.string() << "'\n";
      return false;
    }
    return true;
  };
  if (!write_file(csv_path, table.to_csv())) return 1;
  if (!write_file(json_path, consensus::summary_json(cfg, table, estimate))) return 1;
  std::cout << "wrote " << csv_path.string() << " and " << json_path.string() << '\n';
  return 0;
}

int run_verify(const Options& opt) {
  const consensus::VerifySummary summary =
      consensus::run_verification(opt.instances, opt.verify_seed, std::cout);
  std::cout << "checked=" << summary.checked << " diverged=" << summary.diverged
            << " regenerated=" << summary.regenerated << '\n';
  return summary.diverged != 0 ? 3 : 0;
}

int run_validate_model(const Options& opt) {
  const consensus::ParsedConfig parsed = consensus::parse_config_file(opt.config_path);
  if (!parsed.model) throw consensus::ConfigError(0, "missing key 'model'");
  const consensus::ModelDiagnostics diag = consensus::validate_model(*parsed.model);
  std::cout << "model: " << consensus::model_to_string(*parsed.model) << '\n';
  std::cout << "E[exp(-llr) | state 1] = " << diag.exp_neg_llr_given_s1 << '\n';
  for (const std::string& v : diag.violations) std::cout << "violation: " << v << '\n';
  std::cout << (diag.ok ? "ok" : "invalid") << '\n';
  return diag.ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Repeated-voting consensus simulator"};
  app.require_subcommand(1);
  Options opt;

  CLI::App* simulate = app.add_subcommand("simulate", "Run one simulation, print its transcript");
  simulate->add_option("--config", opt.config_path, "config file path")->required();
  simulate->add_option("--seed", opt.seed, "master seed override");
  simulate->add_option("--max-rounds", opt.max_rounds, "round cap override");

  CLI::App* experiment =
      app.add_subcommand("experiment", "Run a Monte Carlo experiment, write CSV and JSON");
  experiment->add_option("--config", opt.config_path, "config file path")->required();
  experiment->add_option("--seed", opt.seed, "master seed override");
  experiment->add_option("--max-rounds", opt.max_rounds, "round cap override");
  experiment->add_option("--out", opt.out_dir, "output directory (default .)");
  experiment->add_flag("--force", opt.force, "overwrite existing result files");
  experiment->add_option("--workers", opt.workers,
                         "worker threads (default CONSENSUS_WORKERS or hardware)");

  CLI::App* verify =
      app.add_subcommand("verify", "Check the engine against the brute-force oracle");
  verify->add_option("--instances", opt.instances, "fuzzed instances to check (default 1000)");
  verify->add_option("--seed", opt.verify_seed, "fuzzing seed (default 42)");

  CLI::App* validate = app.add_subcommand("validate-model", "Report signal model diagnostics");
  validate->add_option("--config", opt.config_path, "config file path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (simulate->parsed()) return run_simulate(opt);
    if (experiment->parsed()) return run_experiment_cmd(opt);
    if (verify->parsed()) return run_verify(opt);
    if (validate->parsed()) return run_validate_model(opt);
  } catch (const consensus::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

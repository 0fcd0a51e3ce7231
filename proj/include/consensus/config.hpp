#pragma once

// Flat key=value experiment configs. One key per line, `#` starts a comment,
// blank lines are ignored. Keys: experiment, model, n, trials, max_rounds,
// seed. Model syntax:
//   model = gaussian mean0=<r> mean1=<r> sd=<r>
//   model = discrete atoms=[(label,p0,p1),...]

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "consensus/harness.hpp"
#include "consensus/signal_model.hpp"

namespace consensus {

// Carries the 1-based line the problem was found on; 0 for file-level
// problems such as a missing required key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(int line, const std::string& message)
      : std::runtime_error(line > 0 ? "config line " + std::to_string(line) + ": " + message
                                    : "config: " + message),
        line_(line) {}

  int line() const { return line_; }

 private:
  int line_;
};

struct ParsedConfig {
  std::optional<ExperimentKind> kind;
  std::optional<SignalModel> model;
  std::vector<std::size_t> agent_counts;
  std::optional<std::uint64_t> trials;
  std::optional<int> max_rounds;
  std::optional<std::uint64_t> seed;
};

ParsedConfig parse_config_text(const std::string& text);
ParsedConfig parse_config_file(const std::string& path);

// Merges flag overrides, applies defaults (max_rounds 200), and validates
// the model. The seed must come from the file or the override; there is no
// entropy fallback.
ExperimentConfig to_experiment_config(const ParsedConfig& parsed,
                                      std::optional<std::uint64_t> seed_override,
                                      std::optional<int> max_rounds_override, unsigned workers);

}  // namespace consensus

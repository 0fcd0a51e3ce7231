#include "consensus/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <utility>

namespace consensus {
namespace {

std::string trim(const std::string& s) {
  std::size_t lo = 0;
  std::size_t hi = s.size();
  while (lo < hi && std::isspace(static_cast<unsigned char>(s[lo])) != 0) ++lo;
  while (hi > lo && std::isspace(static_cast<unsigned char>(s[hi - 1])) != 0) --hi;
  return s.substr(lo, hi - lo);
}

std::uint64_t parse_u64(const std::string& token, int line, const std::string& what) {
  std::uint64_t value = 0;
  const char* first = token.data();
  const char* last = first + token.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || token.empty()) {
    throw ConfigError(line, what + " must be an unsigned integer, got '" + token + "'");
  }
  return value;
}

double parse_real(const std::string& token, int line, const std::string& what) {
  double value = 0.0;
  const char* first = token.data();
  const char* last = first + token.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || token.empty()) {
    throw ConfigError(line, what + " must be a real number, got '" + token + "'");
  }
  return value;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      parts.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return parts;
}

ExperimentKind parse_kind(const std::string& value, int line) {
  if (value == "consensus") return ExperimentKind::consensus;
  if (value == "round_accuracy") return ExperimentKind::round_accuracy;
  if (value == "learning_curve") return ExperimentKind::learning_curve;
  if (value == "majority_baseline") return ExperimentKind::majority_baseline;
  throw ConfigError(line, "unknown experiment '" + value +
                              "' (expected consensus, round_accuracy, learning_curve, or "
                              "majority_baseline)");
}

SignalModel parse_gaussian_model(const std::string& params, int line) {
  std::istringstream stream(params);
  std::optional<double> mean0;
  std::optional<double> mean1;
  std::optional<double> sd;
  std::string token;
  while (stream >> token) {
    const std::size_t eq = token.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(line, "gaussian model expects key=value parameters, got '" + token + "'");
    }
    const std::string key = token.substr(0, eq);
    const double value = parse_real(token.substr(eq + 1), line, "gaussian " + key);
    std::optional<double>* slot = nullptr;
    if (key == "mean0") slot = &mean0;
    else if (key == "mean1") slot = &mean1;
    else if (key == "sd") slot = &sd;
    else throw ConfigError(line, "unknown gaussian parameter '" + key + "'");
    if (slot->has_value()) throw ConfigError(line, "duplicate gaussian parameter '" + key + "'");
    *slot = value;
  }
  if (!mean0 || !mean1 || !sd) {
    throw ConfigError(line, "gaussian model needs mean0, mean1, and sd");
  }
  try {
    return make_gaussian(*mean0, *mean1, *sd);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(line, e.what());
  }
}

SignalModel parse_discrete_model(const std::string& params, int line) {
  std::string compact;
  for (char c : params) {
    if (std::isspace(static_cast<unsigned char>(c)) == 0) compact += c;
  }
  const std::string prefix = "atoms=[";
  if (compact.rfind(prefix, 0) != 0 || compact.back() != ']') {
    throw ConfigError(line, "discrete model expects atoms=[(label,p0,p1),...]");
  }
  const std::string body = compact.substr(prefix.size(), compact.size() - prefix.size() - 1);
  if (body.empty()) throw ConfigError(line, "discrete model needs at least one atom");

  std::vector<Atom> atoms;
  std::size_t pos = 0;
  while (pos < body.size()) {
    if (body[pos] != '(') throw ConfigError(line, "expected '(' starting an atom");
    const std::size_t close = body.find(')', pos);
    if (close == std::string::npos) throw ConfigError(line, "unterminated atom");
    const std::vector<std::string> fields = split(body.substr(pos + 1, close - pos - 1), ',');
    if (fields.size() != 3 || fields[0].empty()) {
      throw ConfigError(line, "each atom needs (label,p0,p1)");
    }
    atoms.push_back(Atom{fields[0], parse_real(fields[1], line, "atom p0"),
                         parse_real(fields[2], line, "atom p1")});
    pos = close + 1;
    if (pos < body.size()) {
      if (body[pos] != ',') throw ConfigError(line, "expected ',' between atoms");
      ++pos;
    }
  }
  try {
    return make_discrete(std::move(atoms));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(line, e.what());
  }
}

SignalModel parse_model(const std::string& value, int line) {
  const std::size_t space = value.find_first_of(" \t");
  const std::string family = value.substr(0, space);
  const std::string params = space == std::string::npos ? "" : trim(value.substr(space + 1));
  if (family == "gaussian") return parse_gaussian_model(params, line);
  if (family == "discrete") return parse_discrete_model(params, line);
  throw ConfigError(line, "unknown model family '" + family + "' (expected gaussian or discrete)");
}

std::vector<std::size_t> parse_agent_counts(const std::string& value, int line) {
  std::vector<std::size_t> counts;
  for (const std::string& part : split(value, ',')) {
    const std::uint64_t n = parse_u64(trim(part), line, "agent count");
    if (n == 0) throw ConfigError(line, "agent counts must be positive");
    counts.push_back(static_cast<std::size_t>(n));
  }
  return counts;
}

}  // namespace

ParsedConfig parse_config_text(const std::string& text) {
  ParsedConfig parsed;
  std::istringstream stream(text);
  std::string raw;
  int line = 0;
  while (std::getline(stream, raw)) {
    ++line;
    const std::size_t hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string content = trim(raw);
    if (content.empty()) continue;

    const std::size_t eq = content.find('=');
    if (eq == std::string::npos) throw ConfigError(line, "expected key=value");
    const std::string key = trim(content.substr(0, eq));
    const std::string value = trim(content.substr(eq + 1));
    if (value.empty()) throw ConfigError(line, "empty value for key '" + key + "'");

    if (key == "experiment") {
      if (parsed.kind) throw ConfigError(line, "duplicate key 'experiment'");
      parsed.kind = parse_kind(value, line);
    } else if (key == "model") {
      if (parsed.model) throw ConfigError(line, "duplicate key 'model'");
      parsed.model = parse_model(value, line);
    } else if (key == "n") {
      if (!parsed.agent_counts.empty()) throw ConfigError(line, "duplicate key 'n'");
      parsed.agent_counts = parse_agent_counts(value, line);
    } else if (key == "trials") {
      if (parsed.trials) throw ConfigError(line, "duplicate key 'trials'");
      parsed.trials = parse_u64(value, line, "trials");
    } else if (key == "max_rounds") {
      if (parsed.max_rounds) throw ConfigError(line, "duplicate key 'max_rounds'");
      const std::uint64_t rounds = parse_u64(value, line, "max_rounds");
      if (rounds == 0 || rounds > 1'000'000) {
        throw ConfigError(line, "max_rounds must be in 1..1000000");
      }
      parsed.max_rounds = static_cast<int>(rounds);
    } else if (key == "seed") {
      if (parsed.seed) throw ConfigError(line, "duplicate key 'seed'");
      parsed.seed = parse_u64(value, line, "seed");
    } else {
      throw ConfigError(line, "unknown key '" + key + "'");
    }
  }
  return parsed;
}

ParsedConfig parse_config_file(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw ConfigError(0, "cannot read '" + path + "'");
  std::ostringstream buffer;
  buffer << file.rdbuf();
  return parse_config_text(buffer.str());
}

ExperimentConfig to_experiment_config(const ParsedConfig& parsed,
                                      std::optional<std::uint64_t> seed_override,
                                      std::optional<int> max_rounds_override, unsigned workers) {
  ExperimentConfig cfg;
  if (!parsed.kind) throw ConfigError(0, "missing key 'experiment'");
  cfg.kind = *parsed.kind;
  if (!parsed.model) throw ConfigError(0, "missing key 'model'");
  cfg.model = *parsed.model;
  if (parsed.agent_counts.empty()) throw ConfigError(0, "missing key 'n'");
  cfg.agent_counts = parsed.agent_counts;
  if (!parsed.trials) throw ConfigError(0, "missing key 'trials'");
  cfg.trials = *parsed.trials;
  if (cfg.trials == 0) throw ConfigError(0, "trials must be at least 1");
  cfg.max_rounds = max_rounds_override ? *max_rounds_override
                                       : parsed.max_rounds.value_or(200);
  if (cfg.max_rounds < 1) throw ConfigError(0, "max_rounds must be positive");
  if (seed_override) {
    cfg.seed = *seed_override;
  } else if (parsed.seed) {
    cfg.seed = *parsed.seed;
  } else {
    throw ConfigError(0, "missing key 'seed' (set it in the config or pass --seed)");
  }
  cfg.workers = workers;

  const ModelDiagnostics diag = validate_model(cfg.model);
  if (!diag.ok) {
    std::string joined;
    for (const std::string& v : diag.violations) {
      if (!joined.empty()) joined += "; ";
      joined += v;
    }
    throw ConfigError(0, "invalid model: " + joined);
  }
  return cfg;
}

}  // namespace consensus

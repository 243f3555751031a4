#pragma once

// Orchestration behind the command-line front end: configuration layering,
// replicated runs on a thread pool, and CSV/JSON output.
//
// Configuration is one flat JSON object. Values are layered as
//   built-in defaults < experiment defaults < --config file < --set K=V
// and the resolved object is echoed into meta.json so each run can be replayed.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bhmc/baselines.hpp"
#include "bhmc/sampler.hpp"

namespace bhmc {

enum class SamplerKind { bhmc, bhmc_no_involution, mala, imh };

std::string to_string(SamplerKind kind);
SamplerKind parse_sampler(const std::string& name);

struct ExperimentConfig {
  SamplerKind sampler = SamplerKind::bhmc;
  std::string polytope = "hypercube";  // preset name or path to a polytope JSON file
  int d = 5;
  double half_width = 0.5;
  std::string target = "gaussian";     // uniform | gaussian
  nlohmann::json mu = "default_mu";      // "default_mu" or an explicit array
  int replicates = 10;
  ChainConfig chain;
  double mala_h = 0.05;
  MalaDrift mala_drift = MalaDrift::std_dev;
  bool include_burn_in = false;
  int threads = 0;                      // 0: hardware concurrency
  std::filesystem::path out = "out";
  std::size_t trace_every = 0;          // 0: N / 1000
  int reference_factor = 10;            // reference sampler runs this many times longer
  int ablation_K = 5;                   // fixed-point budget of the no-involution arm
  bool write_samples = true;

  nlohmann::json to_json() const;
};

/// Built-in defaults as JSON; eta is null until resolved.
nlohmann::json default_config();

/// Extra defaults layered on top of default_config() by each experiment.
nlohmann::json experiment_defaults(const std::string& name);

/// Parses "key=value"; the value is read as JSON when possible, else as a string.
std::pair<std::string, nlohmann::json> parse_override(const std::string& assignment);

/// Merges layers (later wins), fills derived defaults and validates.
/// Throws std::invalid_argument on unknown keys or bad values.
ExperimentConfig resolve_config(const std::vector<nlohmann::json>& layers);

/// Default involution tolerance for a polytope/dimension pair.
double default_eta(const std::string& polytope, int d);

/// 17 significant digits, '.' separator.
std::string format_double(double v);

/// Runs the configured sampler R times and writes samples.csv, stats.json,
/// meta.json into cfg.out. Returns a process exit code.
int cmd_sample(const ExperimentConfig& cfg, std::ostream& log);

/// hypercube_bias | simplex_bias | norm_ablation.
int cmd_experiment(const std::string& name, const ExperimentConfig& cfg, std::ostream& log);

}  // namespace bhmc

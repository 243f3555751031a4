#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bhmc/experiment.hpp"
#include "bhmc/selfcheck.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out;
  std::uint64_t seed = 0;
  int threads = -1;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "JSON configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--set", flags.overrides, "Override a config key, KEY=VALUE (repeatable)");
  cmd->add_option("--out", flags.out, "Output directory");
  cmd->add_option("--seed", flags.seed, "Base seed; replicate i uses seed + i");
  cmd->add_option("--threads", flags.threads, "Worker threads (0: all cores)");
}

bhmc::ExperimentConfig resolve(const CommonFlags& flags, const CLI::App* cmd,
                               nlohmann::json base) {
  std::vector<nlohmann::json> layers{std::move(base)};
  if (!flags.config_path.empty()) {
    std::ifstream in(flags.config_path);
    layers.push_back(nlohmann::json::parse(in));
  }
  nlohmann::json sets = nlohmann::json::object();
  for (const auto& kv : flags.overrides) {
    auto [key, value] = bhmc::parse_override(kv);
    sets[key] = value;
  }
  if (!flags.out.empty()) sets["out"] = flags.out;
  if (cmd->count("--seed")) sets["seed"] = flags.seed;
  if (flags.threads >= 0) sets["threads"] = flags.threads;
  layers.push_back(sets);
  return bhmc::resolve_config(layers);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Barrier Hamiltonian Monte Carlo on polytopes"};
  app.require_subcommand(1);
  app.set_version_flag("--version", BHMC_VERSION);

  CommonFlags sample_flags;
  auto* sample = app.add_subcommand("sample", "Run replicated chains of one sampler");
  add_common(sample, sample_flags);

  CommonFlags exp_flags;
  std::string exp_name;
  int exp_d = 0;
  auto* experiment = app.add_subcommand("experiment", "Run a bias or norm-ablation experiment");
  experiment->add_option("name", exp_name, "hypercube_bias | simplex_bias | norm_ablation")
      ->required()
      ->check(CLI::IsMember({"hypercube_bias", "simplex_bias", "norm_ablation"}));
  experiment->add_option("--d", exp_d, "Dimension")->check(CLI::PositiveNumber);
  add_common(experiment, exp_flags);

  std::string fault;
  std::uint64_t check_seed = bhmc::CheckOptions{}.seed;
  auto* check = app.add_subcommand("check", "Run the derivative and property self-checks");
  check->add_option("--inject-fault", fault, "Deliberately break a derivative (trace_sign)")
      ->check(CLI::IsMember({"trace_sign"}));
  check->add_option("--seed", check_seed, "Seed for the random test points");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sample) {
      return bhmc::cmd_sample(resolve(sample_flags, sample, nlohmann::json::object()), std::cout);
    }
    if (*experiment) {
      nlohmann::json base = bhmc::experiment_defaults(exp_name);
      if (exp_d > 0) base["d"] = exp_d;
      if (base.value("out", "").empty()) base["out"] = "out/" + exp_name;
      return bhmc::cmd_experiment(exp_name, resolve(exp_flags, experiment, base), std::cout);
    }
    if (*check) {
      bhmc::CheckOptions opts;
      opts.seed = check_seed;
      opts.inject_trace_sign_error = fault == "trace_sign";
      const auto results = bhmc::run_self_checks(opts);
      bhmc::print_check_table(results, std::cout);
      for (const auto& r : results) {
        if (!r.passed) return 1;
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

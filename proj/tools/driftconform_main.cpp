// Command-line experiment runner: wires a synthetic drift stream to one or
// more online conformal policies, runs seeded replications and writes
// plot-ready CSV traces and aggregates.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "driftconform/driftconform.hpp"

namespace dc = driftconform;

namespace {

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  long long seed = -1;
  long long reps = -1;
  long long threads = -1;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool config_required) {
  auto* opt = cmd->add_option("--config", flags.config_path,
                              "experiment config (JSON)");
  if (config_required) opt->required();
  cmd->add_option("--out", flags.out_dir, "output directory");
  cmd->add_option("--seed", flags.seed, "master seed override");
  cmd->add_option("--reps", flags.reps, "replication count override");
  cmd->add_option("--threads", flags.threads,
                  "worker threads (DRIFTCONFORM_THREADS overrides)");
}

dc::ExperimentConfig load_with_overrides(const CommonFlags& flags) {
  dc::ExperimentConfig cfg = flags.config_path.empty()
                                 ? dc::ExperimentConfig{}
                                 : dc::load_experiment_config(flags.config_path);
  if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
  if (flags.seed >= 0) cfg.master_seed = static_cast<std::uint64_t>(flags.seed);
  if (flags.reps >= 1) cfg.replications = static_cast<std::size_t>(flags.reps);
  if (flags.threads >= 1) cfg.threads = static_cast<std::size_t>(flags.threads);
  return cfg;
}

// Standard comparison grid: drift-aware recalibration against every
// ACI stepsize variant, all sharing the pretrained score model.
std::vector<dc::PolicyConfig> default_policy_grid(const dc::PolicyConfig& base) {
  std::vector<dc::PolicyConfig> grid;
  dc::PolicyConfig drift = base;
  drift.kind = dc::PolicyKind::DriftOcp;
  drift.label.clear();
  grid.push_back(drift);
  for (double eta : {0.01, 0.1, 0.5}) {
    dc::PolicyConfig aci = base;
    aci.kind = dc::PolicyKind::AciFixed;
    aci.eta = eta;
    aci.label.clear();
    grid.push_back(aci);
  }
  for (double gamma : {0.5, 0.6}) {
    dc::PolicyConfig aci = base;
    aci.kind = dc::PolicyKind::AciDecaying;
    aci.gamma = gamma;
    aci.label.clear();
    grid.push_back(aci);
  }
  return grid;
}

int run_command(const CommonFlags& flags, bool sweep) {
  dc::ExperimentConfig cfg = load_with_overrides(flags);
  if (sweep) {
    cfg.policies = default_policy_grid(cfg.policies.empty()
                                           ? dc::PolicyConfig{}
                                           : cfg.policies.front());
  }
  if (cfg.out_dir.empty()) cfg.out_dir = "out";
  const auto result = dc::run_experiment(cfg);
  for (std::size_t p = 0; p < result.policies.size(); ++p) {
    const auto& pol = result.policies[p];
    std::size_t failed = 0;
    double final_regret = 0.0;
    std::size_t ok = 0;
    for (const auto& rep : pol.replications) {
      if (rep.failed) {
        ++failed;
        continue;
      }
      if (!rep.trace.empty()) final_regret += rep.trace.back().cum_regret;
      ++ok;
    }
    std::printf("%-16s reps=%zu failed=%zu mean_final_cum_regret=%s\n",
                pol.label.c_str(), pol.replications.size(), failed,
                ok > 0 ? std::to_string(final_regret / static_cast<double>(ok))
                             .c_str()
                       : "n/a");
  }
  std::printf("outputs written to %s\n", result.config.out_dir.c_str());
  return 0;
}

int check_command(const CommonFlags& flags) {
  dc::ExperimentConfig cfg = load_with_overrides(flags);
  cfg = dc::resolve_experiment(cfg);
  const auto variation = dc::scenario_variation(cfg.stream);
  dc::json j = dc::experiment_config_to_json(cfg);
  j["scenario_variation"] = {{"tv_upper", variation.tv_upper},
                             {"ks_upper", variation.ks_upper},
                             {"n_cp", variation.n_cp}};
  std::printf("%s\n", j.dump(2).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"driftconform: drift-aware online conformal prediction"};
  app.require_subcommand(1);

  CommonFlags run_flags, sweep_flags, check_flags;
  auto* run = app.add_subcommand("run", "run one experiment config");
  add_common(run, run_flags, /*config_required=*/true);
  auto* sweep = app.add_subcommand(
      "sweep", "run the policy grid over one stream config");
  add_common(sweep, sweep_flags, /*config_required=*/true);
  auto* check =
      app.add_subcommand("check", "validate a config and print resolved defaults");
  add_common(check, check_flags, /*config_required=*/true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return run_command(run_flags, /*sweep=*/false);
    if (sweep->parsed()) return run_command(sweep_flags, /*sweep=*/true);
    if (check->parsed()) return check_command(check_flags);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

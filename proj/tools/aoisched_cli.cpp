// Command-line front end. Talks to the shared library exclusively through
// the C interface in aoisched.h.
//
//   aoisched-cli balpha  --paper | --config spec.json
//   aoisched-cli relaxed --config spec.json
//   aoisched-cli fluid   --config spec.json
//   aoisched-cli compare --config spec.json
//   aoisched-cli kurtz   --config spec.json
//
// Common flags: --out DIR, --seed S, --no-timestamp, --threads T, --check.
// Exit codes: 0 ok, 1 validation error, 2 runtime error, 3 failed --check.

#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "aoisched.h"

namespace {

struct CommonArgs {
  std::string config;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  bool has_seed = false;
  bool no_timestamp = false;
  int threads = 0;
  bool check = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required) {
  CLI::Option* cfg = cmd->add_option("--config", args.config, "experiment spec (JSON)");
  if (config_required) cfg->required();
  cmd->add_option("--out", args.out_dir, "output directory")->capture_default_str();
  cmd->add_option("--seed", args.seed, "base seed override")->each([&](const std::string&) {
    args.has_seed = true;
  });
  cmd->add_flag("--no-timestamp", args.no_timestamp, "omit generated_at metadata");
  cmd->add_option("--threads", args.threads, "worker threads (0 = auto)");
  cmd->add_flag("--check", args.check, "evaluate the built-in result checks");
}

int exit_code(aoi_status status) {
  switch (status) {
    case AOI_OK: return 0;
    case AOI_ERR_INVALID_ARGUMENT: return 1;
    case AOI_ERR_CHECK_FAILED: return 3;
    default: return 2;
  }
}

int run(const CommonArgs& args, const std::string& inline_spec, const char* expected_kind) {
  using ExperimentPtr = std::unique_ptr<aoi_experiment, decltype(&aoi_experiment_destroy)>;
  aoi_experiment* raw = nullptr;
  aoi_status status = inline_spec.empty()
                          ? aoi_experiment_create_from_file(args.config.c_str(), &raw)
                          : aoi_experiment_create_from_json(inline_spec.c_str(), &raw);
  ExperimentPtr experiment(raw, &aoi_experiment_destroy);
  if (status != AOI_OK) {
    std::fprintf(stderr, "error: %s\n", aoi_last_error());
    return exit_code(status);
  }
  const std::string kind = aoi_experiment_kind(experiment.get());
  if (kind != expected_kind) {
    std::fprintf(stderr, "error: spec kind '%s' does not belong to this subcommand (wants %s)\n",
                 kind.c_str(), expected_kind);
    return 1;
  }

  aoi_run_options options{};
  options.out_dir = args.out_dir.c_str();
  options.has_seed = args.has_seed ? 1 : 0;
  options.seed = args.seed;
  options.no_timestamp = args.no_timestamp ? 1 : 0;
  options.threads = args.threads;
  options.check = args.check ? 1 : 0;

  status = aoi_experiment_run(experiment.get(), &options);
  if (const char* summary = aoi_experiment_summary_json(experiment.get())) {
    std::printf("%s\n", summary);
  }
  if (status != AOI_OK) {
    std::fprintf(stderr, "error: %s\n", aoi_last_error());
  }
  return exit_code(status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Index-policy scheduling for age minimization: solver, fluid model, simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", aoi_version());

  CommonArgs balpha_args;
  bool paper = false;
  CLI::App* balpha = app.add_subcommand("balpha", "budget bound table over (p_lo, p_hi) pairs");
  add_common(balpha, balpha_args, /*config_required=*/false);
  balpha->add_flag("--paper", paper, "emit the built-in ten-row reference preset");

  CommonArgs relaxed_args;
  CLI::App* relaxed = app.add_subcommand("relaxed", "solve the time-averaged relaxation");
  add_common(relaxed, relaxed_args, true);

  CommonArgs fluid_args;
  CLI::App* fluid = app.add_subcommand("fluid", "iterate the fluid model with diagnostics");
  add_common(fluid, fluid_args, true);

  CommonArgs compare_args;
  CLI::App* compare = app.add_subcommand("compare", "simulated policy vs the relaxed optimum");
  add_common(compare, compare_args, true);

  CommonArgs kurtz_args;
  CLI::App* kurtz = app.add_subcommand("kurtz", "concentration of the empirical proportions");
  add_common(kurtz, kurtz_args, true);

  CLI11_PARSE(app, argc, argv);

  if (balpha->parsed()) {
    if (paper && !balpha_args.config.empty()) {
      std::fprintf(stderr, "error: give either --paper or --config, not both\n");
      return 1;
    }
    if (!paper && balpha_args.config.empty()) {
      std::fprintf(stderr, "error: balpha needs --paper or --config\n");
      return 1;
    }
    return run(balpha_args, paper ? R"({"kind":"balpha_table","paper":true})" : "",
               "balpha_table");
  }
  if (relaxed->parsed()) return run(relaxed_args, "", "relaxed_solve");
  if (fluid->parsed()) return run(fluid_args, "", "fluid_run");
  if (compare->parsed()) return run(compare_args, "", "sim_sweep");
  if (kurtz->parsed()) return run(kurtz_args, "", "kurtz");
  return 1;
}

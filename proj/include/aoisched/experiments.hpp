#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "aoisched/system.hpp"

namespace aoisched {

// How an experiment run interacts with the filesystem and scheduler.
struct RunOptions {
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;  // overrides the spec's base seed
  bool no_timestamp = false;
  int threads = 0;  // 0: one worker per hardware thread
  bool check = false;
};

struct ExperimentResult {
  nlohmann::ordered_json summary;
  bool checks_passed = true;
  std::vector<std::string> output_files;
};

// Parses and schema-validates an experiment spec. Unknown keys anywhere in
// the document are rejected. Kinds: balpha_table, relaxed_solve, fluid_run,
// sim_sweep, kurtz.
nlohmann::ordered_json parse_experiment_file(const std::string& path);
void validate_experiment(const nlohmann::ordered_json& spec);

SystemConfig parse_system(const nlohmann::ordered_json& system);

// Reads a "class,age,mass" CSV (leading '#' comment lines allowed); format
// violations are reported with their line number.
std::vector<std::vector<double>> read_proportions_csv(const std::string& path,
                                                      std::size_t num_classes);

ExperimentResult run_experiment(const nlohmann::ordered_json& spec, const RunOptions& options);
ExperimentResult run_experiment_file(const std::string& path, const RunOptions& options);

// The ten (p_lo, p_hi, printed B_alpha) reference rows behind the --paper
// preset of the balpha command.
struct BalphaReferenceRow {
  double p_lo, p_hi, printed;
};
const std::vector<BalphaReferenceRow>& balpha_reference_rows();

}  // namespace aoisched

/*
 Copyright 2026 The robust-dp Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#pragma once

// Experiment configuration, the example studies and their on-disk artifacts.
//
// Each study has a compute step returning an in-memory result and a writer
// that turns it into CSV files, summary.json and config.json.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "robust_dp/systems.hpp"

namespace robust_dp {

using Json = nlohmann::ordered_json;

/// Bad command line or configuration; maps to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

const std::vector<std::string>& experiment_names();

/// Documented defaults of an experiment; every accepted key appears here.
Json default_params(std::string_view experiment);

struct ExperimentConfig {
  std::string experiment;
  std::uint64_t seed = 0;
  Json params;
  std::filesystem::path output_dir;

  Json to_json() const;
};

/// Defaults, then the config file, then --seed/--out, then each key=value.
/// Unknown keys and type changes raise ConfigError.
ExperimentConfig resolve_config(std::string_view experiment,
                                const std::optional<std::filesystem::path>& config_file,
                                std::optional<std::uint64_t> seed,
                                const std::optional<std::filesystem::path>& output_dir,
                                const std::vector<std::string>& overrides);

/// Applies one dotted key=value override in place. The value is parsed as
/// JSON when possible, otherwise taken as a string.
void apply_override(Json& params, std::string_view assignment);

/// Dotted-path lookup; ConfigError when absent or of the wrong type.
double param_double(const Json& params, std::string_view path);
std::int64_t param_int(const Json& params, std::string_view path);
bool param_bool(const Json& params, std::string_view path);
Matrix param_matrix(const Json& params, std::string_view path);
Vector param_vector(const Json& params, std::string_view path);

struct Check {
  std::string name;
  bool passed;
  std::string detail;
};

struct RunArtifact {
  std::filesystem::path dir;
  Json summary;
  std::vector<Check> checks;

  bool passed() const;
};

// --- kinematics ------------------------------------------------------------

struct KinematicsResult {
  AreSolution oracle;
  AdpRun adp;
  double relative_error;
  Matrix learned_gain;
  std::vector<TrajectorySample> exploration;  // one sample per update
  std::vector<TrajectorySample> closed_loop;
  double early_energy;  // mean |x|^2 over the first quarter of the closed-loop run
  double late_energy;   // and over the last quarter
};

KinematicsResult compute_kinematics(const Json& params, std::uint64_t seed);
RunArtifact run_example_kinematics(const ExperimentConfig& cfg);

// --- time series -------------------------------------------------------------

struct TimeSeriesSeedResult {
  std::uint64_t seed;
  ViRun run;
  double relative_error;
  double learned_cost;
  double controlled_variance;
  double uncontrolled_variance;
  std::vector<TrajectorySample> controlled;
  std::vector<TrajectorySample> uncontrolled;
};

struct TimeSeriesResult {
  AreSolution oracle;
  double optimal_cost;
  std::vector<TimeSeriesSeedResult> seeds;
  double median_error;
};

TimeSeriesResult compute_timeseries(const Json& params, std::uint64_t seed);
RunArtifact run_example_timeseries(const ExperimentConfig& cfg);

// --- portfolio ---------------------------------------------------------------

struct PortfolioResult {
  Market market;
  std::vector<double> estimated_excess;
  NetworkRun network;
  std::vector<double> gains;
  std::vector<double> closed_form;  // decoupled scalar roots on the estimated rates
  std::optional<CoupledSolution> oracle;
  std::string oracle_error;
  std::vector<double> t;
  std::vector<std::vector<double>> prices;  // per time: bond, then stocks
  std::vector<double> wealth_learned;
  std::vector<double> wealth_uniform;
  double mean_learned, var_learned, mean_uniform, var_uniform;
};

PortfolioResult compute_portfolio(const Json& params, std::uint64_t seed);
RunArtifact run_example_portfolio(const ExperimentConfig& cfg);

// --- custom and suite --------------------------------------------------------

RunArtifact run_custom(const ExperimentConfig& cfg);
RunArtifact run_random_suite(const ExperimentConfig& cfg);

/// Dispatches on cfg.experiment.
RunArtifact run_experiment(const ExperimentConfig& cfg);

/// Writes config.json, summary.json (with the checks) into artifact.dir.
void write_artifact_metadata(const ExperimentConfig& cfg, RunArtifact& artifact,
                             double wall_seconds);

}  // namespace robust_dp

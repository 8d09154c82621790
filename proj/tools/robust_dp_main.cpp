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

// robust-dp <experiment> [--config FILE] [--seed N] [--out DIR] [--set key=value...]
// robust-dp suite
//
// Exit codes: 0 every check passed, 1 a check failed, 2 usage or config error.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "robust_dp/experiments.hpp"

namespace {

int run(const std::string& experiment, const std::string& config_file,
        const std::optional<std::uint64_t>& seed, const std::string& out,
        const std::vector<std::string>& overrides, bool print_config) {
  using namespace robust_dp;
  const ExperimentConfig cfg = resolve_config(
      experiment, config_file.empty() ? std::nullopt : std::optional<std::filesystem::path>(config_file),
      seed, out.empty() ? std::nullopt : std::optional<std::filesystem::path>(out), overrides);
  if (print_config) {
    std::cout << cfg.to_json().dump(2) << '\n';
    return 0;
  }
  const RunArtifact art = run_experiment(cfg);
  for (const auto& c : art.checks) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
  }
  std::cout << "artifacts in " << art.dir.string() << '\n';
  return art.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust value iteration and adaptive dynamic programming experiments"};
  app.require_subcommand(1);

  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> overrides;
  bool print_config = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_file, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Base random seed");
    sub->add_option("--out", out, "Output directory");
    sub->add_option("--set", overrides, "Override a parameter, e.g. vi.h0=0.1")->allow_extra_args(false);
    sub->add_flag("--print-config", print_config, "Print the resolved configuration and exit");
  };

  std::string chosen;
  for (const auto& name : robust_dp::experiment_names()) {
    CLI::App* sub = app.add_subcommand(name, "Run the " + name + " experiment");
    add_common(sub);
    sub->callback([&chosen, name] { chosen = name; });
  }
  CLI::App* suite = app.add_subcommand("suite", "Run the acceptance suite (alias of random-suite)");
  add_common(suite);
  suite->callback([&chosen] { chosen = "random-suite"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    return run(chosen, config_file, seed, out, overrides, print_config);
  } catch (const robust_dp::ConfigError& e) {
    std::cerr << "robust-dp: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "robust-dp: " << chosen << " failed: " << e.what() << '\n';
    return 1;
  }
}

// Copyright 2026 The qfeedback Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef QFB_CLI_H
#define QFB_CLI_H

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qfb/models.h"

namespace YAML {
class Node;
}

namespace qfb::cli {

enum ExitCode : int {
    exit_ok = 0,
    exit_threshold_failure = 1,
    exit_config_error = 2,
};

enum class Engine { deterministic, trajectories, compare, embed_check, kernel_check };
enum class OutputFormat { csv, json };
enum class CompareMode { exact, monte_carlo };

std::string_view to_string(Engine e);
Engine engine_from_string(std::string_view name);
OutputFormat format_from_string(std::string_view name);

struct ModelConfig {
    std::string name = "qubit_counting";
    RuleConfig rule;
    std::optional<double> lambda, bin_range, omega, delta_t, gain, lattice_step;
    std::optional<int> n_bins;
    std::optional<std::int64_t> lattice_radius;
    std::optional<DensityMatrix> rho0;
};

struct EmbedCheckConfig {
    std::vector<std::size_t> memory{0, 1, 2, 5};
    std::int64_t steps = 10'000;
    std::uint64_t seed = 1;
    double tolerance = 1e-12;
};

struct KernelCheckConfig {
    double gamma = 1.0;
    double t_max = 2.0;
    std::vector<double> delta_ts{0.04, 0.02, 0.01, 0.005};
    std::string drive = "constant";
    double ratio_target = 2.0;
    double ratio_tolerance = 0.4;
};

/// Everything a run needs. Parsed strictly: unknown keys are errors.
struct RunConfig {
    ModelConfig model;
    std::optional<std::vector<GridAxis>> lattice;
    Engine engine = Engine::deterministic;
    std::optional<std::int64_t> n_steps;
    std::uint64_t n_traj = 1000;
    std::optional<std::uint64_t> seed;
    double prune = 1e-12;
    std::size_t max_entries = 1'000'000;
    std::uint64_t path_cap = default_path_cap;
    unsigned threads = 1;
    CompareMode compare_mode = CompareMode::exact;
    std::filesystem::path out_dir = "out";
    OutputFormat format = OutputFormat::csv;
    std::uint64_t dump_trajectories = 0;
    EmbedCheckConfig embed;
    KernelCheckConfig kernel;
};

/// Throws ConfigError naming the offending key.
RunConfig parse_config(const YAML::Node &root);
RunConfig parse_config_text(const std::string &text);
RunConfig load_config(const std::filesystem::path &path);

ModelSpec build_model(const RunConfig &cfg);

// Each command writes its files into cfg.out_dir, prints a short summary to
// `log` and returns an ExitCode.
int cmd_simulate_deterministic(const RunConfig &cfg, std::ostream &log);
int cmd_simulate_trajectories(const RunConfig &cfg, std::ostream &log);
int cmd_compare(const RunConfig &cfg, std::ostream &log);
int cmd_embed_check(const RunConfig &cfg, std::ostream &log);
int cmd_kernel_check(const RunConfig &cfg, std::ostream &log);

int run_command(const RunConfig &cfg, std::ostream &log);

/// Full command line: `qfb CONFIG [--engine E] [--seed S] [--out DIR]
/// [--format csv|json] [--threads N]`.
int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

}  // namespace qfb::cli

#endif

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

#include "qfb/cli.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "json.hpp"
#include "qfb/errors.h"

using namespace qfb;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("qfb_cli_test_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override {
        fs::remove_all(dir_);
    }

    // Writes `yaml` to a config file and runs the command line on it.
    int run(const std::string &yaml, std::vector<std::string> extra = {}) {
        fs::path cfg = dir_ / "config.yaml";
        std::ofstream(cfg) << yaml;
        std::vector<std::string> args{"qfb", cfg.string()};
        args.insert(args.end(), extra.begin(), extra.end());
        std::vector<const char *> argv;
        for (const auto &a : args) {
            argv.push_back(a.c_str());
        }
        out_.str("");
        err_.str("");
        return cli::run(static_cast<int>(argv.size()), argv.data(), out_, err_);
    }

    std::string out_yaml(const std::string &sub = "out") const {
        return "output:\n  dir: " + (dir_ / sub).string() + "\n";
    }

    static std::string read(const fs::path &p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream s;
        s << in.rdbuf();
        return s.str();
    }

    json read_json(const fs::path &p) const {
        return json::parse(read(p));
    }

    fs::path dir_;
    std::ostringstream out_;
    std::ostringstream err_;
};

}  // namespace

TEST_F(CliTest, unknown_key_is_named) {
    EXPECT_EQ(run("model:\n  name: qubit_counting\n  bogus: 1\n" + out_yaml()), 2);
    EXPECT_NE(err_.str().find("model.bogus"), std::string::npos) << err_.str();
    EXPECT_EQ(run("runn:\n  n_steps: 1\n"), 2);
    EXPECT_NE(err_.str().find("runn"), std::string::npos);
}

TEST_F(CliTest, rejects_bad_values) {
    EXPECT_EQ(run("model:\n  name: qubit_gaussian_feedback\n  lambda: .nan\n" + out_yaml()), 2);
    EXPECT_EQ(run("run:\n  n_steps: -3\n" + out_yaml()), 2);
    EXPECT_EQ(run("model:\n  name: qubit_counting\n  rule: {kind: markovian, beta: 0.5}\n" + out_yaml()), 2);
    EXPECT_EQ(run("model:\n  name: qubit_counting\n  rho0: [[1, 0], [0, 1]]\n" + out_yaml()), 2);
    EXPECT_EQ(run("model:\n  name: no_such_model\n" + out_yaml()), 2);
    EXPECT_EQ(run(out_yaml(), {"--engine", "nope"}), 2);
    EXPECT_EQ(run(out_yaml(), {"--threads"}), 2);
    EXPECT_FALSE(fs::exists(dir_ / "out" / "summary.json"));
}

TEST_F(CliTest, trajectories_require_a_seed) {
    EXPECT_EQ(run("run:\n  engine: trajectories\n  n_traj: 10\n" + out_yaml()), 2);
    EXPECT_NE(err_.str().find("seed"), std::string::npos);
    EXPECT_EQ(run("run:\n  engine: trajectories\n  n_traj: 10\n" + out_yaml(), {"--seed", "4"}), 0);
}

TEST_F(CliTest, zero_steps_write_only_the_initial_snapshot) {
    ASSERT_EQ(run("run:\n  n_steps: 0\n" + out_yaml()), 0) << err_.str();
    std::string csv = read(dir_ / "out" / "snapshots.csv");
    EXPECT_EQ(csv, "# qfb-snapshots v1\nstep,index,y0,trace,bloch_x,bloch_y,bloch_z\n0,0,0,1,0,0,0\n");
    json summary = read_json(dir_ / "out" / "summary.json");
    EXPECT_EQ(summary["n_steps"], 0);
    EXPECT_EQ(summary["final"]["step"], 0);
}

TEST_F(CliTest, counting_snapshots) {
    ASSERT_EQ(run("model:\n  name: qubit_counting\n  rho0: mixed\nrun:\n  n_steps: 3\n" + out_yaml()), 0);
    std::string csv = read(dir_ / "out" / "snapshots.csv");
    EXPECT_NE(csv.find("\n3,0,0,0.5,0,0,1\n3,3,3,0.5,0,0,-1\n"), std::string::npos) << csv;
    json summary = read_json(dir_ / "out" / "summary.json");
    EXPECT_EQ(summary["engine"], "deterministic");
    EXPECT_EQ(summary["final"]["trace_sum"], 1.0);
    EXPECT_EQ(summary["final"]["clip_count"], 0);
    EXPECT_LE(summary["max_conservation_defect"].get<double>(), 1e-12);

    ASSERT_EQ(run("run:\n  n_steps: 2\n" + out_yaml("json"), {"--format", "json"}), 0);
    json doc = read_json(dir_ / "json" / "snapshots.json");
    EXPECT_EQ(doc["format"], "qfb-snapshots");
    EXPECT_EQ(doc["snapshots"].size(), 3u);
}

TEST_F(CliTest, compare_identity_model) {
    ASSERT_EQ(run("model:\n  name: identity\nrun:\n  engine: compare\n  n_steps: 4\n" + out_yaml()), 0);
    json report = read_json(dir_ / "out" / "compare_report.json");
    EXPECT_EQ(report["max_abs_difference"], 0.0);
    EXPECT_EQ(report["pass"], true);
}

TEST_F(CliTest, compare_counting_exact) {
    ASSERT_EQ(run("run:\n  engine: compare\n  n_steps: 8\n  prune: 0\n" + out_yaml()), 0) << err_.str();
    json report = read_json(dir_ / "out" / "compare_report.json");
    EXPECT_LE(report["max_abs_difference"].get<double>(), 1e-10);
    EXPECT_EQ(report["paths"], 256);
    EXPECT_EQ(report["det_clip_count"], 0);
}

TEST_F(CliTest, compare_detects_mismatched_lattice) {
    // Off-grid step: the engine projects after every step, the oracle once.
    std::string yaml = "lattice:\n  - {min: 0, max: 3, step: 0.75}\nrun:\n  engine: compare\n  n_steps: 3\n";
    EXPECT_EQ(run(yaml + out_yaml()), 1);
    json report = read_json(dir_ / "out" / "compare_report.json");
    EXPECT_GT(report["max_abs_difference"].get<double>(), 0.1);
    EXPECT_EQ(report["pass"], false);

    // Too small a lattice clips.
    ASSERT_EQ(run("lattice:\n  - {min: 0, max: 1, step: 1}\nrun:\n  n_steps: 3\n" + out_yaml("clip")), 0);
    json summary = read_json(dir_ / "clip" / "summary.json");
    EXPECT_GT(summary["final"]["clip_count"].get<int>(), 0);
    EXPECT_FALSE(summary["warnings"].empty());
}

TEST_F(CliTest, compare_monte_carlo) {
    ASSERT_EQ(run("run:\n  engine: compare\n  n_steps: 3\n  n_traj: 20000\n  seed: 3\ncompare:\n  mode: monte_carlo\n" +
                  out_yaml()),
              0)
        << out_.str();
    json report = read_json(dir_ / "out" / "compare_report.json");
    EXPECT_EQ(report["mode"], "monte_carlo");
    EXPECT_LE(report["total_variation"].get<double>(), 0.02);
}

TEST_F(CliTest, trajectory_outputs_are_byte_identical) {
    std::string yaml = "model:\n  name: qubit_gaussian_feedback\n  rule: {kind: momentum, beta: 0.5}\n"
                       "run:\n  engine: trajectories\n  n_steps: 10\n  n_traj: 400\n  seed: 17\n";
    auto outputs = [&](const std::string &sub, std::vector<std::string> extra) {
        extra.push_back("--out");
        extra.push_back((dir_ / sub).string());
        EXPECT_EQ(run(yaml + "output:\n  trajectories: 3\n", extra), 0) << err_.str();
        std::map<std::string, std::string> files;
        for (const auto &e : fs::directory_iterator(dir_ / sub)) {
            files[e.path().filename().string()] = read(e.path());
        }
        return files;
    };
    auto a = outputs("a", {});
    auto b = outputs("b", {});
    auto c = outputs("c", {"--threads", "4"});
    EXPECT_EQ(a.size(), 5u);
    EXPECT_TRUE(a.count("trajectory_000002.csv"));
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, c);
    auto d = outputs("d", {"--seed", "18"});
    EXPECT_NE(a.at("ensemble.csv"), d.at("ensemble.csv"));
}

TEST_F(CliTest, embed_check) {
    ASSERT_EQ(run("run:\n  engine: embed-check\nembed_check:\n  memory: [0, 3]\n  steps: 2000\n" + out_yaml()), 0);
    json report = read_json(dir_ / "out" / "embed_report.json");
    ASSERT_EQ(report["checks"].size(), 2u);
    EXPECT_EQ(report["checks"][0]["memory"], 0);
    EXPECT_EQ(report["checks"][1]["memory"], 3);
    EXPECT_LE(report["checks"][1]["max_abs_difference"].get<double>(), 1e-12);
}

TEST_F(CliTest, kernel_check) {
    ASSERT_EQ(run(out_yaml(), {"--engine", "kernel-check"}), 0) << out_.str();
    json report = read_json(dir_ / "out" / "kernel_report.json");
    EXPECT_EQ(report["rows"].size(), 4u);
    EXPECT_NEAR(report["order_estimate"].get<double>(), 1.0, 0.05);
    // A target the scheme cannot meet is a threshold failure.
    EXPECT_EQ(run("kernel_check:\n  ratio_target: 4.0\n  ratio_tolerance: 0.1\n" + out_yaml(), {"--engine", "kernel-check"}),
              1);
}

TEST_F(CliTest, help_exits_cleanly) {
    const char *argv[] = {"qfb", "--help"};
    std::ostringstream out, err;
    EXPECT_EQ(cli::run(2, argv, out, err), 0);
    EXPECT_NE(out.str().find("--engine"), std::string::npos);
    const char *none[] = {"qfb"};
    EXPECT_EQ(cli::run(1, none, out, err), 2);
}

TEST(parse_config_text, defaults_and_overrides) {
    auto cfg = cli::parse_config_text("model:\n  name: qubit_gaussian_feedback\n  n_bins: 3\nrun:\n  threads: 2\n");
    EXPECT_EQ(cfg.model.name, "qubit_gaussian_feedback");
    EXPECT_EQ(cfg.model.n_bins, 3);
    EXPECT_EQ(cfg.threads, 2u);
    EXPECT_FALSE(cfg.seed);
    auto spec = cli::build_model(cfg);
    EXPECT_EQ(spec.instrument.kraus.num_outcomes(), 3u);
    EXPECT_THROW(cli::parse_config_text("model: [1, 2]\n"), ConfigError);
    EXPECT_THROW(cli::parse_config_text("run:\n  n_traj: 0\n"), ConfigError);
}

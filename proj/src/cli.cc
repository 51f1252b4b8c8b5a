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

#include <cmath>
#include <deque>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "CLI11.hpp"
#include "qfb/errors.h"
#include "qfb/snapshot_io.h"

namespace qfb::cli {

using nlohmann::json;

std::string_view to_string(Engine e) {
    switch (e) {
        case Engine::deterministic:
            return "deterministic";
        case Engine::trajectories:
            return "trajectories";
        case Engine::compare:
            return "compare";
        case Engine::embed_check:
            return "embed-check";
        case Engine::kernel_check:
            return "kernel-check";
    }
    return "?";
}

Engine engine_from_string(std::string_view name) {
    for (Engine e : {Engine::deterministic, Engine::trajectories, Engine::compare, Engine::embed_check,
                     Engine::kernel_check}) {
        if (name == to_string(e)) {
            return e;
        }
    }
    throw ConfigError(fmt::format(
        "unknown engine '{}' (expected deterministic, trajectories, compare, embed-check or kernel-check)", name));
}

OutputFormat format_from_string(std::string_view name) {
    if (name == "csv") {
        return OutputFormat::csv;
    }
    if (name == "json") {
        return OutputFormat::json;
    }
    throw ConfigError(fmt::format("unknown output format '{}' (expected csv or json)", name));
}

namespace {

// ---------------------------------------------------------------------------
// Strict YAML reading.

std::string join_key(const std::string &path, const std::string &key) {
    return path.empty() ? key : path + "." + key;
}

void check_keys(const YAML::Node &node, const std::string &path, const std::set<std::string> &allowed) {
    if (!node.IsMap()) {
        throw ConfigError(fmt::format("'{}' must be a mapping", path.empty() ? "<root>" : path));
    }
    for (const auto &kv : node) {
        auto key = kv.first.as<std::string>();
        if (!allowed.contains(key)) {
            throw ConfigError(fmt::format("unknown config key '{}'", join_key(path, key)));
        }
    }
}

template <typename T>
T scalar(const YAML::Node &node, const std::string &key) {
    if (!node.IsScalar()) {
        throw ConfigError(fmt::format("'{}' must be a scalar", key));
    }
    try {
        return node.as<T>();
    } catch (const YAML::Exception &) {
        throw ConfigError(fmt::format("'{}' has an invalid value '{}'", key, node.Scalar()));
    }
}

double finite_double(const YAML::Node &node, const std::string &key) {
    double v = scalar<double>(node, key);
    if (!std::isfinite(v)) {
        throw ConfigError(fmt::format("'{}' must be finite", key));
    }
    return v;
}

std::int64_t integer(const YAML::Node &node, const std::string &key) {
    return scalar<std::int64_t>(node, key);
}

std::uint64_t unsigned_integer(const YAML::Node &node, const std::string &key) {
    auto v = scalar<std::int64_t>(node, key);
    if (v < 0) {
        throw ConfigError(fmt::format("'{}' must be non-negative", key));
    }
    return static_cast<std::uint64_t>(v);
}

std::vector<double> double_list(const YAML::Node &node, const std::string &key) {
    std::vector<double> out;
    if (node.IsScalar()) {
        out.push_back(finite_double(node, key));
        return out;
    }
    if (!node.IsSequence()) {
        throw ConfigError(fmt::format("'{}' must be a number or a list of numbers", key));
    }
    for (std::size_t i = 0; i < node.size(); ++i) {
        out.push_back(finite_double(node[i], fmt::format("{}[{}]", key, i)));
    }
    return out;
}

ComplexMatrix matrix_from_rows(const YAML::Node &node, const std::string &key) {
    if (!node.IsSequence() || node.size() == 0) {
        throw ConfigError(fmt::format("'{}' must be a non-empty list of rows", key));
    }
    auto d = static_cast<Eigen::Index>(node.size());
    ComplexMatrix m(d, d);
    for (Eigen::Index r = 0; r < d; ++r) {
        auto row = double_list(node[static_cast<std::size_t>(r)], fmt::format("{}[{}]", key, r));
        if (static_cast<Eigen::Index>(row.size()) != d) {
            throw ConfigError(fmt::format("'{}' must be square", key));
        }
        for (Eigen::Index c = 0; c < d; ++c) {
            m(r, c) = row[static_cast<std::size_t>(c)];
        }
    }
    return m;
}

DensityMatrix parse_rho0(const YAML::Node &node, const std::string &key) {
    if (node.IsScalar()) {
        auto name = node.as<std::string>();
        ComplexVector v(2);
        if (name == "mixed") {
            return DensityMatrix::maximally_mixed(2);
        }
        if (name == "zero") {
            return DensityMatrix::basis_state(2, 0);
        }
        if (name == "one") {
            return DensityMatrix::basis_state(2, 1);
        }
        if (name == "plus") {
            v << 1.0, 1.0;
            return DensityMatrix::pure(v);
        }
        if (name == "minus") {
            v << 1.0, -1.0;
            return DensityMatrix::pure(v);
        }
        throw ConfigError(fmt::format("'{}' must be mixed, zero, one, plus, minus or a {{re, im}} matrix", key));
    }
    check_keys(node, key, {"re", "im"});
    if (!node["re"]) {
        throw ConfigError(fmt::format("'{}.re' is required", key));
    }
    ComplexMatrix m = matrix_from_rows(node["re"], key + ".re");
    if (node["im"]) {
        ComplexMatrix im = matrix_from_rows(node["im"], key + ".im");
        if (im.rows() != m.rows()) {
            throw ConfigError(fmt::format("'{}.im' must match '{}.re' in size", key, key));
        }
        m += Complex(0.0, 1.0) * im;
    }
    try {
        return DensityMatrix(std::move(m));
    } catch (const InvalidArgument &e) {
        throw ConfigError(fmt::format("'{}': {}", key, e.what()));
    }
}

RuleConfig parse_rule(const YAML::Node &node, const std::string &path) {
    check_keys(node, path, {"kind", "beta", "memory"});
    RuleConfig rule;
    if (node["kind"]) {
        rule.kind = rule_kind_from_string(scalar<std::string>(node["kind"], path + ".kind"));
    }
    if (node["beta"]) {
        if (rule.kind != RuleKind::momentum) {
            throw ConfigError(fmt::format("'{}.beta' only applies to the momentum rule", path));
        }
        rule.beta = finite_double(node["beta"], path + ".beta");
        if (rule.beta < 0.0 || rule.beta > 1.0) {
            throw ConfigError(fmt::format("'{}.beta' must lie in [0, 1]", path));
        }
    }
    if (node["memory"]) {
        if (rule.kind != RuleKind::history) {
            throw ConfigError(fmt::format("'{}.memory' only applies to the history rule", path));
        }
        rule.memory = unsigned_integer(node["memory"], path + ".memory");
    }
    return rule;
}

ModelConfig parse_model(const YAML::Node &node) {
    ModelConfig m;
    if (!node.IsMap()) {
        throw ConfigError("'model' must be a mapping");
    }
    if (node["name"]) {
        m.name = scalar<std::string>(node["name"], "model.name");
    }
    std::set<std::string> allowed{"name", "rule", "rho0"};
    if (m.name == "qubit_counting") {
        allowed.insert("lattice_step");
    } else if (m.name == "qubit_gaussian_feedback") {
        allowed.insert({"lambda", "n_bins", "bin_range", "omega", "dt", "gain", "lattice_radius"});
    } else if (m.name == "identity") {
        allowed = {"name"};
    } else {
        throw ConfigError(fmt::format(
            "unknown model '{}' (expected qubit_counting, qubit_gaussian_feedback or identity)", m.name));
    }
    check_keys(node, "model", allowed);
    if (node["rule"]) {
        m.rule = parse_rule(node["rule"], "model.rule");
    }
    if (node["rho0"]) {
        m.rho0 = parse_rho0(node["rho0"], "model.rho0");
    }
    auto opt_double = [&](const char *key, std::optional<double> &dst) {
        if (node[key]) {
            dst = finite_double(node[key], std::string("model.") + key);
        }
    };
    opt_double("lambda", m.lambda);
    opt_double("bin_range", m.bin_range);
    opt_double("omega", m.omega);
    opt_double("dt", m.delta_t);
    opt_double("gain", m.gain);
    opt_double("lattice_step", m.lattice_step);
    if (node["n_bins"]) {
        m.n_bins = static_cast<int>(integer(node["n_bins"], "model.n_bins"));
    }
    if (node["lattice_radius"]) {
        m.lattice_radius = integer(node["lattice_radius"], "model.lattice_radius");
    }
    return m;
}

std::vector<GridAxis> parse_lattice(const YAML::Node &node) {
    if (!node.IsSequence() || node.size() == 0) {
        throw ConfigError("'lattice' must be a non-empty list of {min, max, step} axes");
    }
    std::vector<GridAxis> axes;
    for (std::size_t i = 0; i < node.size(); ++i) {
        std::string path = fmt::format("lattice[{}]", i);
        const YAML::Node &a = node[i];
        check_keys(a, path, {"min", "max", "step"});
        for (const char *key : {"min", "max", "step"}) {
            if (!a[key]) {
                throw ConfigError(fmt::format("'{}.{}' is required", path, key));
            }
        }
        axes.push_back(GridAxis{finite_double(a["min"], path + ".min"), finite_double(a["max"], path + ".max"),
                                finite_double(a["step"], path + ".step")});
    }
    return axes;
}

}  // namespace

RunConfig parse_config(const YAML::Node &root) {
    RunConfig cfg;
    if (!root || root.IsNull()) {
        return cfg;
    }
    check_keys(root, "", {"model", "lattice", "run", "compare", "output", "embed_check", "kernel_check"});
    if (root["model"]) {
        cfg.model = parse_model(root["model"]);
    }
    if (root["lattice"]) {
        cfg.lattice = parse_lattice(root["lattice"]);
    }
    if (const auto run = root["run"]) {
        check_keys(run, "run", {"engine", "n_steps", "n_traj", "seed", "prune", "max_entries", "path_cap", "threads"});
        if (run["engine"]) {
            cfg.engine = engine_from_string(scalar<std::string>(run["engine"], "run.engine"));
        }
        if (run["n_steps"]) {
            cfg.n_steps = static_cast<std::int64_t>(unsigned_integer(run["n_steps"], "run.n_steps"));
        }
        if (run["n_traj"]) {
            cfg.n_traj = unsigned_integer(run["n_traj"], "run.n_traj");
            if (cfg.n_traj == 0) {
                throw ConfigError("'run.n_traj' must be at least 1");
            }
        }
        if (run["seed"]) {
            cfg.seed = unsigned_integer(run["seed"], "run.seed");
        }
        if (run["prune"]) {
            cfg.prune = finite_double(run["prune"], "run.prune");
            if (cfg.prune < 0.0) {
                throw ConfigError("'run.prune' must be non-negative");
            }
        }
        if (run["max_entries"]) {
            cfg.max_entries = unsigned_integer(run["max_entries"], "run.max_entries");
        }
        if (run["path_cap"]) {
            cfg.path_cap = unsigned_integer(run["path_cap"], "run.path_cap");
        }
        if (run["threads"]) {
            cfg.threads = static_cast<unsigned>(std::max<std::uint64_t>(1, unsigned_integer(run["threads"], "run.threads")));
        }
    }
    if (const auto cmp = root["compare"]) {
        check_keys(cmp, "compare", {"mode"});
        if (cmp["mode"]) {
            auto mode = scalar<std::string>(cmp["mode"], "compare.mode");
            if (mode == "exact") {
                cfg.compare_mode = CompareMode::exact;
            } else if (mode == "monte_carlo") {
                cfg.compare_mode = CompareMode::monte_carlo;
            } else {
                throw ConfigError(fmt::format("unknown compare mode '{}' (expected exact or monte_carlo)", mode));
            }
        }
    }
    if (const auto out = root["output"]) {
        check_keys(out, "output", {"dir", "format", "trajectories"});
        if (out["dir"]) {
            cfg.out_dir = scalar<std::string>(out["dir"], "output.dir");
        }
        if (out["format"]) {
            cfg.format = format_from_string(scalar<std::string>(out["format"], "output.format"));
        }
        if (out["trajectories"]) {
            cfg.dump_trajectories = unsigned_integer(out["trajectories"], "output.trajectories");
        }
    }
    if (const auto emb = root["embed_check"]) {
        check_keys(emb, "embed_check", {"memory", "steps", "seed", "tolerance"});
        if (emb["memory"]) {
            cfg.embed.memory.clear();
            for (double t : double_list(emb["memory"], "embed_check.memory")) {
                if (t < 0.0 || t != std::floor(t)) {
                    throw ConfigError("'embed_check.memory' entries must be non-negative integers");
                }
                cfg.embed.memory.push_back(static_cast<std::size_t>(t));
            }
        }
        if (emb["steps"]) {
            cfg.embed.steps = static_cast<std::int64_t>(unsigned_integer(emb["steps"], "embed_check.steps"));
        }
        if (emb["seed"]) {
            cfg.embed.seed = unsigned_integer(emb["seed"], "embed_check.seed");
        }
        if (emb["tolerance"]) {
            cfg.embed.tolerance = finite_double(emb["tolerance"], "embed_check.tolerance");
        }
    }
    if (const auto ker = root["kernel_check"]) {
        check_keys(ker, "kernel_check", {"gamma", "t_max", "dt", "drive", "ratio_target", "ratio_tolerance"});
        if (ker["gamma"]) {
            cfg.kernel.gamma = finite_double(ker["gamma"], "kernel_check.gamma");
        }
        if (ker["t_max"]) {
            cfg.kernel.t_max = finite_double(ker["t_max"], "kernel_check.t_max");
        }
        if (ker["dt"]) {
            cfg.kernel.delta_ts = double_list(ker["dt"], "kernel_check.dt");
        }
        if (ker["drive"]) {
            cfg.kernel.drive = scalar<std::string>(ker["drive"], "kernel_check.drive");
            if (cfg.kernel.drive != "constant" && cfg.kernel.drive != "sine") {
                throw ConfigError("'kernel_check.drive' must be constant or sine");
            }
        }
        if (ker["ratio_target"]) {
            cfg.kernel.ratio_target = finite_double(ker["ratio_target"], "kernel_check.ratio_target");
        }
        if (ker["ratio_tolerance"]) {
            cfg.kernel.ratio_tolerance = finite_double(ker["ratio_tolerance"], "kernel_check.ratio_tolerance");
        }
    }
    return cfg;
}

RunConfig parse_config_text(const std::string &text) {
    try {
        return parse_config(YAML::Load(text));
    } catch (const YAML::Exception &e) {
        throw ConfigError(fmt::format("config is not valid YAML: {}", e.what()));
    }
}

RunConfig load_config(const std::filesystem::path &path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw ConfigError(fmt::format("cannot read config file '{}'", path.string()));
    }
    std::stringstream buf;
    buf << f.rdbuf();
    return parse_config_text(buf.str());
}

ModelSpec build_model(const RunConfig &cfg) {
    const ModelConfig &m = cfg.model;
    if (m.name == "qubit_counting") {
        CountingParams p;
        p.rule = m.rule;
        p.n_steps = cfg.n_steps.value_or(p.n_steps);
        p.rho0 = m.rho0;
        p.lattice_step = m.lattice_step;
        p.lattice = cfg.lattice;
        return model_qubit_counting(p);
    }
    if (m.name == "qubit_gaussian_feedback") {
        GaussianFeedbackParams p;
        p.rule = m.rule;
        p.n_steps = cfg.n_steps.value_or(p.n_steps);
        p.rho0 = m.rho0;
        p.lambda = m.lambda.value_or(p.lambda);
        p.n_bins = m.n_bins.value_or(p.n_bins);
        p.bin_range = m.bin_range.value_or(p.bin_range);
        p.omega = m.omega.value_or(p.omega);
        p.delta_t = m.delta_t.value_or(p.delta_t);
        p.gain = m.gain.value_or(p.gain);
        p.lattice_radius = m.lattice_radius;
        p.lattice = cfg.lattice;
        return model_qubit_gaussian_feedback(p);
    }
    if (m.name == "identity") {
        ModelSpec spec = model_identity(cfg.n_steps.value_or(1));
        if (cfg.lattice) {
            spec.instrument.lattice = SignalLattice(*cfg.lattice);
            spec.instrument.validate();
        }
        return spec;
    }
    throw ConfigError(fmt::format("unknown model '{}'", m.name));
}

namespace {

// ---------------------------------------------------------------------------
// Output helpers.

std::filesystem::path prepare_out_dir(const RunConfig &cfg) {
    std::error_code ec;
    std::filesystem::create_directories(cfg.out_dir, ec);
    if (ec) {
        throw ConfigError(fmt::format("cannot create output directory '{}': {}", cfg.out_dir.string(), ec.message()));
    }
    return cfg.out_dir;
}

void write_json(const std::filesystem::path &path, const json &doc, std::ostream &log) {
    io::write_file(path.string(), io::dump_json(doc));
    log << "wrote " << path.string() << "\n";
}

json model_json(const ModelSpec &spec) {
    json params = json::object();
    for (const auto &[k, v] : spec.parameters) {
        params[k] = v;
    }
    return json{{"name", spec.name},
                {"rule", std::string(to_string(spec.rule.kind))},
                {"signal_dim", spec.instrument.lattice.dim()},
                {"hilbert_dim", spec.dim()},
                {"outcomes", spec.instrument.kraus.num_outcomes()},
                {"lattice", io::lattice_to_json(spec.instrument.lattice)},
                {"parameters", params}};
}

json matrix_json(const ComplexMatrix &m) {
    json re = json::array();
    json im = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            re.push_back(m(r, c).real());
            im.push_back(m(r, c).imag());
        }
    }
    return json{{"re", re}, {"im", im}};
}

json state_summary(const ResolvedState &state) {
    json s{{"step", state.step},
           {"trace_sum", state.total_trace()},
           {"leaked_mass", state.leaked_mass},
           {"clip_count", state.clip_count},
           {"support_size", state.entries.size()},
           {"conservation_defect", state.conservation_defect()}};
    if (!state.entries.empty()) {
        s["min_eigenvalue"] = min_entry_eigenvalue(state);
        s["marginal"] = matrix_json(marginal_quantum(state).mat());
    }
    return s;
}

EngineSettings engine_settings(const RunConfig &cfg) {
    return EngineSettings{cfg.prune, cfg.max_entries, cfg.threads};
}

std::uint64_t require_seed(const RunConfig &cfg) {
    if (!cfg.seed) {
        throw ConfigError("'run.seed' is required for trajectory runs (or pass --seed)");
    }
    return *cfg.seed;
}

constexpr double conservation_tolerance = 1e-9;
constexpr double exact_compare_threshold = 1e-10;
constexpr double monte_carlo_sigma_threshold = 4.0;

}  // namespace

int cmd_simulate_deterministic(const RunConfig &cfg, std::ostream &log) {
    ModelSpec spec = build_model(cfg);
    auto dir = prepare_out_dir(cfg);
    const SignalLattice &lattice = spec.instrument.lattice;

    std::ostringstream csv;
    std::optional<io::SnapshotCsvWriter> csv_writer;
    std::optional<io::SnapshotJsonWriter> json_writer;
    if (cfg.format == OutputFormat::csv) {
        csv_writer.emplace(csv, lattice, spec.dim());
    } else {
        json_writer.emplace(lattice, spec.dim());
    }
    double worst_defect = 0.0;
    ResolvedState final_state = det_propagate(
        init_resolved(spec.rho0, spec.y0, lattice), spec.instrument, spec.n_steps, engine_settings(cfg),
        [&](const ResolvedState &s) {
            worst_defect = std::max(worst_defect, s.conservation_defect());
            if (csv_writer) {
                csv_writer->write(s);
            } else {
                json_writer->write(s);
            }
        });

    if (csv_writer) {
        auto path = dir / "snapshots.csv";
        io::write_file(path.string(), csv.str());
        log << "wrote " << path.string() << "\n";
    } else {
        write_json(dir / "snapshots.json", json_writer->document(), log);
    }

    json warnings = json::array();
    if (final_state.leaked_mass > 1e-6) {
        warnings.push_back(fmt::format("leaked mass {:.3e} exceeds 1e-6; the marginal state is subnormalized",
                                       final_state.leaked_mass));
    }
    if (final_state.clip_count > 0) {
        warnings.push_back(fmt::format("{} projections were clipped at the lattice boundary", final_state.clip_count));
    }
    bool conserved = worst_defect <= conservation_tolerance;
    if (!conserved) {
        warnings.push_back(fmt::format("trace conservation violated by {:.3e}", worst_defect));
    }
    json summary{{"engine", "deterministic"},
                 {"model", model_json(spec)},
                 {"n_steps", spec.n_steps},
                 {"prune_threshold", cfg.prune},
                 {"max_conservation_defect", worst_defect},
                 {"final", state_summary(final_state)},
                 {"warnings", warnings}};
    write_json(dir / "summary.json", summary, log);
    log << fmt::format("deterministic: {} steps, trace sum {:.17g}, leaked mass {:.3e}, clips {}\n", spec.n_steps,
                       final_state.total_trace(), final_state.leaked_mass, final_state.clip_count);
    return conserved ? exit_ok : exit_threshold_failure;
}

int cmd_simulate_trajectories(const RunConfig &cfg, std::ostream &log) {
    std::uint64_t seed = require_seed(cfg);
    ModelSpec spec = build_model(cfg);
    auto dir = prepare_out_dir(cfg);

    EnsembleEstimate est =
        ensemble_estimate(spec.rho0, spec.y0, spec.instrument, cfg.n_traj, spec.n_steps, seed, cfg.threads);
    if (cfg.format == OutputFormat::csv) {
        std::ostringstream csv;
        io::write_ensemble_csv(csv, est);
        auto path = dir / "ensemble.csv";
        io::write_file(path.string(), csv.str());
        log << "wrote " << path.string() << "\n";
    } else {
        write_json(dir / "ensemble.json", io::ensemble_to_json(est, seed), log);
    }
    for (std::uint64_t i = 0; i < std::min(cfg.dump_trajectories, cfg.n_traj); ++i) {
        Trajectory traj = run_trajectory(spec.rho0, spec.y0, spec.instrument, spec.n_steps, seed, i);
        std::ostringstream csv;
        io::write_trajectory_csv(csv, traj, spec.instrument.lattice);
        auto path = dir / fmt::format("trajectory_{:06d}.csv", i);
        io::write_file(path.string(), csv.str());
        log << "wrote " << path.string() << "\n";
    }
    json summary{{"engine", "trajectories"},
                 {"model", model_json(spec)},
                 {"n_steps", spec.n_steps},
                 {"n_traj", cfg.n_traj},
                 {"seed", seed},
                 {"final", state_summary(est.resolved)}};
    write_json(dir / "summary.json", summary, log);
    log << fmt::format("trajectories: {} trajectories of {} steps, support {}\n", cfg.n_traj, spec.n_steps,
                       est.resolved.entries.size());
    return exit_ok;
}

int cmd_compare(const RunConfig &cfg, std::ostream &log) {
    ModelSpec spec = build_model(cfg);
    auto dir = prepare_out_dir(cfg);
    const Instrument &inst = spec.instrument;
    ResolvedState det =
        det_propagate(init_resolved(spec.rho0, spec.y0, inst.lattice), inst, spec.n_steps, engine_settings(cfg));

    json report{{"model", model_json(spec)}, {"n_steps", spec.n_steps}, {"prune_threshold", cfg.prune}};
    bool pass = false;
    if (cfg.compare_mode == CompareMode::exact) {
        ResolvedState oracle = enumerate_paths(spec.rho0, spec.y0, inst, spec.n_steps, cfg.path_cap);
        double diff = max_entrywise_difference(det, oracle);
        pass = diff <= exact_compare_threshold;
        report["mode"] = "exact";
        report["paths"] = std::pow(static_cast<double>(inst.kraus.num_outcomes()), static_cast<double>(spec.n_steps));
        report["max_abs_difference"] = diff;
        report["threshold"] = exact_compare_threshold;
        report["det_clip_count"] = det.clip_count;
        report["oracle_clip_count"] = oracle.clip_count;
        report["det_leaked_mass"] = det.leaked_mass;
        report["det_support"] = det.entries.size();
        report["oracle_support"] = oracle.entries.size();
        log << fmt::format("compare (exact): max |det - oracle| = {:.3e}, det clips {}, oracle clips {}\n", diff,
                           det.clip_count, oracle.clip_count);
    } else {
        std::uint64_t seed = require_seed(cfg);
        EnsembleEstimate est = ensemble_estimate(spec.rho0, spec.y0, inst, cfg.n_traj, spec.n_steps, seed, cfg.threads);
        auto reference = signal_distribution(det);
        auto estimate = signal_distribution(est.resolved);
        std::set<LatticeIndex> sites;
        for (const auto &[idx, p] : reference) {
            sites.insert(idx);
        }
        for (const auto &[idx, p] : estimate) {
            sites.insert(idx);
        }
        double n = static_cast<double>(cfg.n_traj);
        double worst = 0.0;
        std::size_t within = 0;
        json bins = json::array();
        for (LatticeIndex idx : sites) {
            double p = reference.contains(idx) ? reference.at(idx) : 0.0;
            double q = estimate.contains(idx) ? estimate.at(idx) : 0.0;
            double sigma = std::sqrt(std::max(0.0, p * (1.0 - p)) / n);
            double dev = sigma > 0.0 ? std::abs(q - p) / sigma : (std::abs(q - p) > 1e-12 ? INFINITY : 0.0);
            worst = std::max(worst, dev);
            within += dev <= monte_carlo_sigma_threshold ? 1 : 0;
            bins.push_back(json{{"index", idx.value},
                                {"y", inst.lattice.point(idx).components},
                                {"reference", p},
                                {"estimate", q},
                                {"sigma", sigma},
                                {"deviation_sigma", std::isfinite(dev) ? json(dev) : json("inf")}});
        }
        pass = within == sites.size();
        double tv = total_variation(reference, estimate);
        report["mode"] = "monte_carlo";
        report["n_traj"] = cfg.n_traj;
        report["seed"] = seed;
        report["total_variation"] = tv;
        report["max_deviation_sigma"] = std::isfinite(worst) ? json(worst) : json("inf");
        report["threshold_sigma"] = monte_carlo_sigma_threshold;
        report["fraction_within_threshold"] = static_cast<double>(within) / static_cast<double>(sites.size());
        report["det_clip_count"] = det.clip_count;
        report["bins"] = bins;
        log << fmt::format("compare (monte carlo): TV = {:.3e}, max deviation {:.2f} sigma over {} bins\n", tv, worst,
                           sites.size());
    }
    report["pass"] = pass;
    write_json(dir / "compare_report.json", report, log);
    return pass ? exit_ok : exit_threshold_failure;
}

int cmd_embed_check(const RunConfig &cfg, std::ostream &log) {
    auto dir = prepare_out_dir(cfg);
    json checks = json::array();
    bool pass = true;
    for (std::size_t depth : cfg.embed.memory) {
        // Random linear rule s' = sum_k a_k s_{n-k} + b x with sum |a_k| = 0.9,
        // driven by a random +-1 outcome stream.
        CounterRng coeff_rng(cfg.embed.seed, depth);
        std::vector<double> a(depth + 1);
        for (auto &c : a) {
            c = 2.0 * coeff_rng.uniform() - 1.0;
        }
        double l1 = std::accumulate(a.begin(), a.end(), 0.0, [](double acc, double c) { return acc + std::abs(c); });
        for (auto &c : a) {
            c *= 0.9 / l1;
        }
        double b = 0.5 + 0.5 * coeff_rng.uniform();
        auto linear = [a, b](std::int64_t, double x, std::span<const double> h) {
            double s = b * x;
            for (std::size_t k = 0; k < h.size(); ++k) {
                s += a[k] * h[k];
            }
            return s;
        };

        UpdateRule embedded = markovian_embed_history(NonMarkovianRule{depth, linear});
        SignalPoint y{std::vector<double>(depth + 1, 0.0)};
        std::deque<double> buffer(depth + 1, 0.0);
        std::vector<double> window(depth + 1);
        CounterRng outcome_rng(cfg.embed.seed, 0x10000 + depth);
        double worst = 0.0;
        for (std::int64_t n = 1; n <= cfg.embed.steps; ++n) {
            double x = (outcome_rng() & 1u) ? 1.0 : -1.0;
            std::copy(buffer.begin(), buffer.end(), window.begin());
            double s_direct = linear(n, x, window);
            buffer.push_front(s_direct);
            buffer.pop_back();
            y = embedded(n, x, y);
            worst = std::max(worst, std::abs(y[0] - s_direct));
        }
        bool ok = worst <= cfg.embed.tolerance;
        pass = pass && ok;
        checks.push_back(json{{"memory", depth}, {"steps", cfg.embed.steps}, {"max_abs_difference", worst}, {"pass", ok}});
        log << fmt::format("embed-check T={}: max |embedded - buffered| = {:.3e} over {} steps\n", depth, worst,
                           cfg.embed.steps);
    }
    json report{{"tolerance", cfg.embed.tolerance}, {"seed", cfg.embed.seed}, {"checks", checks}, {"pass", pass}};
    write_json(dir / "embed_report.json", report, log);
    return pass ? exit_ok : exit_threshold_failure;
}

int cmd_kernel_check(const RunConfig &cfg, std::ostream &log) {
    auto dir = prepare_out_dir(cfg);
    Drive drive = cfg.kernel.drive == "sine" ? Drive([](double t) { return std::sin(t); })
                                             : Drive([](double) { return 1.0; });
    std::vector<KernelConvergenceRow> rows;
    try {
        rows = kernel_convergence_table(cfg.kernel.gamma, cfg.kernel.delta_ts, drive, cfg.kernel.t_max);
    } catch (const InvalidArgument &e) {
        throw ConfigError(fmt::format("kernel_check: {}", e.what()));
    }
    json table = json::array();
    bool pass = rows.size() >= 2;
    double order_sum = 0.0;
    for (const auto &r : rows) {
        json row{{"dt", r.delta_t},
                 {"steps", r.result.steps},
                 {"discrete", r.result.discrete},
                 {"reference", r.result.reference},
                 {"abs_error", r.result.abs_error},
                 {"ratio", r.ratio},
                 {"order", r.order}};
        table.push_back(row);
        if (std::isfinite(r.ratio)) {
            order_sum += r.order;
            pass = pass && std::abs(r.ratio - cfg.kernel.ratio_target) <= cfg.kernel.ratio_tolerance;
        } else if (&r != &rows.front()) {
            pass = false;
        }
        log << fmt::format("kernel-check dt={:<8} error={:.6e} ratio={:.4f}\n", r.delta_t, r.result.abs_error, r.ratio);
    }
    double order = rows.size() >= 2 ? order_sum / static_cast<double>(rows.size() - 1) : NAN;
    json report{{"gamma", cfg.kernel.gamma},
                {"t_max", cfg.kernel.t_max},
                {"drive", cfg.kernel.drive},
                {"rows", table},
                {"order_estimate", order},
                {"ratio_target", cfg.kernel.ratio_target},
                {"ratio_tolerance", cfg.kernel.ratio_tolerance},
                {"pass", pass}};
    write_json(dir / "kernel_report.json", report, log);
    return pass ? exit_ok : exit_threshold_failure;
}

int run_command(const RunConfig &cfg, std::ostream &log) {
    switch (cfg.engine) {
        case Engine::deterministic:
            return cmd_simulate_deterministic(cfg, log);
        case Engine::trajectories:
            return cmd_simulate_trajectories(cfg, log);
        case Engine::compare:
            return cmd_compare(cfg, log);
        case Engine::embed_check:
            return cmd_embed_check(cfg, log);
        case Engine::kernel_check:
            return cmd_kernel_check(cfg, log);
    }
    throw ConfigError("unknown engine");
}

int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
    CLI::App app{"Discrete-time quantum feedback simulator with non-Markovian signal processing", "qfb"};
    std::string config_path;
    std::optional<std::string> engine, out_dir, format;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    app.add_option("config", config_path, "YAML run configuration")->required();
    app.add_option("--engine", engine, "deterministic | trajectories | compare | embed-check | kernel-check");
    app.add_option("--seed", seed, "base seed for trajectory runs");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--format", format, "csv | json");
    app.add_option("--threads", threads, "worker threads");
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::ParseError &e) {
        err << "qfb: " << e.what() << "\n";
        return exit_config_error;
    }

    try {
        RunConfig cfg = load_config(config_path);
        if (engine) {
            cfg.engine = engine_from_string(*engine);
        }
        if (seed) {
            cfg.seed = *seed;
        }
        if (out_dir) {
            cfg.out_dir = *out_dir;
        }
        if (format) {
            cfg.format = format_from_string(*format);
        }
        if (threads) {
            cfg.threads = std::max(1u, *threads);
        }
        return run_command(cfg, out);
    } catch (const ConfigError &e) {
        err << "qfb: config error: " << e.what() << "\n";
        return exit_config_error;
    } catch (const InvalidArgument &e) {
        err << "qfb: invalid parameters: " << e.what() << "\n";
        return exit_config_error;
    } catch (const DimensionError &e) {
        err << "qfb: invalid parameters: " << e.what() << "\n";
        return exit_config_error;
    } catch (const CapacityError &e) {
        err << "qfb: " << e.what() << "\n";
        return exit_config_error;
    } catch (const Error &e) {
        err << "qfb: " << e.what() << "\n";
        return exit_threshold_failure;
    }
}

}  // namespace qfb::cli

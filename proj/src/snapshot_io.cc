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

#include "qfb/snapshot_io.h"

#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "qfb/errors.h"

namespace qfb::io {

using nlohmann::json;

std::string fmt_double(double v) {
    return fmt::format("{:.17g}", v);
}

std::optional<std::array<double, 3>> bloch_vector(const WeightedState &w) {
    if (w.dim() != 2) {
        return std::nullopt;
    }
    double tr = w.trace();
    if (!(tr > 0.0)) {
        return std::nullopt;
    }
    Complex off = w.mat(0, 1) / tr;
    // + 0.0 turns negative zeros into zeros.
    return std::array<double, 3>{2.0 * off.real() + 0.0, -2.0 * off.imag() + 0.0,
                                 (w.mat(0, 0).real() - w.mat(1, 1).real()) / tr + 0.0};
}

namespace {

void write_signal_header(std::ostream &out, std::size_t dim) {
    for (std::size_t k = 0; k < dim; ++k) {
        out << ",y" << k;
    }
}

void write_signal(std::ostream &out, const SignalPoint &y) {
    for (double v : y.components) {
        out << ',' << fmt_double(v);
    }
}

void write_bloch(std::ostream &out, const WeightedState &w) {
    auto b = bloch_vector(w);
    if (b) {
        out << ',' << fmt_double((*b)[0]) << ',' << fmt_double((*b)[1]) << ',' << fmt_double((*b)[2]);
    } else {
        out << ",0,0,0";
    }
}

json matrix_part(const ComplexMatrix &m, bool imag) {
    json arr = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            arr.push_back(imag ? m(r, c).imag() : m(r, c).real());
        }
    }
    return arr;
}

json entry_json(const SignalLattice &lattice, LatticeIndex idx, const WeightedState &w) {
    json e;
    e["index"] = idx.value;
    e["y"] = lattice.point(idx).components;
    e["trace"] = w.trace();
    if (auto b = bloch_vector(w)) {
        e["bloch"] = *b;
    }
    e["re"] = matrix_part(w.mat, false);
    e["im"] = matrix_part(w.mat, true);
    return e;
}

const json &require(const json &j, const char *key) {
    if (!j.is_object() || !j.contains(key)) {
        throw InvalidArgument(fmt::format("snapshot document is missing '{}'", key));
    }
    return j.at(key);
}

}  // namespace

SnapshotCsvWriter::SnapshotCsvWriter(std::ostream &out, const SignalLattice &lattice, Eigen::Index hilbert_dim)
    : out_(out), hilbert_dim_(hilbert_dim) {
    out_ << "# qfb-snapshots v" << format_version << '\n';
    out_ << "step,index";
    write_signal_header(out_, lattice.dim());
    out_ << ",trace";
    if (hilbert_dim_ == 2) {
        out_ << ",bloch_x,bloch_y,bloch_z";
    }
    out_ << '\n';
}

void SnapshotCsvWriter::write(const ResolvedState &state) {
    for (const auto &[idx, w] : state.entries) {
        out_ << state.step << ',' << idx.value;
        write_signal(out_, state.lattice.point(idx));
        out_ << ',' << fmt_double(w.trace());
        if (hilbert_dim_ == 2) {
            write_bloch(out_, w);
        }
        out_ << '\n';
    }
}

json lattice_to_json(const SignalLattice &lattice) {
    json axes = json::array();
    for (const auto &a : lattice.axes()) {
        axes.push_back(json{{"min", a.min}, {"max", a.max}, {"step", a.step}});
    }
    return json{{"axes", axes}};
}

SignalLattice lattice_from_json(const json &j) {
    std::vector<GridAxis> axes;
    for (const auto &a : require(j, "axes")) {
        axes.push_back(GridAxis{require(a, "min").get<double>(), require(a, "max").get<double>(),
                                require(a, "step").get<double>()});
    }
    return SignalLattice(std::move(axes));
}

json resolved_entries_to_json(const ResolvedState &state) {
    json entries = json::array();
    for (const auto &[idx, w] : state.entries) {
        entries.push_back(entry_json(state.lattice, idx, w));
    }
    return entries;
}

SnapshotJsonWriter::SnapshotJsonWriter(const SignalLattice &lattice, Eigen::Index hilbert_dim) {
    doc_["format"] = "qfb-snapshots";
    doc_["version"] = format_version;
    doc_["hilbert_dim"] = hilbert_dim;
    doc_["lattice"] = lattice_to_json(lattice);
    doc_["snapshots"] = json::array();
}

void SnapshotJsonWriter::write(const ResolvedState &state) {
    json snap;
    snap["step"] = state.step;
    snap["leaked_mass"] = state.leaked_mass;
    snap["clip_count"] = state.clip_count;
    snap["entries"] = resolved_entries_to_json(state);
    doc_["snapshots"].push_back(std::move(snap));
}

std::vector<ResolvedState> snapshots_from_json(const json &doc) {
    try {
        if (require(doc, "format").get<std::string>() != "qfb-snapshots") {
            throw InvalidArgument("not a qfb-snapshots document");
        }
        if (require(doc, "version").get<int>() != format_version) {
            throw InvalidArgument("unsupported snapshot format version");
        }
        auto d = require(doc, "hilbert_dim").get<Eigen::Index>();
        SignalLattice lattice = lattice_from_json(require(doc, "lattice"));
        std::vector<ResolvedState> out;
        for (const auto &snap : require(doc, "snapshots")) {
            ResolvedState state{lattice, {}, require(snap, "step").get<std::int64_t>(),
                                require(snap, "leaked_mass").get<double>(), require(snap, "clip_count").get<std::uint64_t>()};
            for (const auto &e : require(snap, "entries")) {
                const auto &re = require(e, "re");
                const auto &im = require(e, "im");
                if (re.size() != static_cast<std::size_t>(d * d) || im.size() != re.size()) {
                    throw InvalidArgument("snapshot entry matrix has the wrong size");
                }
                ComplexMatrix m(d, d);
                for (Eigen::Index r = 0; r < d; ++r) {
                    for (Eigen::Index c = 0; c < d; ++c) {
                        auto k = static_cast<std::size_t>(r * d + c);
                        m(r, c) = Complex(re[k].get<double>(), im[k].get<double>());
                    }
                }
                LatticeIndex idx{require(e, "index").get<std::uint64_t>()};
                if (idx.value >= lattice.size()) {
                    throw InvalidArgument("snapshot entry index lies outside the lattice");
                }
                state.entries.emplace(idx, WeightedState(std::move(m)));
            }
            out.push_back(std::move(state));
        }
        return out;
    } catch (const json::exception &e) {
        throw InvalidArgument(fmt::format("malformed snapshot document: {}", e.what()));
    }
}

void write_ensemble_csv(std::ostream &out, const EnsembleEstimate &est) {
    const auto &state = est.resolved;
    bool qubit = !state.entries.empty() && state.entries.begin()->second.dim() == 2;
    out << "# qfb-ensemble v" << format_version << " n_traj=" << est.n_traj << " step=" << state.step << '\n';
    out << "index";
    write_signal_header(out, state.lattice.dim());
    out << ",weight,std_err";
    if (qubit) {
        out << ",bloch_x,bloch_y,bloch_z";
    }
    out << '\n';
    for (const auto &[idx, w] : state.entries) {
        out << idx.value;
        write_signal(out, state.lattice.point(idx));
        out << ',' << fmt_double(w.trace()) << ',' << fmt_double(est.std_err.at(idx));
        if (qubit) {
            write_bloch(out, w);
        }
        out << '\n';
    }
}

json ensemble_to_json(const EnsembleEstimate &est, std::uint64_t base_seed) {
    json doc;
    doc["format"] = "qfb-ensemble";
    doc["version"] = format_version;
    doc["n_traj"] = est.n_traj;
    doc["base_seed"] = base_seed;
    doc["step"] = est.resolved.step;
    doc["clip_count"] = est.resolved.clip_count;
    doc["lattice"] = lattice_to_json(est.resolved.lattice);
    json entries = resolved_entries_to_json(est.resolved);
    for (auto &e : entries) {
        e["std_err"] = est.std_err.at(LatticeIndex{e["index"].get<std::uint64_t>()});
    }
    doc["entries"] = std::move(entries);
    return doc;
}

void write_trajectory_csv(std::ostream &out, const Trajectory &traj, const SignalLattice &lattice) {
    if (!traj.initial_rho) {
        throw InvalidArgument("trajectory has no initial state");
    }
    Eigen::Index d = traj.initial_rho->dim();
    out << "# qfb-trajectory v" << format_version << " seed=" << traj.seed << " stream=" << traj.stream << '\n';
    out << "step,outcome";
    write_signal_header(out, lattice.dim());
    for (Eigen::Index i = 0; i < d; ++i) {
        out << ",rho_" << i << '_' << i;
    }
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = i + 1; j < d; ++j) {
            out << ",rho_" << i << '_' << j << "_re,rho_" << i << '_' << j << "_im";
        }
    }
    out << '\n';
    auto row = [&](std::int64_t step, std::optional<std::size_t> outcome, LatticeIndex y, const ComplexMatrix &rho) {
        out << step << ',';
        if (outcome) {
            out << *outcome;
        }
        write_signal(out, lattice.point(y));
        for (Eigen::Index i = 0; i < d; ++i) {
            out << ',' << fmt_double(rho(i, i).real());
        }
        for (Eigen::Index i = 0; i < d; ++i) {
            for (Eigen::Index j = i + 1; j < d; ++j) {
                out << ',' << fmt_double(rho(i, j).real()) << ',' << fmt_double(rho(i, j).imag());
            }
        }
        out << '\n';
    };
    row(0, std::nullopt, traj.initial_signal, traj.initial_rho->mat());
    for (const auto &r : traj.records) {
        row(r.step, r.outcome, r.signal, r.rho.mat());
    }
}

namespace {

void dump_json_into(std::string &out, const nlohmann::json &j, int depth) {
    auto newline = [&](int d) {
        out += '\n';
        out.append(static_cast<std::size_t>(2 * d), ' ');
    };
    switch (j.type()) {
        case nlohmann::json::value_t::object: {
            if (j.empty()) {
                out += "{}";
                return;
            }
            out += '{';
            bool first = true;
            for (const auto &[key, value] : j.items()) {
                if (!first) {
                    out += ',';
                }
                first = false;
                newline(depth + 1);
                out += nlohmann::json(key).dump();
                out += ": ";
                dump_json_into(out, value, depth + 1);
            }
            newline(depth);
            out += '}';
            return;
        }
        case nlohmann::json::value_t::array: {
            if (j.empty()) {
                out += "[]";
                return;
            }
            out += '[';
            for (std::size_t i = 0; i < j.size(); ++i) {
                if (i > 0) {
                    out += ',';
                }
                newline(depth + 1);
                dump_json_into(out, j[i], depth + 1);
            }
            newline(depth);
            out += ']';
            return;
        }
        case nlohmann::json::value_t::number_float: {
            double v = j.get<double>();
            out += std::isfinite(v) ? fmt_double(v) : "null";
            return;
        }
        default:
            out += j.dump();
    }
}

}  // namespace

std::string dump_json(const nlohmann::json &doc) {
    std::string out;
    dump_json_into(out, doc, 0);
    out += '\n';
    return out;
}

void write_file(const std::string &path, const std::string &text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw Error(fmt::format("cannot open '{}' for writing", path));
    }
    f << text;
    if (!f) {
        throw Error(fmt::format("failed writing '{}'", path));
    }
}

}  // namespace qfb::io

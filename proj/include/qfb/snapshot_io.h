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

#ifndef QFB_SNAPSHOT_IO_H
#define QFB_SNAPSHOT_IO_H

#include <array>
#include <optional>
#include <ostream>
#include <string>

#include "json.hpp"
#include "qfb/trajectory_engine.h"

namespace qfb::io {

/// Bumped whenever a column or field is added, removed or reordered.
inline constexpr int format_version = 1;

/// 17 significant digits, enough to round-trip any double.
std::string fmt_double(double v);

/// Bloch vector (x, y, z) of w / tr w for qubit states; nullopt otherwise or
/// when the trace vanishes.
std::optional<std::array<double, 3>> bloch_vector(const WeightedState &w);

/// Per-step snapshot CSV:
///
///   # qfb-snapshots v1
///   step,index,y0,...,y{D-1},trace[,bloch_x,bloch_y,bloch_z]
///
/// One row per stored lattice entry, entries in increasing index order. The
/// Bloch columns are present only for qubits.
class SnapshotCsvWriter {
   public:
    SnapshotCsvWriter(std::ostream &out, const SignalLattice &lattice, Eigen::Index hilbert_dim);
    void write(const ResolvedState &state);

   private:
    std::ostream &out_;
    Eigen::Index hilbert_dim_;
};

/// JSON snapshot document. Entries carry the full matrix (row-major "re" and
/// "im") so that snapshots_from_json reconstructs every ResolvedState.
///
///   {"format": "qfb-snapshots", "version": 1, "hilbert_dim": d,
///    "lattice": {"axes": [{"min", "max", "step"}...]},
///    "snapshots": [{"step", "leaked_mass", "clip_count",
///                   "entries": [{"index", "y", "trace", "bloch"?, "re", "im"}...]}...]}
class SnapshotJsonWriter {
   public:
    SnapshotJsonWriter(const SignalLattice &lattice, Eigen::Index hilbert_dim);
    void write(const ResolvedState &state);
    const nlohmann::json &document() const {
        return doc_;
    }

   private:
    nlohmann::json doc_;
};

nlohmann::json lattice_to_json(const SignalLattice &lattice);
SignalLattice lattice_from_json(const nlohmann::json &j);

nlohmann::json resolved_entries_to_json(const ResolvedState &state);

/// Throws InvalidArgument on a malformed document.
std::vector<ResolvedState> snapshots_from_json(const nlohmann::json &doc);

/// Ensemble CSV:
///
///   # qfb-ensemble v1 n_traj=<N> step=<n>
///   index,y0,...,y{D-1},weight,std_err[,bloch_x,bloch_y,bloch_z]
void write_ensemble_csv(std::ostream &out, const EnsembleEstimate &est);
nlohmann::json ensemble_to_json(const EnsembleEstimate &est, std::uint64_t base_seed);

/// Trajectory dump CSV:
///
///   # qfb-trajectory v1 seed=<seed> stream=<stream>
///   step,outcome,y0,...,y{D-1},rho_0_0,...,rho_{d-1}_{d-1},rho_0_1_re,rho_0_1_im,...
///
/// Diagonal entries first, then the strict upper triangle row by row as
/// (re, im) pairs; for a qubit that is rho_0_0,rho_1_1,rho_0_1_re,rho_0_1_im. Step
/// 0 carries the initial state with an empty outcome field.
void write_trajectory_csv(std::ostream &out, const Trajectory &traj, const SignalLattice &lattice);

/// Pretty-prints `doc` like json::dump(2) but with every floating-point value
/// written by fmt_double. Non-finite values become null.
std::string dump_json(const nlohmann::json &doc);

/// Writes `text` to `path` in binary mode; throws Error on failure.
void write_file(const std::string &path, const std::string &text);

}  // namespace qfb::io

#endif

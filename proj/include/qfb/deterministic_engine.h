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

#ifndef QFB_DETERMINISTIC_ENGINE_H
#define QFB_DETERMINISTIC_ENGINE_H

#include <cstdint>
#include <functional>
#include <map>

#include "qfb/instrument.h"

namespace qfb {

/// The feedback-resolved state: for each signal lattice site y, the
/// subnormalized average of all conditional states whose record leads to y.
struct ResolvedState {
    SignalLattice lattice;
    std::map<LatticeIndex, WeightedState> entries;
    std::int64_t step = 0;
    /// Trace removed by pruning; never folded back in.
    double leaked_mass = 0.0;
    std::uint64_t clip_count = 0;

    double total_trace() const;
    /// |sum_y tr rho(y) + leaked_mass - 1|
    double conservation_defect() const {
        return std::abs(total_trace() + leaked_mass - 1.0);
    }
};

struct EngineSettings {
    /// Entries whose trace is at or below this are dropped into leaked_mass.
    double prune_threshold = 1e-12;
    std::size_t max_entries = 1'000'000;
    unsigned threads = 1;
};

/// rho0 placed at the projection of y0. Projection clipping of y0 is counted.
ResolvedState init_resolved(const DensityMatrix &rho0, const SignalPoint &y0, const SignalLattice &lattice);

/// One application of
///   rho_{n+1}(y) = sum_{x', y'} delta(y, f_{n+1}(x', y')) M_{x'}(y') rho_n(y').
/// Contributions are accumulated in (source index, outcome) order regardless
/// of the thread count.
ResolvedState det_step(const ResolvedState &state, const Instrument &inst, const EngineSettings &settings = {});

using StepObserver = std::function<void(const ResolvedState &)>;

/// Applies det_step `n_steps` times. `observer`, when set, sees the initial
/// state and the state after every step.
ResolvedState det_propagate(ResolvedState state, const Instrument &inst, std::int64_t n_steps,
                            const EngineSettings &settings = {}, const StepObserver &observer = {});

/// sum_y rho(y), normalized by its trace. Callers should treat the result as
/// subnormalized when leaked_mass exceeds 1e-6.
DensityMatrix marginal_quantum(const ResolvedState &state);

/// P(y) = tr rho(y).
std::map<LatticeIndex, double> signal_distribution(const ResolvedState &state);

struct ExpectationResult {
    /// tr[obs rho(y)] / tr rho(y), for entries with non-zero trace.
    std::map<LatticeIndex, double> conditional;
    /// sum_y tr[obs rho(y)] / sum_y tr rho(y)
    double aggregate = 0.0;
};

ExpectationResult expectation(const ResolvedState &state, const ComplexMatrix &observable);

/// Largest entrywise |a(y) - b(y)| over the union of supports (absent = 0).
double max_entrywise_difference(const ResolvedState &a, const ResolvedState &b);

/// Smallest Hermitian-part eigenvalue over every stored entry (+inf when empty).
double min_entry_eigenvalue(const ResolvedState &state);

}  // namespace qfb

#endif

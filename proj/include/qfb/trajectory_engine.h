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

#ifndef QFB_TRAJECTORY_ENGINE_H
#define QFB_TRAJECTORY_ENGINE_H

#include <cstdint>
#include <map>
#include <optional>

#include "qfb/deterministic_engine.h"
#include "qfb/rng.h"

namespace qfb {

struct TrajectoryRecord {
    std::int64_t step;
    std::size_t outcome;
    LatticeIndex signal;
    DensityMatrix rho;
};

/// One conditional evolution rho_n given the sampled record x_{1:n}.
struct Trajectory {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    LatticeIndex initial_signal;
    std::optional<DensityMatrix> initial_rho;
    /// Steps 1..n_steps.
    std::vector<TrajectoryRecord> records;
    std::uint64_t clip_count = 0;
};

struct SampledStep {
    std::size_t outcome;
    Projection next;
    DensityMatrix rho;
};

/// Draws x from the Born distribution (negative round-off clamped, then
/// renormalized over outcomes with non-zero weight) and returns the normalized
/// post-instrument state. `step` is the index of the step being produced.
SampledStep sample_step(const DensityMatrix &rho, LatticeIndex signal, std::int64_t step, const Instrument &inst,
                        CounterRng &rng);

/// Trajectory number `stream` under `seed`.
Trajectory run_trajectory(const DensityMatrix &rho0, const SignalPoint &y0, const Instrument &inst,
                          std::int64_t n_steps, std::uint64_t seed, std::uint64_t stream = 0);

/// Monte Carlo estimate of rho_n(y) = E[rho_n delta(y, y_n)].
struct EnsembleEstimate {
    ResolvedState resolved;
    std::uint64_t n_traj = 0;
    /// Binomial standard error of each site's trace weight.
    std::map<LatticeIndex, double> std_err;
};

/// Trajectory i uses stream i of `base_seed`, and the reduction runs in
/// trajectory order, so the result is identical for any thread count.
EnsembleEstimate ensemble_estimate(const DensityMatrix &rho0, const SignalPoint &y0, const Instrument &inst,
                                   std::uint64_t n_traj, std::int64_t n_steps, std::uint64_t base_seed,
                                   unsigned threads = 1);

inline constexpr std::uint64_t default_path_cap = 1'000'000;

/// Exact rho_n(y) by summing unnormalized branches M_{x_n} ... M_{x_1} rho0
/// over every outcome sequence. Each branch carries its signal in exact
/// arithmetic (parametric feedback sees the unprojected value, table feedback
/// its projection) and is binned by projecting the final signal. It agrees with
/// det_step when the rule maps lattice points onto lattice points and nothing
/// clips; otherwise the difference measures the discretization error.
/// `clip_count` counts final values that fell outside the lattice.
ResolvedState enumerate_paths(const DensityMatrix &rho0, const SignalPoint &y0, const Instrument &inst,
                              std::int64_t n_steps, std::uint64_t path_cap = default_path_cap);

/// Total variation distance between two signal distributions.
double total_variation(const std::map<LatticeIndex, double> &p, const std::map<LatticeIndex, double> &q);

}  // namespace qfb

#endif

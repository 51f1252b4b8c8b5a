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

#include "qfb/trajectory_engine.h"

#include <cmath>

#include <fmt/format.h>

#include "qfb/errors.h"
#include "qfb/parallel.h"

namespace qfb {

SampledStep sample_step(const DensityMatrix &rho, LatticeIndex signal, std::int64_t step, const Instrument &inst,
                        CounterRng &rng) {
    if (rho.dim() != inst.kraus.dim()) {
        throw DimensionError(
            fmt::format("state dimension {} does not match instrument dimension {}", rho.dim(), inst.kraus.dim()));
    }
    const std::size_t num_outcomes = inst.kraus.num_outcomes();
    const WeightedState in = WeightedState::from(rho);
    std::vector<WeightedState> branches;
    std::vector<double> probs(num_outcomes);
    branches.reserve(num_outcomes);
    double total = 0.0;
    for (std::size_t x = 0; x < num_outcomes; ++x) {
        branches.push_back(conjugate(inst.kraus.op(x), in));
        double p = branches.back().trace();
        if (!std::isfinite(p)) {
            throw NumericalError("Born probability is not finite");
        }
        probs[x] = p < default_tolerances.unnormalizable_probability ? 0.0 : p;
        total += probs[x];
    }
    if (total == 0.0) {
        throw NumericalError("every outcome has vanishing probability; the Kraus set is not complete");
    }
    if (std::abs(total - 1.0) > default_tolerances.probability_sum) {
        throw NumericalError(fmt::format("Born probabilities sum to {:.17g}", total));
    }

    double u = rng.uniform() * total;
    std::size_t chosen = num_outcomes;
    double cumulative = 0.0;
    for (std::size_t x = 0; x < num_outcomes; ++x) {
        if (probs[x] == 0.0) {
            continue;
        }
        chosen = x;
        cumulative += probs[x];
        if (u < cumulative) {
            break;
        }
    }

    Projection next = instrument_destination(inst, chosen, step, signal);
    WeightedState out = std::move(branches[chosen]);
    if (!inst.channels.is_identity()) {
        out = apply_channel(channel_at(inst.channels, next.index, inst.lattice.point(next.index)), out);
    }
    return SampledStep{chosen, next, out.normalized()};
}

Trajectory run_trajectory(const DensityMatrix &rho0, const SignalPoint &y0, const Instrument &inst,
                          std::int64_t n_steps, std::uint64_t seed, std::uint64_t stream) {
    inst.validate();
    if (n_steps < 0) {
        throw InvalidArgument("step count must be non-negative");
    }
    Projection start = project_to_lattice(inst.lattice, y0);
    Trajectory traj;
    traj.seed = seed;
    traj.stream = stream;
    traj.initial_signal = start.index;
    traj.initial_rho = rho0;
    traj.clip_count = start.clipped() ? 1 : 0;
    traj.records.reserve(static_cast<std::size_t>(n_steps));

    CounterRng rng(seed, stream);
    DensityMatrix rho = rho0;
    LatticeIndex y = start.index;
    for (std::int64_t n = 1; n <= n_steps; ++n) {
        SampledStep s = sample_step(rho, y, n, inst, rng);
        if (s.next.clipped()) {
            ++traj.clip_count;
        }
        y = s.next.index;
        rho = s.rho;
        traj.records.push_back(TrajectoryRecord{n, s.outcome, y, std::move(s.rho)});
    }
    return traj;
}

namespace {

struct FinalSample {
    LatticeIndex signal;
    std::optional<DensityMatrix> rho;
    std::uint64_t clips = 0;
};

FinalSample propagate_final(const DensityMatrix &rho0, LatticeIndex y0, const Instrument &inst, std::int64_t n_steps,
                            std::uint64_t seed, std::uint64_t stream) {
    CounterRng rng(seed, stream);
    FinalSample out{y0, rho0, 0};
    for (std::int64_t n = 1; n <= n_steps; ++n) {
        SampledStep s = sample_step(*out.rho, out.signal, n, inst, rng);
        out.clips += s.next.clipped() ? 1 : 0;
        out.signal = s.next.index;
        out.rho = std::move(s.rho);
    }
    return out;
}

}  // namespace

EnsembleEstimate ensemble_estimate(const DensityMatrix &rho0, const SignalPoint &y0, const Instrument &inst,
                                   std::uint64_t n_traj, std::int64_t n_steps, std::uint64_t base_seed,
                                   unsigned threads) {
    inst.validate();
    if (n_traj < 1) {
        throw InvalidArgument("ensemble needs at least one trajectory");
    }
    if (n_steps < 0) {
        throw InvalidArgument("step count must be non-negative");
    }
    Projection start = project_to_lattice(inst.lattice, y0);

    std::vector<FinalSample> finals(n_traj);
    parallel_for(n_traj, threads, [&](std::size_t i) {
        finals[i] = propagate_final(rho0, start.index, inst, n_steps, base_seed, i);
    });

    EnsembleEstimate est{ResolvedState{inst.lattice, {}, n_steps, 0.0, start.clipped() ? 1u : 0u}, n_traj, {}};
    const double weight = 1.0 / static_cast<double>(n_traj);
    std::map<LatticeIndex, std::uint64_t> counts;
    for (const auto &f : finals) {
        est.resolved.clip_count += f.clips;
        ++counts[f.signal];
        auto [it, inserted] = est.resolved.entries.try_emplace(f.signal, WeightedState(f.rho->mat() * weight));
        if (!inserted) {
            it->second.mat += f.rho->mat() * weight;
        }
    }
    for (const auto &[idx, c] : counts) {
        double p = static_cast<double>(c) * weight;
        est.std_err.emplace(idx, std::sqrt(p * (1.0 - p) * weight));
    }
    return est;
}

ResolvedState enumerate_paths(const DensityMatrix &rho0, const SignalPoint &y0, const Instrument &inst,
                              std::int64_t n_steps, std::uint64_t path_cap) {
    inst.validate();
    if (n_steps < 0) {
        throw InvalidArgument("step count must be non-negative");
    }
    long double paths = std::pow(static_cast<long double>(inst.kraus.num_outcomes()), n_steps);
    if (paths > static_cast<long double>(path_cap)) {
        throw CapacityError(fmt::format("path enumeration needs {:.0Lf} paths, above the cap of {}", paths, path_cap));
    }

    ResolvedState out = init_resolved(rho0, y0, inst.lattice);
    if (n_steps == 0) {
        return out;
    }
    out.entries.clear();
    out.clip_count = 0;
    out.step = n_steps;

    // Signals follow the rule in exact arithmetic; only the final value is
    // binned onto the lattice.
    const std::size_t num_outcomes = inst.kraus.num_outcomes();
    auto descend = [&](auto &self, std::int64_t depth, const SignalPoint &y, const WeightedState &branch) -> void {
        if (depth == n_steps) {
            Projection bin = project_to_lattice(inst.lattice, y);
            if (bin.clipped()) {
                ++out.clip_count;
            }
            auto [it, inserted] = out.entries.try_emplace(bin.index, branch);
            if (!inserted) {
                it->second.mat += branch.mat;
            }
            return;
        }
        for (std::size_t x = 0; x < num_outcomes; ++x) {
            SignalPoint next = inst.rule(depth + 1, inst.kraus.outcome_value(x), y);
            WeightedState w = conjugate(inst.kraus.op(x), branch);
            if (!inst.channels.is_identity()) {
                w = apply_channel(channel_at(inst.channels, project_to_lattice(inst.lattice, next).index, next), w);
            }
            self(self, depth + 1, next, w);
        }
    };
    descend(descend, 0, y0, WeightedState::from(rho0));
    return out;
}

double total_variation(const std::map<LatticeIndex, double> &p, const std::map<LatticeIndex, double> &q) {
    double sum = 0.0;
    auto ip = p.begin();
    auto iq = q.begin();
    while (ip != p.end() || iq != q.end()) {
        if (iq == q.end() || (ip != p.end() && ip->first < iq->first)) {
            sum += std::abs(ip->second);
            ++ip;
        } else if (ip == p.end() || iq->first < ip->first) {
            sum += std::abs(iq->second);
            ++iq;
        } else {
            sum += std::abs(ip->second - iq->second);
            ++ip;
            ++iq;
        }
    }
    return 0.5 * sum;
}

}  // namespace qfb

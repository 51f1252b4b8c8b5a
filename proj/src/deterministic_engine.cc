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

#include "qfb/deterministic_engine.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include <fmt/format.h>

#include "qfb/errors.h"
#include "qfb/parallel.h"

namespace qfb {

double ResolvedState::total_trace() const {
    double total = 0.0;
    for (const auto &[idx, w] : entries) {
        total += w.trace();
    }
    return total;
}

ResolvedState init_resolved(const DensityMatrix &rho0, const SignalPoint &y0, const SignalLattice &lattice) {
    Projection p = project_to_lattice(lattice, y0);
    ResolvedState state{lattice, {}, 0, 0.0, p.clipped() ? 1u : 0u};
    state.entries.emplace(p.index, WeightedState::from(rho0));
    return state;
}

namespace {

void check_compatible(const ResolvedState &state, const Instrument &inst) {
    inst.validate();
    if (!(state.lattice == inst.lattice)) {
        throw DimensionError("resolved state and instrument use different signal lattices");
    }
    for (const auto &[idx, w] : state.entries) {
        if (w.dim() != inst.kraus.dim()) {
            throw DimensionError(fmt::format("resolved entry {} has dimension {}, instrument expects {}", idx.value,
                                             w.dim(), inst.kraus.dim()));
        }
        break;
    }
}

}  // namespace

ResolvedState det_step(const ResolvedState &state, const Instrument &inst, const EngineSettings &settings) {
    check_compatible(state, inst);
    const std::size_t num_outcomes = inst.kraus.num_outcomes();
    const std::int64_t next_step = state.step + 1;

    std::vector<const std::pair<const LatticeIndex, WeightedState> *> sources;
    sources.reserve(state.entries.size());
    for (const auto &entry : state.entries) {
        sources.push_back(&entry);
    }
    const std::size_t n_pairs = sources.size() * num_outcomes;

    std::vector<Projection> dest(n_pairs);
    parallel_for(sources.size(), settings.threads, [&](std::size_t i) {
        for (std::size_t x = 0; x < num_outcomes; ++x) {
            dest[i * num_outcomes + x] = instrument_destination(inst, x, next_step, sources[i]->first);
        }
    });

    // Feedback channels are evaluated once per distinct destination.
    std::vector<LatticeIndex> dest_keys;
    std::vector<std::optional<QuantumChannel>> dest_channels;
    if (!inst.channels.is_identity()) {
        dest_keys.reserve(n_pairs);
        for (const auto &d : dest) {
            dest_keys.push_back(d.index);
        }
        std::sort(dest_keys.begin(), dest_keys.end());
        dest_keys.erase(std::unique(dest_keys.begin(), dest_keys.end()), dest_keys.end());
        dest_channels.resize(dest_keys.size());
        parallel_for(dest_keys.size(), settings.threads, [&](std::size_t i) {
            dest_channels[i] = channel_at(inst.channels, dest_keys[i], inst.lattice.point(dest_keys[i]));
        });
    }
    auto channel_for = [&](LatticeIndex idx) -> const QuantumChannel & {
        auto it = std::lower_bound(dest_keys.begin(), dest_keys.end(), idx);
        return *dest_channels[static_cast<std::size_t>(it - dest_keys.begin())];
    };

    std::vector<WeightedState> contrib(n_pairs);
    parallel_for(sources.size(), settings.threads, [&](std::size_t i) {
        const WeightedState &rho = sources[i]->second;
        for (std::size_t x = 0; x < num_outcomes; ++x) {
            std::size_t k = i * num_outcomes + x;
            WeightedState w = conjugate(inst.kraus.op(x), rho);
            if (!inst.channels.is_identity()) {
                w = apply_channel(channel_for(dest[k].index), w);
            }
            contrib[k] = std::move(w);
        }
    });

    ResolvedState next{state.lattice, {}, next_step, state.leaked_mass, state.clip_count};
    for (std::size_t k = 0; k < n_pairs; ++k) {
        if (dest[k].clipped()) {
            ++next.clip_count;
        }
        auto [it, inserted] = next.entries.try_emplace(dest[k].index, std::move(contrib[k]));
        if (!inserted) {
            it->second.mat += contrib[k].mat;
        }
    }

    for (auto it = next.entries.begin(); it != next.entries.end();) {
        double tr = it->second.trace();
        if (tr <= settings.prune_threshold) {
            next.leaked_mass += tr;
            it = next.entries.erase(it);
        } else {
            ++it;
        }
    }
    if (next.entries.size() > settings.max_entries) {
        throw CapacityError(fmt::format(
            "resolved state support grew to {} entries (limit {}); use a coarser lattice or a higher prune threshold",
            next.entries.size(), settings.max_entries));
    }
    return next;
}

ResolvedState det_propagate(ResolvedState state, const Instrument &inst, std::int64_t n_steps,
                            const EngineSettings &settings, const StepObserver &observer) {
    if (n_steps < 0) {
        throw InvalidArgument("step count must be non-negative");
    }
    if (observer) {
        observer(state);
    }
    for (std::int64_t n = 0; n < n_steps; ++n) {
        state = det_step(state, inst, settings);
        if (observer) {
            observer(state);
        }
    }
    return state;
}

DensityMatrix marginal_quantum(const ResolvedState &state) {
    if (state.entries.empty()) {
        throw InvalidArgument("resolved state has empty support");
    }
    WeightedState sum = WeightedState::zero(state.entries.begin()->second.dim());
    for (const auto &[idx, w] : state.entries) {
        sum.mat += w.mat;
    }
    return sum.normalized();
}

std::map<LatticeIndex, double> signal_distribution(const ResolvedState &state) {
    std::map<LatticeIndex, double> out;
    for (const auto &[idx, w] : state.entries) {
        out.emplace_hint(out.end(), idx, w.trace());
    }
    return out;
}

ExpectationResult expectation(const ResolvedState &state, const ComplexMatrix &observable) {
    require_square_finite(observable, "observable");
    double defect = hermiticity_defect(observable);
    if (defect > default_tolerances.hermiticity) {
        throw InvalidArgument(fmt::format("observable is not Hermitian (defect {:.3e})", defect));
    }
    ExpectationResult out;
    double weighted = 0.0;
    double total = 0.0;
    for (const auto &[idx, w] : state.entries) {
        if (observable.rows() != w.dim()) {
            throw DimensionError("observable dimension does not match the resolved state");
        }
        double tr = w.trace();
        double value = (observable * w.mat).trace().real();
        weighted += value;
        total += tr;
        if (tr > 0.0) {
            out.conditional.emplace_hint(out.conditional.end(), idx, value / tr);
        }
    }
    if (!(total > 0.0)) {
        throw InvalidArgument("resolved state carries no weight");
    }
    out.aggregate = weighted / total;
    return out;
}

double max_entrywise_difference(const ResolvedState &a, const ResolvedState &b) {
    double worst = 0.0;
    auto ia = a.entries.begin();
    auto ib = b.entries.begin();
    while (ia != a.entries.end() || ib != b.entries.end()) {
        if (ib == b.entries.end() || (ia != a.entries.end() && ia->first < ib->first)) {
            worst = std::max(worst, ia->second.mat.cwiseAbs().maxCoeff());
            ++ia;
        } else if (ia == a.entries.end() || ib->first < ia->first) {
            worst = std::max(worst, ib->second.mat.cwiseAbs().maxCoeff());
            ++ib;
        } else {
            worst = std::max(worst, (ia->second.mat - ib->second.mat).cwiseAbs().maxCoeff());
            ++ia;
            ++ib;
        }
    }
    return worst;
}

double min_entry_eigenvalue(const ResolvedState &state) {
    double lo = std::numeric_limits<double>::infinity();
    for (const auto &[idx, w] : state.entries) {
        lo = std::min(lo, min_eigenvalue(w.mat));
    }
    return lo;
}

}  // namespace qfb

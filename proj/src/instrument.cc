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

#include "qfb/instrument.h"

#include <fmt/format.h>

#include "qfb/errors.h"

namespace qfb {

ChannelFamily ChannelFamily::table(ChannelTable table) {
    if (table.channels.empty()) {
        throw InvalidArgument("channel table is empty");
    }
    Eigen::Index d = table.channels.begin()->second.dim();
    for (const auto &[idx, ch] : table.channels) {
        if (ch.dim() != d) {
            throw DimensionError(fmt::format("channel table entry {} has dimension {}, expected {}", idx.value,
                                             ch.dim(), d));
        }
    }
    return ChannelFamily(std::move(table), d, false);
}

ChannelFamily ChannelFamily::parametric(HamiltonianFeedback feedback, const ToleranceSettings &tol) {
    require_square_finite(feedback.base, "feedback base Hamiltonian");
    Eigen::Index d = feedback.base.rows();
    bool trivial = feedback.base.isZero(0.0);
    auto check = [&](const ComplexMatrix &h, std::string_view what) {
        require_square_finite(h, what);
        if (h.rows() != d) {
            throw DimensionError(fmt::format("{} has dimension {}, expected {}", what, h.rows(), d));
        }
        double defect = hermiticity_defect(h);
        if (defect > tol.hermiticity) {
            throw InvalidArgument(fmt::format("{} is not Hermitian (defect {:.3e})", what, defect));
        }
    };
    check(feedback.base, "feedback base Hamiltonian");
    for (const auto &h : feedback.couplings) {
        check(h, "feedback coupling");
        trivial = trivial && h.isZero(0.0);
    }
    if (!(feedback.delta_t > 0.0) || !std::isfinite(feedback.delta_t)) {
        throw InvalidArgument("feedback duration must be positive");
    }
    return ChannelFamily(std::move(feedback), d, trivial);
}

ChannelFamily ChannelFamily::identity(Eigen::Index dim) {
    return parametric(HamiltonianFeedback{ComplexMatrix::Zero(dim, dim), {}, 1.0});
}

QuantumChannel channel_at(const ChannelFamily &family, LatticeIndex index, const SignalPoint &point) {
    if (const auto *table = std::get_if<ChannelTable>(&family.repr())) {
        auto it = table->channels.find(index);
        if (it == table->channels.end()) {
            throw InvalidArgument(fmt::format("channel table has no entry for lattice index {}", index.value));
        }
        return it->second;
    }
    const auto &fb = std::get<HamiltonianFeedback>(family.repr());
    if (family.is_identity()) {
        return QuantumChannel::identity(family.dim());
    }
    if (fb.couplings.size() > point.size()) {
        throw DimensionError(fmt::format("feedback has {} couplings but the signal has {} components",
                                         fb.couplings.size(), point.size()));
    }
    ComplexMatrix h = fb.base;
    for (std::size_t k = 0; k < fb.couplings.size(); ++k) {
        if (!std::isfinite(point[k])) {
            throw InvalidArgument("feedback signal is not finite");
        }
        h += point[k] * fb.couplings[k];
    }
    ComplexMatrix u = matrix_exponential(Complex(0.0, -fb.delta_t) * h);
    return QuantumChannel::unitary(std::move(u));
}

void Instrument::validate() const {
    if (channels.dim() != kraus.dim()) {
        throw DimensionError(
            fmt::format("feedback channels act on dimension {} but the Kraus set on {}", channels.dim(), kraus.dim()));
    }
    if (rule.dim != lattice.dim()) {
        throw DimensionError(
            fmt::format("update rule has dimension {} but the lattice has {}", rule.dim, lattice.dim()));
    }
    if (const auto *table = std::get_if<ChannelTable>(&channels.repr())) {
        for (std::uint64_t k = 0; k < lattice.size(); ++k) {
            if (!table->channels.contains(LatticeIndex{k})) {
                throw InvalidArgument(fmt::format("channel table has no entry for lattice index {}", k));
            }
        }
    }
}

Projection instrument_destination(const Instrument &inst, std::size_t outcome, std::int64_t step, LatticeIndex from) {
    SignalPoint y = inst.lattice.point(from);
    SignalPoint raw = inst.rule(step, inst.kraus.outcome_value(outcome), y);
    return project_to_lattice(inst.lattice, raw);
}

InstrumentOutput instrument_apply(const Instrument &inst, std::size_t outcome, std::int64_t step, LatticeIndex from,
                                  const WeightedState &rho) {
    if (rho.dim() != inst.kraus.dim()) {
        throw DimensionError(
            fmt::format("state dimension {} does not match instrument dimension {}", rho.dim(), inst.kraus.dim()));
    }
    if (outcome >= inst.kraus.num_outcomes()) {
        throw InvalidArgument(fmt::format("outcome {} outside the alphabet of size {}", outcome,
                                          inst.kraus.num_outcomes()));
    }
    Projection dest = instrument_destination(inst, outcome, step, from);
    WeightedState measured = conjugate(inst.kraus.op(outcome), rho);
    if (!inst.channels.is_identity()) {
        measured = apply_channel(channel_at(inst.channels, dest.index, inst.lattice.point(dest.index)), measured);
    }
    return InstrumentOutput{std::move(measured), dest.index, dest.clipped()};
}

}  // namespace qfb

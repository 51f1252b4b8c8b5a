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

#ifndef QFB_INSTRUMENT_H
#define QFB_INSTRUMENT_H

#include <map>
#include <variant>

#include "qfb/quantum_core.h"
#include "qfb/signal_space.h"

namespace qfb {

/// Explicit lattice-index -> channel lookup.
struct ChannelTable {
    std::map<LatticeIndex, QuantumChannel> channels;
};

/// Unitary feedback exp(-i (H0 + sum_k y_k H_k) dt). `couplings[k]` multiplies
/// signal component k; missing trailing couplings are treated as zero.
struct HamiltonianFeedback {
    ComplexMatrix base;
    std::vector<ComplexMatrix> couplings;
    double delta_t = 1.0;
};

/// The signal-parameterized feedback map y -> L(y).
class ChannelFamily {
   public:
    static ChannelFamily table(ChannelTable table);
    static ChannelFamily parametric(HamiltonianFeedback feedback, const ToleranceSettings &tol = default_tolerances);
    /// L(y) = identity for every y.
    static ChannelFamily identity(Eigen::Index dim);

    Eigen::Index dim() const {
        return dim_;
    }
    bool is_table() const {
        return std::holds_alternative<ChannelTable>(repr_);
    }
    /// True when every channel is the identity and applying it can be skipped.
    bool is_identity() const {
        return trivial_;
    }
    const std::variant<ChannelTable, HamiltonianFeedback> &repr() const {
        return repr_;
    }

   private:
    ChannelFamily(std::variant<ChannelTable, HamiltonianFeedback> repr, Eigen::Index dim, bool trivial)
        : repr_(std::move(repr)), dim_(dim), trivial_(trivial) {
    }

    std::variant<ChannelTable, HamiltonianFeedback> repr_;
    Eigen::Index dim_;
    bool trivial_;
};

/// L(y). Table families look up `index`; parametric families use `point`.
/// Throws InvalidArgument for a missing table entry.
QuantumChannel channel_at(const ChannelFamily &family, LatticeIndex index, const SignalPoint &point);

/// The instrument M_x(y) rho = L(f(x, y)) [K_x rho K_x^dagger] together with
/// the lattice on which the post-update signal lands.
struct Instrument {
    KrausSet kraus;
    ChannelFamily channels;
    UpdateRule rule;
    SignalLattice lattice;

    /// Checks that dimensions of the parts agree; throws DimensionError.
    void validate() const;
};

struct InstrumentOutput {
    WeightedState state;
    LatticeIndex next;
    bool clipped = false;
};

/// Projected destination of outcome `outcome` from lattice site `from` when
/// producing step `step`.
Projection instrument_destination(const Instrument &inst, std::size_t outcome, std::int64_t step, LatticeIndex from);

/// Applies M_x(y) to `rho`, where y is the lattice point at `from` and the
/// update rule is evaluated for the step with index `step`.
InstrumentOutput instrument_apply(const Instrument &inst, std::size_t outcome, std::int64_t step, LatticeIndex from,
                                  const WeightedState &rho);

}  // namespace qfb

#endif

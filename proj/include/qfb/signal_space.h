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

#ifndef QFB_SIGNAL_SPACE_H
#define QFB_SIGNAL_SPACE_H

#include <compare>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace qfb {

/// The embedded signal vector y = (s, auxiliary components...).
struct SignalPoint {
    std::vector<double> components;

    std::size_t size() const {
        return components.size();
    }
    double operator[](std::size_t k) const {
        return components[k];
    }
    bool operator==(const SignalPoint &) const = default;
};

/// Flattened row-major position on a SignalLattice. Component 0 is the most
/// significant digit, so ordering by index orders by s first.
struct LatticeIndex {
    std::uint64_t value = 0;
    auto operator<=>(const LatticeIndex &) const = default;
};

/// Uniform grid for one signal component.
struct GridAxis {
    double min = 0.0;
    double max = 0.0;
    double step = 1.0;

    std::uint64_t count() const;
    double value(std::uint64_t i) const {
        return min + static_cast<double>(i) * step;
    }
};

inline constexpr std::uint64_t default_lattice_size_cap = 10'000'000;

/// Finite product grid over which the resolved state is supported.
class SignalLattice {
   public:
    explicit SignalLattice(std::vector<GridAxis> axes, std::uint64_t size_cap = default_lattice_size_cap);

    std::size_t dim() const {
        return axes_.size();
    }
    const std::vector<GridAxis> &axes() const {
        return axes_;
    }
    std::uint64_t size() const {
        return size_;
    }

    std::vector<std::uint64_t> coords(LatticeIndex idx) const;
    LatticeIndex index(std::span<const std::uint64_t> coords) const;
    SignalPoint point(LatticeIndex idx) const;

    bool operator==(const SignalLattice &other) const;

   private:
    std::vector<GridAxis> axes_;
    std::vector<std::uint64_t> strides_;
    std::uint64_t size_;
};

struct Projection {
    LatticeIndex index;
    /// Number of components that fell outside [min, max] and were saturated.
    std::uint32_t clipped_components = 0;

    bool clipped() const {
        return clipped_components != 0;
    }
};

/// Clamp each component to its axis range, then round to the nearest grid
/// point. Exact halves round toward negative infinity.
Projection project_to_lattice(const SignalLattice &lattice, const SignalPoint &raw);

/// s_{n+1} = g(n+1, x_{n+1}, s_n, s_{n-1}, ..., s_{n-T}). `history` holds
/// (s_n, ..., s_{n-T}), most recent first.
struct NonMarkovianRule {
    std::size_t memory_depth = 0;
    std::function<double(std::int64_t step, double outcome, std::span<const double> history)> g;
};

/// Memoryless update y_{n+1} = f(n+1, x_{n+1}, y_n) on the embedded signal.
/// The step argument is always the index of the value being produced.
struct UpdateRule {
    std::size_t dim = 1;
    std::function<SignalPoint(std::int64_t step, double outcome, const SignalPoint &y)> f;

    /// Evaluates f and checks the output has length `dim` and finite entries.
    SignalPoint operator()(std::int64_t step, double outcome, const SignalPoint &y) const;
};

/// Increment g(n, x, s) of a Markovian rule s_{n+1} = s_n + g(n+1, x_{n+1}, s_n).
using MarkovianDrive = std::function<double(std::int64_t step, double outcome, double s)>;

struct MomentumParams {
    double beta = 0.0;
    double gamma = 0.0;
    double delta_t = 1.0;

    /// beta = 1 - gamma * dt.
    static MomentumParams continuum(double gamma, double delta_t);
    void validate() const;
};

/// D = 1: s_{n+1} = s_n + g(n+1, x, s_n).
UpdateRule markovian_rule(MarkovianDrive g);

/// D = 2 embedding of s_{n+1} = s_n + (1-beta) g + beta (s_n - s_{n-1}) on y = (s, m):
///   m' = beta m + (1 - beta) g(n+1, x, s),  s' = s + m'.
UpdateRule markovian_embed_momentum(MarkovianDrive g, MomentumParams params);

/// D = T + 1 embedding on y = (s, m^(1), ..., m^(T)) with m^(k)_n = s_{n+1-k} - s_{n-k}:
///   s' = g(n+1, x, s, s - m^(1), ..., s - sum_{j<=T} m^(j))
///   m^(1)' = s' - s,  m^(k)' = m^(k-1) for k >= 2.
UpdateRule markovian_embed_history(NonMarkovianRule rule);

/// (s_n, s_{n-1}, ..., s_{n-T}) with s_{n-k} = y[0] - sum_{j=1..k} y[j].
std::vector<double> reconstruct_history(const SignalPoint &y);

/// Outcome-independent drive g(t).
using Drive = std::function<double(double t)>;

struct KernelCheckResult {
    std::int64_t steps = 0;
    double discrete = 0.0;   ///< dt * s_N from the momentum recursion
    double reference = 0.0;  ///< int_0^t (1 - e^{-gamma (t-u)}) g(u) du
    double abs_error = 0.0;
};

/// Runs the momentum recursion with beta = 1 - gamma dt from s = m = 0 up to
/// t_max and compares the rescaled signal dt * s_N with the memory-kernel
/// integral evaluated by adaptive Gauss-Kronrod quadrature.
KernelCheckResult kernel_limit_check(const MomentumParams &params, const Drive &drive, double t_max);

struct KernelConvergenceRow {
    double delta_t;
    KernelCheckResult result;
    double ratio;  ///< previous row's error / this row's error (NaN on the first row)
    double order;  ///< log2(ratio)
};

std::vector<KernelConvergenceRow> kernel_convergence_table(double gamma, std::span<const double> delta_ts,
                                                           const Drive &drive, double t_max);

}  // namespace qfb

#endif

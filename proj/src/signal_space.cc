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

#include "qfb/signal_space.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <fmt/format.h>

#include "qfb/errors.h"

namespace qfb {

std::uint64_t GridAxis::count() const {
    return static_cast<std::uint64_t>(std::floor((max - min) / step + 1e-9)) + 1;
}

SignalLattice::SignalLattice(std::vector<GridAxis> axes, std::uint64_t size_cap) : axes_(std::move(axes)) {
    if (axes_.empty()) {
        throw InvalidArgument("signal lattice needs at least one axis");
    }
    strides_.assign(axes_.size(), 1);
    long double total = 1.0L;
    for (std::size_t k = 0; k < axes_.size(); ++k) {
        const auto &a = axes_[k];
        if (!std::isfinite(a.min) || !std::isfinite(a.max) || !std::isfinite(a.step)) {
            throw InvalidArgument(fmt::format("lattice axis {} has non-finite bounds", k));
        }
        if (!(a.step > 0.0)) {
            throw InvalidArgument(fmt::format("lattice axis {} needs step > 0 (got {})", k, a.step));
        }
        if (!(a.min < a.max)) {
            throw InvalidArgument(fmt::format("lattice axis {} needs min < max (got [{}, {}])", k, a.min, a.max));
        }
        total *= static_cast<long double>(a.count());
    }
    if (total > static_cast<long double>(size_cap)) {
        throw CapacityError(fmt::format("lattice has {:.0Lf} points, above the cap of {}", total, size_cap));
    }
    size_ = static_cast<std::uint64_t>(total);
    for (std::size_t k = axes_.size() - 1; k > 0; --k) {
        strides_[k - 1] = strides_[k] * axes_[k].count();
    }
}

std::vector<std::uint64_t> SignalLattice::coords(LatticeIndex idx) const {
    if (idx.value >= size_) {
        throw InvalidArgument(fmt::format("lattice index {} out of range (size {})", idx.value, size_));
    }
    std::vector<std::uint64_t> c(axes_.size());
    std::uint64_t rest = idx.value;
    for (std::size_t k = 0; k < axes_.size(); ++k) {
        c[k] = rest / strides_[k];
        rest %= strides_[k];
    }
    return c;
}

LatticeIndex SignalLattice::index(std::span<const std::uint64_t> coords) const {
    if (coords.size() != axes_.size()) {
        throw DimensionError(fmt::format("expected {} lattice coordinates, got {}", axes_.size(), coords.size()));
    }
    std::uint64_t v = 0;
    for (std::size_t k = 0; k < axes_.size(); ++k) {
        if (coords[k] >= axes_[k].count()) {
            throw InvalidArgument(fmt::format("coordinate {} out of range on axis {}", coords[k], k));
        }
        v += coords[k] * strides_[k];
    }
    return LatticeIndex{v};
}

SignalPoint SignalLattice::point(LatticeIndex idx) const {
    auto c = coords(idx);
    SignalPoint p;
    p.components.resize(axes_.size());
    for (std::size_t k = 0; k < axes_.size(); ++k) {
        p.components[k] = axes_[k].value(c[k]);
    }
    return p;
}

bool SignalLattice::operator==(const SignalLattice &other) const {
    if (axes_.size() != other.axes_.size()) {
        return false;
    }
    for (std::size_t k = 0; k < axes_.size(); ++k) {
        const auto &a = axes_[k];
        const auto &b = other.axes_[k];
        if (a.min != b.min || a.max != b.max || a.step != b.step) {
            return false;
        }
    }
    return true;
}

Projection project_to_lattice(const SignalLattice &lattice, const SignalPoint &raw) {
    if (raw.size() != lattice.dim()) {
        throw DimensionError(
            fmt::format("signal has {} components but the lattice has {}", raw.size(), lattice.dim()));
    }
    Projection out;
    std::uint64_t flat = 0;
    std::uint64_t stride = 1;
    for (std::size_t k = lattice.dim(); k-- > 0;) {
        const auto &axis = lattice.axes()[k];
        double v = raw[k];
        if (!std::isfinite(v)) {
            throw InvalidArgument(fmt::format("signal component {} is not finite", k));
        }
        double slack = 1e-9 * axis.step;
        if (v < axis.min - slack || v > axis.max + slack) {
            ++out.clipped_components;
        }
        v = std::clamp(v, axis.min, axis.max);
        double t = (v - axis.min) / axis.step;
        auto n = axis.count();
        auto i = static_cast<std::int64_t>(std::ceil(t - 0.5));
        i = std::clamp<std::int64_t>(i, 0, static_cast<std::int64_t>(n) - 1);
        flat += static_cast<std::uint64_t>(i) * stride;
        stride *= n;
    }
    out.index = LatticeIndex{flat};
    return out;
}

SignalPoint UpdateRule::operator()(std::int64_t step, double outcome, const SignalPoint &y) const {
    SignalPoint out = f(step, outcome, y);
    if (out.size() != dim) {
        throw DimensionError(fmt::format("update rule produced {} components, expected {}", out.size(), dim));
    }
    for (double v : out.components) {
        if (!std::isfinite(v)) {
            throw NumericalError("update rule produced a non-finite signal");
        }
    }
    return out;
}

MomentumParams MomentumParams::continuum(double gamma, double delta_t) {
    MomentumParams p{1.0 - gamma * delta_t, gamma, delta_t};
    p.validate();
    if (!(gamma * delta_t < 1.0)) {
        throw InvalidArgument(fmt::format("continuum momentum needs gamma*dt < 1 (got {})", gamma * delta_t));
    }
    return p;
}

void MomentumParams::validate() const {
    if (!(beta >= 0.0 && beta <= 1.0)) {
        throw InvalidArgument(fmt::format("momentum beta must lie in [0, 1] (got {})", beta));
    }
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
        throw InvalidArgument(fmt::format("momentum gamma must be a finite non-negative rate (got {})", gamma));
    }
    if (!(delta_t > 0.0) || !std::isfinite(delta_t)) {
        throw InvalidArgument(fmt::format("momentum time step must be positive (got {})", delta_t));
    }
}

UpdateRule markovian_rule(MarkovianDrive g) {
    return UpdateRule{1, [g = std::move(g)](std::int64_t step, double x, const SignalPoint &y) {
                          return SignalPoint{{y[0] + g(step, x, y[0])}};
                      }};
}

UpdateRule markovian_embed_momentum(MarkovianDrive g, MomentumParams params) {
    params.validate();
    double beta = params.beta;
    return UpdateRule{2, [g = std::move(g), beta](std::int64_t step, double x, const SignalPoint &y) {
                          double s = y[0];
                          double m = beta * y[1] + (1.0 - beta) * g(step, x, s);
                          return SignalPoint{{s + m, m}};
                      }};
}

UpdateRule markovian_embed_history(NonMarkovianRule rule) {
    std::size_t depth = rule.memory_depth;
    return UpdateRule{depth + 1, [g = std::move(rule.g), depth](std::int64_t step, double x, const SignalPoint &y) {
                          std::vector<double> history = reconstruct_history(y);
                          double s_next = g(step, x, history);
                          SignalPoint out;
                          out.components.resize(depth + 1);
                          out.components[0] = s_next;
                          if (depth >= 1) {
                              out.components[1] = s_next - y[0];
                          }
                          for (std::size_t k = 2; k <= depth; ++k) {
                              out.components[k] = y[k - 1];
                          }
                          return out;
                      }};
}

std::vector<double> reconstruct_history(const SignalPoint &y) {
    if (y.size() == 0) {
        throw DimensionError("cannot reconstruct history from an empty signal");
    }
    std::vector<double> h(y.size());
    h[0] = y[0];
    double acc = 0.0;
    for (std::size_t k = 1; k < y.size(); ++k) {
        acc += y[k];
        h[k] = y[0] - acc;
    }
    return h;
}

KernelCheckResult kernel_limit_check(const MomentumParams &params, const Drive &drive, double t_max) {
    params.validate();
    double gdt = params.gamma * params.delta_t;
    if (!(gdt < 0.5)) {
        throw InvalidArgument(fmt::format("kernel check needs gamma*dt < 0.5 for stability (got {})", gdt));
    }
    if (std::abs(params.beta - (1.0 - gdt)) > 1e-12) {
        throw InvalidArgument("kernel check needs beta = 1 - gamma*dt");
    }
    if (!(t_max > 0.0) || !std::isfinite(t_max)) {
        throw InvalidArgument("kernel check horizon must be positive");
    }
    double steps_real = t_max / params.delta_t;
    auto steps = static_cast<std::int64_t>(std::llround(steps_real));
    if (std::abs(steps_real - static_cast<double>(steps)) > 1e-9 * std::max(1.0, steps_real)) {
        throw InvalidArgument(fmt::format("horizon {} is not a multiple of dt = {}", t_max, params.delta_t));
    }

    double dt = params.delta_t;
    UpdateRule rule = markovian_embed_momentum(
        [&drive, dt](std::int64_t step, double, double) { return drive(static_cast<double>(step) * dt); }, params);
    SignalPoint y{{0.0, 0.0}};
    for (std::int64_t n = 1; n <= steps; ++n) {
        y = rule(n, 0.0, y);
    }

    double gamma = params.gamma;
    auto integrand = [&](double u) { return (1.0 - std::exp(-gamma * (t_max - u))) * drive(u); };
    double reference = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, 0.0, t_max, 15, 1e-14);

    KernelCheckResult r;
    r.steps = steps;
    r.discrete = dt * y[0];
    r.reference = reference;
    r.abs_error = std::abs(r.discrete - r.reference);
    return r;
}

std::vector<KernelConvergenceRow> kernel_convergence_table(double gamma, std::span<const double> delta_ts,
                                                           const Drive &drive, double t_max) {
    std::vector<KernelConvergenceRow> rows;
    rows.reserve(delta_ts.size());
    for (double dt : delta_ts) {
        KernelConvergenceRow row{dt, kernel_limit_check(MomentumParams::continuum(gamma, dt), drive, t_max),
                                 std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
        if (!rows.empty()) {
            row.ratio = rows.back().result.abs_error / row.result.abs_error;
            row.order = std::log2(row.ratio);
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace qfb

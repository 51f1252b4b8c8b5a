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

#include "qfb/models.h"

#include <cmath>
#include <numbers>
#include <numeric>

#include <fmt/format.h>

#include "qfb/errors.h"

namespace qfb {

std::string_view to_string(RuleKind kind) {
    switch (kind) {
        case RuleKind::markovian:
            return "markovian";
        case RuleKind::momentum:
            return "momentum";
        case RuleKind::history:
            return "history";
    }
    return "?";
}

RuleKind rule_kind_from_string(std::string_view name) {
    if (name == "markovian") {
        return RuleKind::markovian;
    }
    if (name == "momentum") {
        return RuleKind::momentum;
    }
    if (name == "history") {
        return RuleKind::history;
    }
    throw ConfigError(fmt::format("unknown rule kind '{}' (expected markovian, momentum or history)", name));
}

namespace {

using OutcomeDrive = std::function<double(double outcome)>;

UpdateRule build_rule(const RuleConfig &cfg, OutcomeDrive drive) {
    switch (cfg.kind) {
        case RuleKind::markovian:
            return markovian_rule([drive](std::int64_t, double x, double) { return drive(x); });
        case RuleKind::momentum:
            return markovian_embed_momentum([drive](std::int64_t, double x, double) { return drive(x); },
                                            MomentumParams{cfg.beta, 0.0, 1.0});
        case RuleKind::history:
            return markovian_embed_history(NonMarkovianRule{
                cfg.memory, [drive](std::int64_t, double x, std::span<const double> h) {
                    double mean = std::accumulate(h.begin(), h.end(), 0.0) / static_cast<double>(h.size());
                    return mean + drive(x);
                }});
    }
    throw ConfigError("unknown rule kind");
}

void append_rule_parameters(const RuleConfig &rule, std::vector<std::pair<std::string, double>> &params) {
    if (rule.kind == RuleKind::momentum) {
        params.emplace_back("beta", rule.beta);
    } else if (rule.kind == RuleKind::history) {
        params.emplace_back("memory", static_cast<double>(rule.memory));
    }
}

std::size_t rule_dimension(const RuleConfig &rule) {
    switch (rule.kind) {
        case RuleKind::markovian:
            return 1;
        case RuleKind::momentum:
            return 2;
        case RuleKind::history:
            return rule.memory + 1;
    }
    return 1;
}

SignalLattice checked_lattice(std::vector<GridAxis> axes, const RuleConfig &rule) {
    if (axes.size() != rule_dimension(rule)) {
        throw ConfigError(fmt::format("lattice has {} axes but the {} rule needs {}", axes.size(), to_string(rule.kind),
                                      rule_dimension(rule)));
    }
    return SignalLattice(std::move(axes));
}

ComplexMatrix projector(int k) {
    ComplexMatrix p = ComplexMatrix::Zero(2, 2);
    p(k, k) = 1.0;
    return p;
}

}  // namespace

ModelSpec model_qubit_counting(const CountingParams &params) {
    if (params.n_steps < 0) {
        throw InvalidArgument("step count must be non-negative");
    }
    const RuleConfig &rule = params.rule;
    double top = static_cast<double>(std::max<std::int64_t>(params.n_steps, 1));
    double h = params.lattice_step.value_or(rule.kind == RuleKind::markovian ? 1.0 : 1.0 / 32.0);
    if (!params.lattice_step && rule.kind == RuleKind::history) {
        // Coarsen until the product grid stays below a million points.
        auto points = [&](double step) {
            return (top / step + 1.0) * std::pow(2.0 / step + 1.0, static_cast<double>(rule.memory));
        };
        while (h < 1.0 && points(h) > 1e6) {
            h *= 2.0;
        }
    }

    std::vector<GridAxis> axes;
    if (params.lattice) {
        axes = *params.lattice;
    } else {
        axes.push_back(GridAxis{0.0, top, h});
        if (rule.kind == RuleKind::momentum) {
            axes.push_back(GridAxis{0.0, 1.0, h});
        } else if (rule.kind == RuleKind::history) {
            for (std::size_t k = 0; k < rule.memory; ++k) {
                axes.push_back(GridAxis{-1.0, 1.0, h});
            }
        }
    }

    KrausSet kraus({projector(0), projector(1)}, {0.0, 1.0});
    Instrument inst{std::move(kraus), ChannelFamily::identity(2), build_rule(rule, [](double x) { return x; }),
                    checked_lattice(std::move(axes), rule)};
    inst.validate();

    ModelSpec spec{"qubit_counting",
                   std::move(inst),
                   params.rho0.value_or(DensityMatrix::maximally_mixed(2)),
                   SignalPoint{std::vector<double>(rule_dimension(rule), 0.0)},
                   params.n_steps,
                   1.0,
                   rule,
                   {}};
    spec.parameters.emplace_back("lattice_step", h);
    append_rule_parameters(rule, spec.parameters);
    return spec;
}

namespace {

std::vector<double> bin_centres(int n_bins, double bin_range) {
    std::vector<double> xs(static_cast<std::size_t>(n_bins));
    double dx = 2.0 * bin_range / static_cast<double>(n_bins - 1);
    for (int j = 0; j < n_bins; ++j) {
        xs[static_cast<std::size_t>(j)] = -bin_range + static_cast<double>(j) * dx;
    }
    return xs;
}

void check_gaussian_args(double lambda, int n_bins, double bin_range) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw InvalidArgument(fmt::format("measurement strength must be positive (got {})", lambda));
    }
    if (n_bins < 2) {
        throw InvalidArgument(fmt::format("need at least 2 outcome bins (got {})", n_bins));
    }
    if (!(bin_range > 0.0) || !std::isfinite(bin_range)) {
        throw InvalidArgument(fmt::format("bin range must be positive (got {})", bin_range));
    }
}

}  // namespace

double gaussian_binning_deficit(double lambda, int n_bins, double bin_range) {
    check_gaussian_args(lambda, n_bins, bin_range);
    auto xs = bin_centres(n_bins, bin_range);
    double dx = 2.0 * bin_range / static_cast<double>(n_bins - 1);
    double norm = dx * std::sqrt(lambda / (2.0 * std::numbers::pi));
    double worst = 0.0;
    for (double eig : {1.0, -1.0}) {
        double sum = 0.0;
        for (double x : xs) {
            sum += norm * std::exp(-lambda * (eig - x) * (eig - x) / 2.0);
        }
        worst = std::max(worst, std::abs(1.0 - sum));
    }
    return worst;
}

KrausSet gaussian_kraus(double lambda, int n_bins, double bin_range) {
    check_gaussian_args(lambda, n_bins, bin_range);
    auto xs = bin_centres(n_bins, bin_range);
    std::vector<ComplexMatrix> raw;
    raw.reserve(xs.size());
    ComplexMatrix weight = ComplexMatrix::Zero(2, 2);
    for (double x : xs) {
        ComplexMatrix k = ComplexMatrix::Zero(2, 2);
        k(0, 0) = std::exp(-lambda * (1.0 - x) * (1.0 - x) / 4.0);
        k(1, 1) = std::exp(-lambda * (-1.0 - x) * (-1.0 - x) / 4.0);
        weight += k.adjoint() * k;
        raw.push_back(std::move(k));
    }

    double suggested = 1.0 + 6.0 / std::sqrt(lambda);
    auto too_narrow = [&](double defect) {
        return InvalidArgument(fmt::format(
            "outcome bins over [-{}, {}] cannot resolve the measurement (completeness deficit {:.3e}); "
            "try a bin range of about [-{:.3g}, {:.3g}]",
            bin_range, bin_range, defect, suggested, suggested));
    };
    if (!(weight(0, 0).real() > 1e-250) || !(weight(1, 1).real() > 1e-250)) {
        throw too_narrow(1.0);
    }
    // weight is diagonal; K_x <- K_x weight^{-1/2}.
    ComplexMatrix inv_sqrt = ComplexMatrix::Zero(2, 2);
    inv_sqrt(0, 0) = 1.0 / std::sqrt(weight(0, 0).real());
    inv_sqrt(1, 1) = 1.0 / std::sqrt(weight(1, 1).real());
    for (auto &k : raw) {
        k = k * inv_sqrt;
    }
    double defect = completeness_defect(raw);
    if (defect > 1e-6) {
        throw too_narrow(defect);
    }
    return KrausSet(std::move(raw), std::move(xs));
}

ModelSpec model_qubit_gaussian_feedback(const GaussianFeedbackParams &params) {
    if (params.n_steps < 0) {
        throw InvalidArgument("step count must be non-negative");
    }
    if (!std::isfinite(params.gain) || !std::isfinite(params.omega)) {
        throw InvalidArgument("gain and omega must be finite");
    }
    if (!(params.gain > 0.0)) {
        throw InvalidArgument(fmt::format("drive gain must be positive (got {})", params.gain));
    }
    KrausSet kraus = gaussian_kraus(params.lambda, params.n_bins, params.bin_range);
    const RuleConfig &rule = params.rule;

    std::vector<GridAxis> axes;
    if (params.lattice) {
        axes = *params.lattice;
    } else {
        // Grid spacing that keeps every Markovian increment gain * x on the grid.
        double dx = 2.0 * params.bin_range / static_cast<double>(params.n_bins - 1);
        double h = params.gain * dx * (params.n_bins % 2 == 1 ? 1.0 : 0.5);
        double max_drive = params.gain * params.bin_range;
        std::int64_t per_step = static_cast<std::int64_t>(std::llround(max_drive / h));
        std::int64_t radius =
            params.lattice_radius.value_or(std::max<std::int64_t>(1, per_step * std::max<std::int64_t>(params.n_steps, 1)));
        if (radius < 1) {
            throw InvalidArgument("lattice radius must be at least 1");
        }
        double half = static_cast<double>(radius) * h;
        switch (rule.kind) {
            case RuleKind::markovian:
                axes.push_back(GridAxis{-half, half, h});
                break;
            case RuleKind::momentum:
                axes.push_back(GridAxis{-half, half, h / 4.0});
                axes.push_back(GridAxis{-max_drive, max_drive, h / 4.0});
                break;
            case RuleKind::history:
                axes.push_back(GridAxis{-half, half, h / 2.0});
                for (std::size_t k = 0; k < rule.memory; ++k) {
                    axes.push_back(GridAxis{-2.0 * max_drive, 2.0 * max_drive, h / 2.0});
                }
                break;
        }
    }

    ChannelFamily channels = ChannelFamily::parametric(
        HamiltonianFeedback{ComplexMatrix::Zero(2, 2), {params.omega * pauli::y()}, params.delta_t});
    double gain = params.gain;
    Instrument inst{std::move(kraus), std::move(channels), build_rule(rule, [gain](double x) { return gain * x; }),
                    checked_lattice(std::move(axes), rule)};
    inst.validate();

    ComplexVector plus(2);
    plus << 1.0, 1.0;
    ModelSpec spec{"qubit_gaussian_feedback",
                   std::move(inst),
                   params.rho0.value_or(DensityMatrix::pure(plus)),
                   SignalPoint{std::vector<double>(rule_dimension(rule), 0.0)},
                   params.n_steps,
                   params.delta_t,
                   rule,
                   {}};
    spec.parameters = {{"lambda", params.lambda},
                       {"n_bins", static_cast<double>(params.n_bins)},
                       {"bin_range", params.bin_range},
                       {"omega", params.omega},
                       {"dt", params.delta_t},
                       {"gain", params.gain},
                       {"binning_deficit", gaussian_binning_deficit(params.lambda, params.n_bins, params.bin_range)}};
    append_rule_parameters(rule, spec.parameters);
    return spec;
}

std::pair<ModelSpec, ModelSpec> model_momentum_vs_markov_pair(double beta, std::int64_t n_steps) {
    MomentumParams{beta, 0.0, 1.0}.validate();
    const double h = 1.0 / 32.0;
    CountingParams momentum;
    momentum.n_steps = n_steps;
    momentum.rule = RuleConfig{RuleKind::momentum, beta, 0};
    momentum.lattice_step = h;

    CountingParams markov;
    markov.n_steps = n_steps;
    markov.lattice_step = h;
    return {model_qubit_counting(momentum), model_qubit_counting(markov)};
}

ModelSpec model_identity(std::int64_t n_steps) {
    ComplexVector plus(2);
    plus << 1.0, 1.0;
    Instrument inst{KrausSet({ComplexMatrix::Identity(2, 2)}), ChannelFamily::identity(2),
                    UpdateRule{1, [](std::int64_t, double, const SignalPoint &y) { return y; }},
                    SignalLattice({GridAxis{0.0, 1.0, 1.0}})};
    return ModelSpec{"identity", std::move(inst), DensityMatrix::pure(plus), SignalPoint{{0.0}}, n_steps, 1.0, {}, {}};
}

std::map<std::uint64_t, double> first_component_distribution(const ResolvedState &state) {
    std::map<std::uint64_t, double> out;
    for (const auto &[idx, w] : state.entries) {
        out[state.lattice.coords(idx)[0]] += w.trace();
    }
    return out;
}

}  // namespace qfb

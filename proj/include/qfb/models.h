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

#ifndef QFB_MODELS_H
#define QFB_MODELS_H

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qfb/trajectory_engine.h"

namespace qfb {

enum class RuleKind { markovian, momentum, history };

std::string_view to_string(RuleKind kind);
/// Throws ConfigError for an unknown name.
RuleKind rule_kind_from_string(std::string_view name);

/// Which signal processing a built-in model uses.
///   markovian: s' = s + d(x)
///   momentum:  Markovian drive d(x) wrapped in the beta-momentum embedding (D = 2)
///   history:   s' = mean(s_n, ..., s_{n-T}) + d(x) through the history embedding (D = T + 1)
struct RuleConfig {
    RuleKind kind = RuleKind::markovian;
    double beta = 0.0;
    std::size_t memory = 0;
};

/// A fully assembled simulation: instrument, initial condition and horizon.
struct ModelSpec {
    std::string name;
    Instrument instrument;
    DensityMatrix rho0;
    SignalPoint y0;
    std::int64_t n_steps = 0;
    double delta_t = 1.0;
    RuleConfig rule;
    /// Flat parameter listing for reports.
    std::vector<std::pair<std::string, double>> parameters;

    Eigen::Index dim() const {
        return rho0.dim();
    }
};

struct CountingParams {
    RuleConfig rule;
    std::int64_t n_steps = 3;
    /// Defaults to the maximally mixed state.
    std::optional<DensityMatrix> rho0;
    /// Grid spacing; defaults to 1 for markovian rules and 1/32 otherwise, coarsened
    /// for deep history rules so the grid stays below 10^6 points.
    std::optional<double> lattice_step;
    std::optional<std::vector<GridAxis>> lattice;
};

/// Projective sigma_z measurement with outcomes x in {0, 1}, identity feedback
/// and the counting drive d(x) = x.
ModelSpec model_qubit_counting(const CountingParams &params = {});

struct GaussianFeedbackParams {
    double lambda = 0.5;
    int n_bins = 5;
    /// Outcome bins are centred on a uniform grid over [-bin_range, bin_range].
    double bin_range = 3.0;
    double omega = 1.0;
    double delta_t = 0.1;
    /// Drive d(x) = gain * x.
    double gain = 0.25;
    RuleConfig rule;
    std::int64_t n_steps = 20;
    /// Defaults to |+><+|.
    std::optional<DensityMatrix> rho0;
    /// Half-width of the s axis in grid steps; defaults to the largest
    /// excursion reachable in n_steps.
    std::optional<std::int64_t> lattice_radius;
    std::optional<std::vector<GridAxis>> lattice;
};

/// Binned Gaussian Kraus operators K_x ~ exp(-lambda (sigma_z - x)^2 / 4),
/// renormalized so that sum_x K_x^dagger K_x = 1 holds exactly.
KrausSet gaussian_kraus(double lambda, int n_bins, double bin_range);

/// |1 - sum_x dx sqrt(lambda / 2pi) exp(-lambda (+-1 - x)^2 / 2)|: how much of
/// the continuous outcome density the bin grid misses before renormalization.
double gaussian_binning_deficit(double lambda, int n_bins, double bin_range);

/// Gaussian weak sigma_z measurement with unitary feedback exp(-i omega s sigma_y dt).
ModelSpec model_qubit_gaussian_feedback(const GaussianFeedbackParams &params = {});

/// Counting models that differ only in their rule: (momentum(beta), markovian).
/// Both share the s grid so their signal distributions are directly comparable.
std::pair<ModelSpec, ModelSpec> model_momentum_vs_markov_pair(double beta, std::int64_t n_steps = 20);

/// Single-outcome identity instrument on a qubit with f(x, y) = y.
ModelSpec model_identity(std::int64_t n_steps = 1);

/// Marginal P(s) over the first signal component, keyed by its grid coordinate.
std::map<std::uint64_t, double> first_component_distribution(const ResolvedState &state);

}  // namespace qfb

#endif

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
#include <random>

#include <gtest/gtest.h>

#include "qfb/errors.h"
#include "test_support.h"

using namespace qfb;
using qfb::testing::max_abs;

namespace {

ResolvedState propagate(const ModelSpec &spec, std::int64_t n, double prune = 1e-12) {
    return det_propagate(init_resolved(spec.rho0, spec.y0, spec.instrument.lattice), spec.instrument, n,
                         EngineSettings{prune, 1'000'000, 1});
}

std::pair<double, double> mean_and_variance(const ModelSpec &spec, const ResolvedState &state) {
    double h = spec.instrument.lattice.axes()[0].step;
    double lo = spec.instrument.lattice.axes()[0].min;
    double m1 = 0.0;
    double m2 = 0.0;
    for (const auto &[k, p] : first_component_distribution(state)) {
        double s = lo + static_cast<double>(k) * h;
        m1 += p * s;
        m2 += p * s * s;
    }
    return {m1, m2 - m1 * m1};
}

}  // namespace

TEST(model_qubit_counting, eigenstate_repeats_outcome_zero) {
    CountingParams p;
    p.rho0 = DensityMatrix::basis_state(2, 0);
    ModelSpec spec = model_qubit_counting(p);
    auto s = propagate(spec, 3);
    ASSERT_EQ(s.entries.size(), 1u);
    EXPECT_EQ(s.entries.begin()->first.value, 0u);
    EXPECT_NEAR(s.entries.begin()->second.trace(), 1.0, 1e-15);
}

TEST(model_qubit_counting, marginal_is_dephased_initial_state) {
    std::mt19937_64 rng(19);
    for (int trial = 0; trial < 10; ++trial) {
        CountingParams p;
        p.rho0 = qfb::testing::random_density(2, rng);
        p.n_steps = 1 + trial % 5;
        ModelSpec spec = model_qubit_counting(p);
        auto s = propagate(spec, p.n_steps);
        ComplexMatrix oracle = p.rho0->mat().diagonal().asDiagonal();
        EXPECT_LT(max_abs(marginal_quantum(s).mat() - oracle), 1e-14);
    }
}

TEST(model_qubit_counting, every_rule_composes) {
    for (RuleConfig rule : {RuleConfig{RuleKind::markovian, 0.0, 0}, RuleConfig{RuleKind::momentum, 0.5, 0},
                            RuleConfig{RuleKind::history, 0.0, 3}}) {
        CountingParams p;
        p.rule = rule;
        ModelSpec spec = model_qubit_counting(p);
        EXPECT_NO_THROW(spec.instrument.validate());
        EXPECT_EQ(spec.instrument.lattice.dim(), spec.y0.size());
        auto s = propagate(spec, 3);
        EXPECT_LE(s.conservation_defect(), 1e-9);
    }
    CountingParams bad;
    bad.rule = RuleConfig{RuleKind::momentum, 0.5, 0};
    bad.lattice = std::vector<GridAxis>{{0.0, 3.0, 1.0}};
    EXPECT_THROW(model_qubit_counting(bad), ConfigError);
}

TEST(gaussian_kraus, completeness_and_shape) {
    KrausSet k = gaussian_kraus(0.5, 5, 3.0);
    EXPECT_LE(completeness_defect(k.operators()), 1e-9);
    EXPECT_EQ(k.outcome_values(), (std::vector<double>{-3.0, -1.5, 0.0, 1.5, 3.0}));
    // Renormalization rescales each diagonal element by an x-independent factor.
    double r0 = 0.0;
    double r1 = 0.0;
    for (std::size_t j = 0; j < k.num_outcomes(); ++j) {
        double x = k.outcome_value(j);
        double a = k.op(j)(0, 0).real() / std::exp(-0.5 * (1 - x) * (1 - x) / 4);
        double b = k.op(j)(1, 1).real() / std::exp(-0.5 * (-1 - x) * (-1 - x) / 4);
        if (j == 0) {
            r0 = a;
            r1 = b;
        }
        EXPECT_NEAR(a, r0, 1e-12);
        EXPECT_NEAR(b, r1, 1e-12);
        EXPECT_EQ(k.op(j)(0, 1), Complex(0.0));
    }
    EXPECT_LT(gaussian_binning_deficit(0.5, 5, 3.0), 0.05);
    EXPECT_LT(gaussian_binning_deficit(0.5, 121, 12.0), 1e-9);
}

TEST(gaussian_kraus, argument_errors) {
    EXPECT_THROW(gaussian_kraus(0.0, 5, 3.0), InvalidArgument);
    EXPECT_THROW(gaussian_kraus(0.5, 1, 3.0), InvalidArgument);
    EXPECT_THROW(gaussian_kraus(0.5, 5, -1.0), InvalidArgument);
    try {
        gaussian_kraus(1e4, 3, 40.0);
        FAIL() << "expected a narrow-range error";
    } catch (const InvalidArgument &e) {
        EXPECT_NE(std::string(e.what()).find("bin range"), std::string::npos);
    }
}

TEST(model_qubit_gaussian_feedback, weak_measurement_reveals_nothing) {
    GaussianFeedbackParams p;
    p.lambda = 1e-12;
    p.n_steps = 5;
    p.rho0 = DensityMatrix::basis_state(2, 0);
    auto from_zero = propagate(model_qubit_gaussian_feedback(p), 5, 0.0);
    p.rho0 = DensityMatrix::basis_state(2, 1);
    auto from_one = propagate(model_qubit_gaussian_feedback(p), 5, 0.0);
    auto a = signal_distribution(from_zero);
    auto b = signal_distribution(from_one);
    EXPECT_LE(total_variation(a, b), 1e-10);
    for (const auto &[idx, prob] : a) {
        EXPECT_NEAR(prob, b.at(idx), 1e-10);
    }
}

TEST(model_qubit_gaussian_feedback, no_feedback_is_pure_dephasing) {
    GaussianFeedbackParams p;
    p.omega = 0.0;
    p.n_steps = 15;
    ModelSpec spec = model_qubit_gaussian_feedback(p);
    auto state = init_resolved(spec.rho0, spec.y0, spec.instrument.lattice);
    ComplexMatrix direct = spec.rho0.mat();
    double coherence = std::abs(direct(0, 1));
    for (int n = 0; n < 15; ++n) {
        state = det_step(state, spec.instrument, EngineSettings{0.0, 1'000'000, 1});
        ComplexMatrix next = ComplexMatrix::Zero(2, 2);
        for (const auto &k : spec.instrument.kraus.operators()) {
            next += k * direct * k.adjoint();
        }
        direct = next;
        ComplexMatrix marginal = marginal_quantum(state).mat();
        EXPECT_LT(max_abs(marginal - direct), 1e-12);
        EXPECT_NEAR(marginal(0, 0).real(), 0.5, 1e-12);
        double c = std::abs(marginal(0, 1));
        EXPECT_LE(c, coherence + 1e-12);
        EXPECT_LT(c, coherence);
        coherence = c;
    }
}

TEST(model_qubit_gaussian_feedback, three_bin_model_matches_enumeration) {
    GaussianFeedbackParams p;
    p.n_bins = 3;
    p.n_steps = 6;
    ModelSpec spec = model_qubit_gaussian_feedback(p);
    auto det = propagate(spec, 6, 0.0);
    auto oracle = enumerate_paths(spec.rho0, spec.y0, spec.instrument, 6);
    EXPECT_EQ(det.clip_count, 0u);
    EXPECT_EQ(oracle.clip_count, 0u);
    EXPECT_LE(max_entrywise_difference(det, oracle), 1e-10);
}

TEST(model_qubit_gaussian_feedback, every_rule_composes) {
    for (RuleConfig rule : {RuleConfig{RuleKind::markovian, 0.0, 0}, RuleConfig{RuleKind::momentum, 0.7, 0},
                            RuleConfig{RuleKind::history, 0.0, 2}}) {
        GaussianFeedbackParams p;
        p.rule = rule;
        p.n_steps = 4;
        ModelSpec spec = model_qubit_gaussian_feedback(p);
        auto s = propagate(spec, 4);
        EXPECT_LE(s.conservation_defect(), 1e-9);
        EXPECT_GE(min_entry_eigenvalue(s), -1e-9);
        EXPECT_EQ(s.clip_count, 0u);
    }
}

TEST(model_momentum_vs_markov_pair, beta_zero_coincides) {
    auto [momentum, markov] = model_momentum_vs_markov_pair(0.0, 20);
    auto a = first_component_distribution(propagate(momentum, 20));
    auto b = first_component_distribution(propagate(markov, 20));
    ASSERT_EQ(a.size(), b.size());
    for (const auto &[k, p] : a) {
        EXPECT_NEAR(p, b.at(k), 1e-12);
    }
}

TEST(model_momentum_vs_markov_pair, momentum_shrinks_the_signal_spread) {
    // Momentum increments are (1 - beta^k) g <= g, so the accumulated signal
    // is a contracted copy of the memoryless one.
    const double beta = 0.9;
    auto [momentum, markov] = model_momentum_vs_markov_pair(beta, 20);
    auto [mean_mom, var_mom] = mean_and_variance(momentum, propagate(momentum, 20));
    auto [mean_mkv, var_mkv] = mean_and_variance(markov, propagate(markov, 20));
    EXPECT_NEAR(var_mkv, 100.0, 1e-9);
    double c = 0.0;
    for (int k = 1; k <= 20; ++k) {
        c += 1.0 - std::pow(beta, k);
    }
    // Per-step rounding onto the 1/32 grid shifts the spread by a few percent.
    EXPECT_NEAR(var_mom, c * c / 4.0, 0.1 * c * c / 4.0);
    EXPECT_LT(var_mom, var_mkv);
    EXPECT_LT(mean_mom, mean_mkv);
}

TEST(model_momentum_vs_markov_pair, beta_one_keeps_momentum_zero) {
    auto [momentum, markov] = model_momentum_vs_markov_pair(1.0, 20);
    auto s = propagate(momentum, 20);
    ASSERT_EQ(s.entries.size(), 1u);
    EXPECT_EQ(momentum.instrument.lattice.point(s.entries.begin()->first).components,
              (std::vector<double>{0.0, 0.0}));
    EXPECT_THROW(model_momentum_vs_markov_pair(1.5), InvalidArgument);
}

TEST(rule_kind, names) {
    for (RuleKind k : {RuleKind::markovian, RuleKind::momentum, RuleKind::history}) {
        EXPECT_EQ(rule_kind_from_string(to_string(k)), k);
    }
    EXPECT_THROW(rule_kind_from_string("nesterov"), ConfigError);
}

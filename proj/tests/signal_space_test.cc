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

#include <cmath>
#include <deque>
#include <random>

#include <gtest/gtest.h>

#include "qfb/errors.h"

using namespace qfb;

namespace {

// s_{n+1} = sum_k a_k s_{n-k} + b x, the direct recursion with an explicit buffer.
class BufferedRecursion {
   public:
    BufferedRecursion(std::size_t depth, NonMarkovianRule rule) : buffer_(depth + 1, 0.0), rule_(std::move(rule)) {
    }
    double step(std::int64_t n, double x) {
        std::vector<double> h(buffer_.begin(), buffer_.end());
        double s = rule_.g(n, x, h);
        buffer_.push_front(s);
        buffer_.pop_back();
        return s;
    }
    const std::deque<double> &buffer() const {
        return buffer_;
    }

   private:
    std::deque<double> buffer_;
    NonMarkovianRule rule_;
};

NonMarkovianRule random_linear_rule(std::size_t depth, std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> a(depth + 1);
    double l1 = 0.0;
    for (auto &c : a) {
        c = u(rng);
        l1 += std::abs(c);
    }
    for (auto &c : a) {
        c *= 0.9 / l1;
    }
    double b = u(rng);
    return NonMarkovianRule{depth, [a, b](std::int64_t, double x, std::span<const double> h) {
                                double s = b * x;
                                for (std::size_t k = 0; k < h.size(); ++k) {
                                    s += a[k] * h[k];
                                }
                                return s;
                            }};
}

}  // namespace

TEST(signal_lattice, construction) {
    SignalLattice lat({{0.0, 1.0, 0.25}, {-1.0, 1.0, 1.0}});
    EXPECT_EQ(lat.dim(), 2u);
    EXPECT_EQ(lat.size(), 15u);
    EXPECT_THROW(SignalLattice({{0.0, 1.0, 0.0}}), InvalidArgument);
    EXPECT_THROW(SignalLattice({{1.0, 0.0, 0.1}}), InvalidArgument);
    EXPECT_THROW(SignalLattice({}), InvalidArgument);
    EXPECT_THROW(SignalLattice({{0.0, 1e4, 1.0}, {0.0, 1e4, 1.0}}), CapacityError);
    EXPECT_NO_THROW(SignalLattice({{0.0, 1e4, 1.0}, {0.0, 1e4, 1.0}}, 200'000'000));
}

TEST(signal_lattice, index_is_row_major_with_s_first) {
    SignalLattice lat({{0.0, 2.0, 1.0}, {0.0, 3.0, 1.0}});
    std::vector<std::uint64_t> c{2, 1};
    LatticeIndex idx = lat.index(c);
    EXPECT_EQ(idx.value, 2u * 4u + 1u);
    EXPECT_EQ(lat.coords(idx), c);
    EXPECT_EQ(lat.point(idx).components, (std::vector<double>{2.0, 1.0}));
    for (std::uint64_t k = 0; k < lat.size(); ++k) {
        ASSERT_EQ(lat.index(lat.coords(LatticeIndex{k})).value, k);
    }
    EXPECT_THROW(lat.coords(LatticeIndex{12}), InvalidArgument);
}

TEST(project_to_lattice, on_grid_and_saturation) {
    SignalLattice lat({{0.0, 1.0, 0.1}});
    auto on = project_to_lattice(lat, SignalPoint{{0.7}});
    EXPECT_EQ(on.index.value, 7u);
    EXPECT_FALSE(on.clipped());

    auto above = project_to_lattice(lat, SignalPoint{{1.7}});
    EXPECT_EQ(above.index.value, 10u);
    EXPECT_EQ(above.clipped_components, 1u);

    auto below = project_to_lattice(lat, SignalPoint{{-0.3}});
    EXPECT_EQ(below.index.value, 0u);
    EXPECT_TRUE(below.clipped());

    EXPECT_THROW(project_to_lattice(lat, SignalPoint{{NAN}}), InvalidArgument);
    EXPECT_THROW(project_to_lattice(lat, SignalPoint{{0.1, 0.2}}), DimensionError);
}

TEST(project_to_lattice, halves_round_down) {
    SignalLattice lat({{0.0, 1.0, 0.1}});
    EXPECT_NEAR(lat.point(project_to_lattice(lat, SignalPoint{{0.15}}).index)[0], 0.1, 1e-15);
    SignalLattice unit({{-3.0, 3.0, 1.0}});
    EXPECT_EQ(unit.point(project_to_lattice(unit, SignalPoint{{0.5}}).index)[0], 0.0);
    EXPECT_EQ(unit.point(project_to_lattice(unit, SignalPoint{{-0.5}}).index)[0], -1.0);
    EXPECT_EQ(unit.point(project_to_lattice(unit, SignalPoint{{0.5000001}}).index)[0], 1.0);
}

TEST(project_to_lattice, idempotent) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    SignalLattice lat({{-2.0, 2.0, 0.125}, {-1.0, 3.0, 0.3}});
    for (int trial = 0; trial < 2000; ++trial) {
        auto first = project_to_lattice(lat, SignalPoint{{u(rng), u(rng)}});
        auto second = project_to_lattice(lat, lat.point(first.index));
        ASSERT_EQ(first.index, second.index);
        ASSERT_FALSE(second.clipped());
    }
}

TEST(update_rule, checks_output) {
    UpdateRule wrong{2, [](std::int64_t, double, const SignalPoint &) { return SignalPoint{{1.0}}; }};
    EXPECT_THROW(wrong(1, 0.0, SignalPoint{{0.0, 0.0}}), DimensionError);
    UpdateRule inf{1, [](std::int64_t, double, const SignalPoint &) { return SignalPoint{{INFINITY}}; }};
    EXPECT_THROW(inf(1, 0.0, SignalPoint{{0.0}}), NumericalError);
}

TEST(markovian_embed_momentum, beta_zero_is_memoryless) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    MarkovianDrive g = [](std::int64_t n, double x, double s) { return x - 0.1 * s + 0.01 * static_cast<double>(n); };
    UpdateRule mom = markovian_embed_momentum(g, MomentumParams{0.0, 0.0, 1.0});
    UpdateRule plain = markovian_rule(g);
    SignalPoint y{{0.0, 0.0}};
    SignalPoint s{{0.0}};
    for (std::int64_t n = 1; n <= 1000; ++n) {
        double x = u(rng);
        SignalPoint prev = y;
        y = mom(n, x, y);
        s = plain(n, x, s);
        ASSERT_EQ(y[0], s[0]);
        ASSERT_EQ(y[1], g(n, x, prev[0]));
    }
}

TEST(markovian_embed_momentum, beta_one_freezes_momentum) {
    UpdateRule mom = markovian_embed_momentum([](std::int64_t, double x, double) { return 100.0 * x; },
                                              MomentumParams{1.0, 0.0, 1.0});
    SignalPoint y{{2.0, 1.0}};
    for (std::int64_t n = 1; n <= 50; ++n) {
        y = mom(n, n % 2 ? 1.0 : -3.0, y);
        ASSERT_EQ(y[0], 2.0 + static_cast<double>(n));
        ASSERT_EQ(y[1], 1.0);
    }
}

TEST(markovian_embed_momentum, half_beta_constant_drive) {
    UpdateRule mom = markovian_embed_momentum([](std::int64_t, double, double) { return 1.0; },
                                              MomentumParams{0.5, 0.0, 1.0});
    SignalPoint y{{0.0, 0.0}};
    double expected_m[] = {0.5, 0.75, 0.875};
    double expected_s[] = {0.5, 1.25, 2.125};
    for (int n = 0; n < 3; ++n) {
        y = mom(n + 1, 0.0, y);
        EXPECT_EQ(y[1], expected_m[n]);
        EXPECT_EQ(y[0], expected_s[n]);
    }
}

TEST(markovian_embed_momentum, matches_second_order_recursion) {
    std::mt19937_64 rng(12);
    for (double beta : {0.1, 0.5, 0.93}) {
        MarkovianDrive g = [](std::int64_t, double x, double s) { return x - 0.1 * s; };
        UpdateRule mom = markovian_embed_momentum(g, MomentumParams{beta, 0.0, 1.0});
        SignalPoint y{{0.0, 0.0}};
        double s = 0.0;
        double s_prev = 0.0;
        for (std::int64_t n = 1; n <= 10000; ++n) {
            double x = (rng() & 1) ? 1.0 : -1.0;
            double s_next = s + (1 - beta) * g(n, x, s) + beta * (s - s_prev);
            s_prev = s;
            s = s_next;
            y = mom(n, x, y);
            ASSERT_NEAR(y[0], s, 1e-12) << "beta " << beta << " step " << n;
        }
    }
}

TEST(momentum_params, validation) {
    EXPECT_THROW(MomentumParams({1.5, 0.0, 1.0}).validate(), InvalidArgument);
    EXPECT_THROW(MomentumParams({0.5, 0.0, 0.0}).validate(), InvalidArgument);
    EXPECT_THROW(MomentumParams::continuum(10.0, 0.2), InvalidArgument);
    EXPECT_NEAR(MomentumParams::continuum(2.0, 0.1).beta, 0.8, 1e-15);
}

TEST(reconstruct_history, examples) {
    EXPECT_EQ(reconstruct_history(SignalPoint{{5.0, 0.0, 0.0}}), (std::vector<double>{5, 5, 5}));
    EXPECT_EQ(reconstruct_history(SignalPoint{{5.0, 1.0, 2.0}}), (std::vector<double>{5, 4, 2}));
    EXPECT_EQ(reconstruct_history(SignalPoint{{3.5}}), (std::vector<double>{3.5}));
}

TEST(markovian_embed_history, memoryless_case_is_exact) {
    std::mt19937_64 rng(21);
    auto g = [](std::int64_t, double x, std::span<const double> h) { return 0.7 * h[0] + x; };
    UpdateRule embedded = markovian_embed_history(NonMarkovianRule{0, g});
    EXPECT_EQ(embedded.dim, 1u);
    SignalPoint y{{0.0}};
    double s = 0.0;
    for (std::int64_t n = 1; n <= 1000; ++n) {
        double x = (rng() & 1) ? 1.0 : -1.0;
        y = embedded(n, x, y);
        s = 0.7 * s + x;
        ASSERT_EQ(y[0], s);
    }
}

TEST(markovian_embed_history, three_point_average_matches_buffer) {
    NonMarkovianRule avg{2, [](std::int64_t, double x, std::span<const double> h) {
                             return (h[0] + h[1] + h[2]) / 3.0 + x;
                         }};
    UpdateRule embedded = markovian_embed_history(avg);
    BufferedRecursion direct(2, avg);
    std::mt19937_64 rng(99);
    SignalPoint y{{0.0, 0.0, 0.0}};
    for (std::int64_t n = 1; n <= 10000; ++n) {
        double x = (rng() & 1) ? 1.0 : -1.0;
        double s = direct.step(n, x);
        y = embedded(n, x, y);
        ASSERT_NEAR(y[0], s, 1e-12) << n;
        auto hist = reconstruct_history(y);
        for (std::size_t k = 0; k < hist.size(); ++k) {
            ASSERT_NEAR(hist[k], direct.buffer()[k], 1e-12);
        }
    }
}

TEST(markovian_embed_history, randomized_linear_rules) {
    std::mt19937_64 rng(1234);
    for (std::size_t depth = 0; depth <= 6; ++depth) {
        for (int rep = 0; rep < 3; ++rep) {
            NonMarkovianRule rule = random_linear_rule(depth, rng);
            UpdateRule embedded = markovian_embed_history(rule);
            ASSERT_EQ(embedded.dim, depth + 1);
            BufferedRecursion direct(depth, rule);
            SignalPoint y{std::vector<double>(depth + 1, 0.0)};
            for (std::int64_t n = 1; n <= 2000; ++n) {
                double x = (rng() & 1) ? 1.0 : -1.0;
                double s = direct.step(n, x);
                y = embedded(n, x, y);
                ASSERT_NEAR(y[0], s, 1e-12) << "depth " << depth << " step " << n;
            }
        }
    }
}

TEST(markovian_embed_history, passes_step_index) {
    std::vector<std::int64_t> seen;
    NonMarkovianRule rule{1, [&seen](std::int64_t n, double, std::span<const double>) {
                              seen.push_back(n);
                              return 0.0;
                          }};
    UpdateRule embedded = markovian_embed_history(rule);
    SignalPoint y{{0.0, 0.0}};
    for (std::int64_t n = 1; n <= 3; ++n) {
        y = embedded(n, 0.0, y);
    }
    EXPECT_EQ(seen, (std::vector<std::int64_t>{1, 2, 3}));
}

TEST(kernel_limit_check, zero_drive_has_no_error) {
    auto r = kernel_limit_check(MomentumParams::continuum(1.0, 0.01), [](double) { return 0.0; }, 2.0);
    EXPECT_EQ(r.abs_error, 0.0);
    EXPECT_EQ(r.steps, 200);
}

TEST(kernel_limit_check, constant_drive_closed_form) {
    for (double gamma : {1.0, 3.0}) {
        double t = 2.0;
        double closed = t - (1.0 - std::exp(-gamma * t)) / gamma;
        auto r = kernel_limit_check(MomentumParams::continuum(gamma, 0.01), [](double) { return 1.0; }, t);
        EXPECT_NEAR(r.reference, closed, 1e-13);
        EXPECT_LT(r.abs_error, 0.05);
    }
}

TEST(kernel_limit_check, sine_drive_closed_form) {
    double gamma = 2.0;
    double t = 2.0;
    double closed = (1.0 - std::cos(t)) - (gamma * std::sin(t) - std::cos(t) + std::exp(-gamma * t)) / (1 + gamma * gamma);
    auto r = kernel_limit_check(MomentumParams::continuum(gamma, 0.005), [](double u) { return std::sin(u); }, t);
    EXPECT_NEAR(r.reference, closed, 1e-13);
}

TEST(kernel_limit_check, first_order_convergence) {
    std::vector<double> dts{0.04, 0.02, 0.01, 0.005};
    for (auto [gamma, drive] : std::vector<std::pair<double, Drive>>{{1.0, [](double) { return 1.0; }},
                                                                     {2.0, [](double u) { return std::sin(u); }}}) {
        auto rows = kernel_convergence_table(gamma, dts, drive, 2.0);
        ASSERT_EQ(rows.size(), dts.size());
        EXPECT_TRUE(std::isnan(rows[0].ratio));
        for (std::size_t k = 1; k < rows.size(); ++k) {
            EXPECT_LT(rows[k].result.abs_error, rows[k - 1].result.abs_error);
            EXPECT_NEAR(rows[k].ratio, 2.0, 0.4);
            EXPECT_NEAR(rows[k].order, 1.0, 0.3);
        }
    }
}

TEST(kernel_limit_check, rejects_bad_parameters) {
    Drive one = [](double) { return 1.0; };
    EXPECT_THROW(kernel_limit_check(MomentumParams::continuum(6.0, 0.1), one, 2.0), InvalidArgument);
    EXPECT_THROW(kernel_limit_check(MomentumParams{0.5, 1.0, 0.01}, one, 2.0), InvalidArgument);
    EXPECT_THROW(kernel_limit_check(MomentumParams::continuum(1.0, 0.03), one, 2.0), InvalidArgument);
}

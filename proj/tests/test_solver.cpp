/*
 Copyright 2026 The ensemble-oc Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "fixtures.hpp"

using namespace eoc;
using fixtures::Mat;
using fixtures::v1;
using fixtures::Vec;

namespace {

using PM = ProbabilityMeasure<double>;

SolveConfig<double> config(int grid, int level = 6) {
    SolveConfig<double> cfg;
    cfg.grid_steps = grid;
    cfg.level = level;
    return cfg;
}

fixtures::System lq(double bound = 10.0) {
    fixtures::System sys;
    sys.x0 = v1(0.0);
    sys.control_set = ControlSet<double>::box(v1(-bound), v1(bound));
    sys.dynamics = [](double, const Vec&, const Vec& u, const Vec&) { return Vec(u); };
    sys.dynamics_jacobian = [](double, const Vec&, const Vec&, const Vec&) { return Mat(Mat::Zero(1, 1)); };
    sys.terminal_cost = [](const Vec& x, const Vec&) { return 0.5 * (x[0] - 1) * (x[0] - 1); };
    sys.terminal_cost_gradient = [](const Vec& x, const Vec&) -> std::optional<Vec> { return v1(x[0] - 1); };
    return sys;
}

// x' = omega u, U = [-2,2], x(1) = omega / 2 required, g = (x - omega)^2 / 2.
fixtures::System point_target() {
    auto sys = fixtures::scaled_drift(2.0);
    sys.constraint = [](const Vec& w) { return ConstraintSet<double>::point(Vec(0.5 * w)); };
    return sys;
}

// x' = omega u, U = [-2,2], g = (x - 1)^2 / 2: the optimal cost on a measure is (1 - E[w]^2 / E[w^2]) / 2.
fixtures::System unit_target() {
    auto sys = fixtures::scaled_drift(2.0);
    sys.terminal_cost = [](const Vec& x, const Vec&) { return 0.5 * (x[0] - 1) * (x[0] - 1); };
    sys.terminal_cost_gradient = [](const Vec& x, const Vec&) -> std::optional<Vec> { return v1(x[0] - 1); };
    return sys;
}

double unit_target_cost(const FiniteSupportMeasure<double>& mu) {
    const double m1 = integrate(mu, [](const Vec& w) { return w[0]; });
    const double m2 = integrate(mu, [](const Vec& w) { return w[0] * w[0]; });
    return 0.5 * (1 - m1 * m1 / m2);
}

bool merit_monotone(const SolveResult<double>& r) {
    for (std::size_t i = 1; i < r.history.size(); ++i) {
        if (r.history[i].penalty == r.history[i - 1].penalty && r.history[i].merit > r.history[i - 1].merit) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("abs-distance example at level 6 reaches u = 1 with p = 1") {
    auto cfg = config(200);
    cfg.initial_control = v1(0.1);
    const auto r = solve(fixtures::paper_example(), fixtures::uniform_pm1(), cfg);
    REQUIRE(r.status == SolveStatus::converged);
    CHECK(std::abs(r.cost + 1.0) <= 5e-3);
    const double dt = r.control.grid.dt();
    CHECK((r.control.values.array() - 1.0).abs().sum() * dt <= 1e-3);
    for (const auto& p : r.costates.costates) CHECK((p.array() - 1.0).abs().maxCoeff() <= 1e-6);
    CHECK(r.costates.lambda == 1.0);
    CHECK(merit_monotone(r));
}

TEST_CASE("omega-free problem reaches x(1) = 1") {
    const auto r = solve(lq(), fixtures::uniform_pm1(), config(50, 3));
    REQUIRE(r.status == SolveStatus::converged);
    CHECK(r.cost <= 1e-12);
    for (std::size_t j = 0; j < r.ensemble.atom_count(); ++j) CHECK(std::abs(r.ensemble.terminal(j)[0] - 1.0) <= 1e-6);
}

TEST_CASE("a single Dirac measure reduces to the classical problem") {
    const auto sys = fixtures::scaled_drift();
    const auto a = solve(sys, PM::from_atoms({{v1(0.7), 1.0}}), config(40));
    const auto b = solve_finite(sys, fixtures::atoms({{0.7, 1.0}}), config(40));
    REQUIRE(a.status == SolveStatus::converged);
    CHECK(a.control.values == b.control.values);
    CHECK(a.cost == b.cost);
    CHECK(a.cost <= 1e-12);
    CHECK(refine(sys, PM::from_atoms({{v1(0.7), 1.0}}), config(40), {1, 2, 4, 8}).size() == 1);
}

TEST_CASE("brute_force_oracle examples") {
    SUBCASE("one interval, U = {-1, 1}, abs-distance example at level 2") {
        const auto mu = discretize(fixtures::uniform_pm1(), 2);
        const auto r = brute_force_oracle(fixtures::paper_example(), mu, TimeGrid<double>(1, 1.0), {v1(-1), v1(1)});
        double expected = 0;
        for (std::size_t j = 0; j < mu.size(); ++j) expected += mu.weights[j] * -std::abs(-1.0 - mu.atoms[j][0]);
        CHECK(r.cost == doctest::Approx(expected).epsilon(1e-14));
        CHECK(r.cost == doctest::Approx(-1.0).epsilon(1e-14));
        CHECK(r.control.values(0, 0) == -1.0);
    }
    SUBCASE("two intervals, g = x^2, U = {-1, 0, 1}") {
        auto sys = lq(1.0);
        sys.terminal_cost = [](const Vec& x, const Vec&) { return x[0] * x[0]; };
        const auto r = brute_force_oracle(sys, fixtures::atoms({{0.0, 1.0}}), TimeGrid<double>(2, 1.0), {v1(-1), v1(0), v1(1)});
        CHECK(r.cost == 0.0);
        CHECK(r.control.values.sum() == 0.0);
    }
    SUBCASE("budget") {
        const auto mu = fixtures::atoms({{0.0, 1.0}});
        CHECK_THROWS_WITH_AS(brute_force_oracle(lq(), mu, TimeGrid<double>(9, 1.0), {v1(0)}), doctest::Contains("enumeration budget"), Error);
        CHECK_THROWS_AS(brute_force_oracle(lq(), mu, TimeGrid<double>(2, 1.0), {v1(0), v1(1), v1(2), v1(3), v1(4), v1(5)}), Error);
        CHECK_NOTHROW(brute_force_oracle(lq(), mu, TimeGrid<double>(8, 1.0), {v1(0), v1(1)}));
    }
}

TEST_CASE("property: the oracle is never beaten by the sweep") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> W(-1.5, 1.5), A(-1, 1);
    for (int trial = 0; trial < 15; ++trial) {
        const double a = A(rng);
        fixtures::System sys;
        sys.x0 = v1(0.0);
        sys.control_set = ControlSet<double>::finite({v1(-1), v1(0), v1(1)});
        sys.dynamics = [a](double, const Vec& x, const Vec& u, const Vec& w) { return Vec(a * x + w[0] * u); };
        sys.dynamics_jacobian = [a](double, const Vec&, const Vec&, const Vec&) { return Mat(Mat::Constant(1, 1, a)); };
        sys.terminal_cost = [](const Vec& x, const Vec& w) { return std::cos(2 * x[0]) + 0.5 * (x[0] - w[0]) * (x[0] - w[0]); };
        sys.terminal_cost_gradient = [](const Vec& x, const Vec& w) -> std::optional<Vec> {
            return v1(-2 * std::sin(2 * x[0]) + x[0] - w[0]);
        };
        const auto mu = fixtures::atoms({{W(rng), 0.4}, {W(rng), 0.6}});
        const auto grid = TimeGrid<double>(5, 1.0);
        const auto oracle = brute_force_oracle(sys, mu, grid, sys.control_set.values());
        const auto r = solve_finite(sys, mu, config(5));
        CHECK(oracle.cost <= r.cost + 1e-12);
    }
}

TEST_CASE("finite control sets use interval switching") {
    auto sys = fixtures::scaled_drift();
    sys.control_set = ControlSet<double>::finite({v1(-1), v1(0), v1(1)});
    const auto mu = fixtures::atoms({{0.5, 0.5}, {1.0, 0.5}});
    const auto r = solve_finite(sys, mu, config(6));
    REQUIRE(r.status == SolveStatus::converged);
    for (Eigen::Index k = 0; k < 6; ++k) CHECK(sys.control_set.contains(r.control.values.col(k)));
    const auto oracle = brute_force_oracle(sys, mu, TimeGrid<double>(6, 1.0), sys.control_set.values());
    CHECK(std::abs(r.cost - oracle.cost) <= 1e-4);
    CHECK(merit_monotone(r));
}

TEST_CASE("point constraints are attained by the penalty ladder") {
    const auto r = solve_finite(point_target(), fixtures::atoms({{1.0, 0.5}, {2.0, 0.5}}), config(50));
    REQUIRE(r.status == SolveStatus::converged);
    CHECK(r.constraint_residual <= 1e-5);
    CHECK(r.cost == doctest::Approx(0.3125).epsilon(1e-4));
    CHECK(std::abs(r.costates.lambda - 0.5) <= 1e-3);
    CHECK(r.penalty > 1.0);
    CHECK(merit_monotone(r));
}

TEST_CASE("refine: omega-free costs agree at every level") {
    const auto runs = refine(lq(), fixtures::uniform_pm1(), config(20), {1, 2, 4});
    REQUIRE(runs.size() == 3);
    for (const auto& r : runs) {
        CHECK(r.status == SolveStatus::converged);
        CHECK(r.cost == doctest::Approx(runs.front().cost).epsilon(1e-12));
    }
}

TEST_CASE("refine: cost deltas shrink on a Lipschitz-in-omega problem") {
    const auto mu = PM::uniform(Box<double>(v1(0.5), v1(1.5)));
    const std::vector<int> ladder{2, 4, 8, 16};
    const auto runs = refine(unit_target(), mu, config(20), ladder);
    REQUIRE(runs.size() == ladder.size());
    for (std::size_t i = 0; i < runs.size(); ++i) {
        CHECK(runs[i].status == SolveStatus::converged);
        // With n cells the midpoint second moment is 13/12 - 1/(12 n^2).
        const double n = ladder[i];
        const double analytic = 0.5 * (1 - 1 / (13.0 / 12 - 1 / (12 * n * n)));
        CHECK(runs[i].cost == doctest::Approx(analytic).epsilon(1e-9));
        CHECK(runs[i].cost == doctest::Approx(unit_target_cost(discretize(mu, ladder[i]))).epsilon(1e-9));
    }
    for (std::size_t i = 2; i < runs.size(); ++i) {
        CHECK(std::abs(runs[i].cost - runs[i - 1].cost) < std::abs(runs[i - 1].cost - runs[i - 2].cost));
    }
}

TEST_CASE("refine: abs-distance example ladder") {
    SUBCASE("from u = 0.5 every level sits on the u = 1 branch") {
        auto cfg = config(100);
        cfg.initial_control = v1(0.5);
        const auto runs = refine(fixtures::paper_example(), fixtures::uniform_pm1(), cfg, {2, 4, 8, 16});
        for (std::size_t i = 0; i < runs.size(); ++i) {
            CHECK(runs[i].status == SolveStatus::converged);
            CHECK(runs[i].cost == doctest::Approx(-1.0).epsilon(1e-12));
            if (i > 0) CHECK(std::abs(runs[i].cost - runs[i - 1].cost) <= 1e-12);
        }
    }
    SUBCASE("from u = 0.1 level 2 stops on a flat averaged Hamiltonian") {
        auto cfg = config(100, 2);
        cfg.initial_control = v1(0.1);
        const auto r = solve(fixtures::paper_example(), fixtures::uniform_pm1(), cfg);
        CHECK(r.status == SolveStatus::converged);
        CHECK(r.cost == doctest::Approx(-0.5).epsilon(1e-12));
        CHECK((r.control.values.array() == 0.1).all());
    }
}

TEST_CASE("property: splitting an atom leaves the solve unchanged") {
    const auto sys = unit_target();
    const auto a = solve_finite(sys, fixtures::atoms({{0.6, 0.25}, {1.3, 0.75}}), config(30));
    const auto b = solve_finite(sys, fixtures::atoms({{0.6, 0.25}, {1.3, 0.375}, {1.3, 0.375}}), config(30));
    REQUIRE(a.status == SolveStatus::converged);
    REQUIRE(b.status == SolveStatus::converged);
    CHECK((a.control.values - b.control.values).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(std::abs(a.cost - b.cost) <= 1e-12);
    CHECK((a.ensemble.states[1] - b.ensemble.states[2]).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("error statuses") {
    SUBCASE("terminal state on the kink of g") {
        auto cfg = config(16, 1);
        cfg.initial_control = v1(0.5);
        const auto r = solve(fixtures::paper_example(), fixtures::uniform_pm1(), cfg);
        CHECK(r.status == SolveStatus::error);
        CHECK(r.message == "terminal gradient unavailable; supply subgradient selection");
    }
    SUBCASE("dynamics blow-up") {
        auto sys = lq();
        sys.x0 = v1(1.0);
        sys.dynamics = [](double, const Vec& x, const Vec& u, const Vec&) { return Vec(x.array().pow(4).matrix() + u); };
        sys.dynamics_jacobian = nullptr;
        const auto r = solve_finite(sys, fixtures::atoms({{0.0, 1.0}}), config(100));
        CHECK(r.status == SolveStatus::error);
        CHECK(r.message.find("dynamics blow-up") != std::string::npos);
    }
    SUBCASE("a wrong gradient leaves no descent step") {
        auto sys = lq(1.0);
        sys.terminal_cost_gradient = [](const Vec& x, const Vec&) -> std::optional<Vec> { return v1(1 - x[0]); };
        const auto r = solve_finite(sys, fixtures::atoms({{0.0, 1.0}}), config(10));
        CHECK(r.status == SolveStatus::error);
        CHECK(r.message.find("merit did not decrease at minimal damping") != std::string::npos);
    }
    SUBCASE("sweep budget") {
        auto cfg = config(50);
        cfg.max_sweeps = 1;
        cfg.maximality_target = 1e-300;
        const auto r = solve_finite(unit_target(), fixtures::atoms({{0.6, 0.5}, {1.4, 0.5}}), cfg);
        CHECK(r.status == SolveStatus::max_iters);
        CHECK(std::string(to_string(r.status)) == "max-iters");
    }
}

TEST_CASE("configuration validation") {
    const auto mu = fixtures::atoms({{0.0, 1.0}});
    auto cfg = config(0);
    CHECK_THROWS_AS(solve_finite(lq(), mu, cfg), Error);
    cfg = config(10);
    cfg.min_step = 2.0;
    CHECK_THROWS_AS(solve_finite(lq(), mu, cfg), Error);
    cfg = config(10);
    cfg.penalty_factor = 1.0;
    CHECK_THROWS_AS(solve_finite(lq(), mu, cfg), Error);
    cfg = config(10);
    cfg.initial_control = Vec::Zero(2);
    CHECK_THROWS_AS(solve_finite(lq(), mu, cfg), Error);
}

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

#include <algorithm>
#include <numeric>
#include <random>

#include "fixtures.hpp"

using namespace eoc;
using fixtures::v1;
using fixtures::v2;
using fixtures::Vec;

namespace {

using PM = ProbabilityMeasure<double>;

std::vector<PM> sample_measures() {
    std::vector<PM> out;
    out.push_back(PM::from_atoms({{v1(0.3), 1.0}}));
    out.push_back(fixtures::uniform_pm1());
    out.push_back(PM::uniform(Box<double>(v2(-1, 0), v2(2, 0.5))));
    out.push_back(PM::truncated_gaussian(Box<double>(v1(-2), v1(3)), v1(0.5), v1(0.7)));
    out.push_back(PM::mixture({{v1(0.0), 0.6}, {v1(0.9), 0.4}}, 0.3, PM::uniform_part(Box<double>(v1(-1), v1(1)))));
    out.push_back(PM::gaussian(v1(0.2), v1(1.5)));
    return out;
}

double total(const FiniteSupportMeasure<double>& m) { return std::accumulate(m.weights.begin(), m.weights.end(), 0.0); }

// Exact integral of |w - a| against the uniform law on [-1,1].
double abs_exact(double a) { return ((1 + a) * (1 + a) + (1 - a) * (1 - a)) / 4.0; }

}  // namespace

TEST_CASE("a Dirac measure is a fixed point of discretization") {
    const auto mu = PM::from_atoms({{v1(0.37), 1.0}});
    for (int l : {1, 2, 7, 50}) {
        const auto m = discretize(mu, l);
        REQUIRE(m.size() == 1);
        CHECK(m.atoms[0][0] == 0.37);
        CHECK(m.weights[0] == 1.0);
    }
}

TEST_CASE("uniform on [-1,1] at level 2 has four centred cells of mass 1/4") {
    const auto m = discretize(fixtures::uniform_pm1(), 2);
    REQUIRE(m.size() == 4);
    const double centres[] = {-0.75, -0.25, 0.25, 0.75};
    for (std::size_t j = 0; j < 4; ++j) {
        CHECK(m.atoms[j][0] == doctest::Approx(centres[j]).epsilon(1e-15));
        CHECK(m.weights[j] == doctest::Approx(0.25).epsilon(1e-12));
        REQUIRE(m.parent_cells[j]);
        CHECK(m.parent_cells[j]->hi[0] - m.parent_cells[j]->lo[0] == doctest::Approx(0.5));
    }
    CHECK(m.trimmed_mass == 0.0);
}

TEST_CASE("mixture of a point mass and uniform keeps the atom at level 4") {
    const auto mu = PM::mixture({{v1(0.0), 1.0}}, 0.5, PM::uniform_part(Box<double>(v1(-1), v1(1))));
    const auto m = discretize(mu, 4);
    REQUIRE(m.size() == 9);
    const auto j0 = m.find(v1(0.0));
    REQUIRE(j0 >= 0);
    CHECK(m.weights[std::size_t(j0)] >= 0.5 - 1e-12);
    int cells = 0;
    for (std::size_t j = 0; j < m.size(); ++j) {
        if (std::ptrdiff_t(j) == j0) continue;
        CHECK(m.weights[j] == doctest::Approx(0.0625).epsilon(1e-12));
        ++cells;
    }
    CHECK(cells == 8);
}

TEST_CASE("integrate: normalization, symmetry and the level-2 second moment") {
    for (const auto& mu : sample_measures()) {
        CHECK(integrate(mu, [](const Vec&) { return 1.0; }) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(integrate(discretize(mu, 3), [](const Vec&) { return 1.0; }) == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK(std::abs(integrate(fixtures::uniform_pm1(), [](const Vec& w) { return w[0]; })) < 1e-14);
    const auto m2 = discretize(fixtures::uniform_pm1(), 2);
    CHECK(integrate(m2, [](const Vec& w) { return w[0] * w[0]; }) == doctest::Approx(0.3125).epsilon(1e-15));
}

TEST_CASE("integrate over a finite-support measure is the plain weighted sum in atom order") {
    const auto m = fixtures::atoms({{0.1, 0.2}, {-0.4, 0.3}, {2.0, 0.5}});
    auto h = [](const Vec& w) { return std::sin(3 * w[0]) + w[0] * w[0]; };
    double expect = 0;
    for (std::size_t j = 0; j < m.size(); ++j) expect += m.weights[j] * h(m.atoms[j]);
    CHECK(integrate(m, h) == expect);
}

TEST_CASE("weak-star gap examples") {
    const auto mu = fixtures::uniform_pm1();
    std::vector<TestFunction<double>> constant{{[](const Vec&) { return 2.5; }, 0.0, 2.5}};
    for (int l : {1, 2, 5, 9}) CHECK(weak_star_gap(mu, discretize(mu, l), constant)[0].gap < 1e-12);

    std::vector<TestFunction<double>> square{{[](const Vec& w) { return w[0] * w[0]; }, 2.0, 1.0}};
    CHECK(weak_star_gap(mu, discretize(mu, 2), square)[0].gap == doctest::Approx(1.0 / 3.0 - 0.3125).epsilon(1e-4));

    SUBCASE("|w| has its kink on a cell boundary, so the midpoint rule is exact") {
        std::vector<TestFunction<double>> absval{{[](const Vec& w) { return std::abs(w[0]); }, 1.0, 1.0}};
        for (int l : {2, 4, 8}) CHECK(weak_star_gap(mu, discretize(mu, l), absval)[0].gap < 1e-9);
    }
    SUBCASE("shifted kink: gaps 1/72, 1/288, 1/1152 strictly decrease") {
        const double a = 1.0 / 3.0;
        std::vector<TestFunction<double>> shifted{{[a](const Vec& w) { return std::abs(w[0] - a); }, 1.0, 4.0 / 3.0}};
        const double expected[] = {1.0 / 72, 1.0 / 288, 1.0 / 1152};
        double previous = 1.0;
        int i = 0;
        for (int l : {2, 4, 8}) {
            const auto m = discretize(mu, l);
            const double direct = std::abs(abs_exact(a) - integrate(m, shifted[0].h));
            const double gap = weak_star_gap(mu, m, shifted)[0].gap;
            CHECK(direct == doctest::Approx(expected[i]).epsilon(1e-12));
            CHECK(gap == doctest::Approx(expected[i]).epsilon(5e-3));
            CHECK(gap < previous);
            previous = gap;
            ++i;
        }
    }
}

TEST_CASE("property: weights are positive and sum to one") {
    for (const auto& mu : sample_measures()) {
        for (int l = 1; l <= 6; ++l) {
            const auto m = discretize(mu, l);
            CHECK(std::abs(total(m) - 1.0) <= 1e-12);
            for (double w : m.weights) CHECK((w > 0.0 && w <= 1.0));
        }
    }
}

TEST_CASE("property: cells are disjoint, contain their atom and have diameter <= 1/l") {
    for (const auto& mu : sample_measures()) {
        for (int l = 1; l <= 5; ++l) {
            const auto m = discretize(mu, l);
            std::vector<Box<double>> cells;
            for (std::size_t j = 0; j < m.size(); ++j) {
                if (!m.parent_cells.empty() && m.parent_cells[j]) {
                    const auto& c = *m.parent_cells[j];
                    CHECK(c.contains(m.atoms[j]));
                    CHECK(c.diameter() <= 1.0 / l + 1e-12);
                    cells.push_back(c);
                }
            }
            for (std::size_t a = 0; a < cells.size(); ++a) {
                for (std::size_t b = a + 1; b < cells.size(); ++b) {
                    const Vec lo = cells[a].lo.cwiseMax(cells[b].lo);
                    const Vec hi = cells[a].hi.cwiseMin(cells[b].hi);
                    CHECK(((hi - lo).array() <= 1e-12).any());
                }
            }
        }
    }
}

TEST_CASE("property: nesting and duplicate-free union through the approximation sequence") {
    for (const auto& mu : sample_measures()) {
        DiracApproximationSequence<double> seq(mu);
        seq.level(6);
        for (std::size_t i = 0; i + 1 < seq.levels().size(); ++i) {
            for (const auto& a : seq.levels()[i].atoms) CHECK(seq.levels()[i + 1].find(a) >= 0);
            CHECK(std::abs(total(seq.levels()[i]) - 1.0) <= 1e-12);
        }
        const auto& u = seq.union_support();
        for (std::size_t a = 0; a < u.size(); ++a) {
            for (std::size_t b = a + 1; b < u.size(); ++b) CHECK(u[a] != u[b]);
        }
    }
}

TEST_CASE("property: atoms of mu with weight >= 1/l survive with at least their weight") {
    const auto mu = PM::mixture({{v1(-0.2), 0.7}, {v1(0.55), 0.3}}, 0.6, PM::uniform_part(Box<double>(v1(-1), v1(1))));
    for (int l = 1; l <= 8; ++l) {
        const auto m = discretize(mu, l);
        for (const auto& a : mu.atoms()) {
            const double w = mu.atomic_mass() * a.weight;
            if (w < 1.0 / l) continue;
            const auto j = m.find(a.point);
            REQUIRE(j >= 0);
            CHECK(m.weights[std::size_t(j)] >= w - 1e-12);
        }
    }
}

TEST_CASE("property: random piecewise-linear test functions obey L/l + 2M/l") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(-1, 1), slope(-4, 4);
    const auto mu = fixtures::uniform_pm1();
    for (int trial = 0; trial < 25; ++trial) {
        std::vector<double> knots{-1.0, 1.0}, values;
        for (int i = 0; i < 4; ++i) knots.push_back(U(rng));
        std::sort(knots.begin(), knots.end());
        values.push_back(U(rng));
        for (std::size_t i = 1; i < knots.size(); ++i) values.push_back(values.back() + slope(rng) * (knots[i] - knots[i - 1]));
        double L = 0, M = 0;
        for (std::size_t i = 0; i < knots.size(); ++i) {
            M = std::max(M, std::abs(values[i]));
            if (i > 0 && knots[i] > knots[i - 1]) L = std::max(L, std::abs(values[i] - values[i - 1]) / (knots[i] - knots[i - 1]));
        }
        auto h = [knots, values](const Vec& w) {
            const double x = std::clamp(w[0], -1.0, 1.0);
            std::size_t i = 1;
            while (i + 1 < knots.size() && x > knots[i]) ++i;
            const double span = knots[i] - knots[i - 1];
            return span > 0 ? values[i - 1] + (values[i] - values[i - 1]) * (x - knots[i - 1]) / span : values[i];
        };
        std::vector<TestFunction<double>> tests{{h, L, M}};
        for (int l : {1, 2, 3, 5, 8, 13}) {
            const auto g = weak_star_gap(mu, discretize(mu, l), tests)[0];
            CHECK(g.gap <= L / l + 2 * M / l);
            CHECK(g.gap <= g.bound + 1e-9);
        }
    }
}

TEST_CASE("unbounded support: gaussian trimming keeps the outside mass below 1/l") {
    const auto mu = PM::gaussian(v1(0.0), v1(1.0));
    for (int l = 1; l <= 6; ++l) {
        const auto m = discretize(mu, l);
        CHECK(m.trimmed_mass > 0.0);
        CHECK(m.trimmed_mass < 1.0 / l);
        CHECK(m.find(v1(0.0)) >= 0);
    }
    std::vector<TestFunction<double>> tests{{[](const Vec& w) { return std::cos(w[0]); }, 1.0, 1.0}};
    for (int l : {2, 4, 8}) {
        const auto g = weak_star_gap(mu, discretize(mu, l), tests)[0];
        CHECK(g.gap <= g.bound);
    }
}

TEST_CASE("errors: level 0 and unbounded support without a trimming rule") {
    CHECK_THROWS_WITH_AS(discretize(fixtures::uniform_pm1(), 0), "discretization level must be >= 1", Error);
    DensityPart<double> part;
    part.domain.lo = v1(-std::numeric_limits<double>::infinity());
    part.domain.hi = v1(std::numeric_limits<double>::infinity());
    part.density = [](const Vec& w) { return std::exp(-std::abs(w[0])) / 2; };
    const auto mu = PM::from_density(part);
    CHECK_THROWS_WITH_AS(discretize(mu, 2), doctest::Contains("cannot construct K_l"), Error);
    CHECK_THROWS_AS(PM::from_atoms({{v1(0), 0.5}, {v1(1), 0.4}}), Error);
    CHECK_THROWS_AS(PM::from_atoms({{v1(0), 1.0}, {v1(1), 0.0}}), Error);
}

TEST_CASE("property: metrics are symmetric and satisfy the triangle inequality") {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> label(0, 3);
    std::normal_distribution<double> N;
    for (Metric metric : {Metric::euclidean, Metric::discrete}) {
        ParameterSpace<double> space;
        space.dimension = 2;
        space.metric = metric;
        for (int i = 0; i < 200; ++i) {
            auto draw = [&] { return metric == Metric::discrete ? v2(label(rng), 0) : v2(N(rng), N(rng)); };
            const Vec a = draw(), b = draw(), c = draw();
            CHECK(space.distance(a, b) == space.distance(b, a));
            CHECK(space.distance(a, c) <= space.distance(a, b) + space.distance(b, c) + 1e-12);
            CHECK(space.distance(a, a) == 0.0);
        }
    }
}

TEST_CASE("long double instantiation matches double") {
    using LPM = ProbabilityMeasure<long double>;
    const auto mu = LPM::uniform(Box<long double>(Vector<long double>::Constant(1, -1), Vector<long double>::Constant(1, 1)));
    const auto m = discretize(mu, 3);
    const auto md = discretize(fixtures::uniform_pm1(), 3);
    REQUIRE(m.size() == md.size());
    for (std::size_t j = 0; j < m.size(); ++j) {
        CHECK(double(m.atoms[j][0]) == doctest::Approx(md.atoms[j][0]).epsilon(1e-14));
        CHECK(double(m.weights[j]) == doctest::Approx(md.weights[j]).epsilon(1e-12));
    }
}

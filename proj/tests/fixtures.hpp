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

// Small systems shared by the test binaries.

#pragma once

#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "ensemble_oc/ensemble_oc.hpp"

namespace fixtures {

using eoc::Vector;
using Vec = eoc::Vector<double>;
using Mat = eoc::Matrix<double>;
using System = eoc::ControlSystem<double>;

inline Vec v1(double a) { return Vec::Constant(1, a); }
inline Vec v2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

/// x' = u on [0,1], U = [-1,1], g = -|x - omega|.
template <typename S = double>
eoc::ControlSystem<S> paper_example() {
    using V = Vector<S>;
    eoc::ControlSystem<S> sys;
    sys.x0 = V::Zero(1);
    sys.dynamics = [](S, const V&, const V& u, const V&) { return V(u); };
    sys.dynamics_jacobian = [](S, const V&, const V&, const V&) { return eoc::Matrix<S>(eoc::Matrix<S>::Zero(1, 1)); };
    sys.terminal_cost = [](const V& x, const V& w) { return -std::abs(x[0] - w[0]); };
    sys.terminal_cost_gradient = [](const V& x, const V& w) -> std::optional<V> {
        const S d = x[0] - w[0];
        if (d == S(0)) return std::nullopt;
        return V::Constant(1, d > S(0) ? S(-1) : S(1));
    };
    sys.regularity.c = S(1);
    sys.regularity.k_f = S(0);
    return sys;
}

template <typename S = double>
eoc::ProbabilityMeasure<S> uniform_pm1() {
    return eoc::ProbabilityMeasure<S>::uniform(eoc::Box<S>(Vector<S>::Constant(1, S(-1)), Vector<S>::Constant(1, S(1))));
}

/// x' = omega u, U = [lo,hi], g = (x - omega)^2 / 2.
inline System scaled_drift(double bound = 1.0) {
    System sys;
    sys.x0 = Vec::Zero(1);
    sys.control_set = eoc::ControlSet<double>::box(v1(-bound), v1(bound));
    sys.dynamics = [](double, const Vec&, const Vec& u, const Vec& w) { return Vec(w[0] * u); };
    sys.dynamics_jacobian = [](double, const Vec&, const Vec&, const Vec&) { return Mat(Mat::Zero(1, 1)); };
    sys.terminal_cost = [](const Vec& x, const Vec& w) { return 0.5 * (x - w).squaredNorm(); };
    sys.terminal_cost_gradient = [](const Vec& x, const Vec& w) -> std::optional<Vec> { return Vec(x - w); };
    sys.regularity.c = bound;
    sys.regularity.k_f = 0.0;
    return sys;
}

/// x' = a x (scalar, no control effect), g = x.
inline System linear_decay(double a) {
    System sys;
    sys.x0 = v1(1.0);
    sys.dynamics = [a](double, const Vec& x, const Vec&, const Vec&) { return Vec(a * x); };
    sys.dynamics_jacobian = [a](double, const Vec&, const Vec&, const Vec&) { return Mat(Mat::Constant(1, 1, a)); };
    sys.terminal_cost = [](const Vec& x, const Vec&) { return x[0]; };
    sys.terminal_cost_gradient = [](const Vec&, const Vec&) -> std::optional<Vec> { return v1(1.0); };
    return sys;
}

/// x' = sin(x) + u, scalar.
inline System sine_system() {
    System sys;
    sys.x0 = v1(0.3);
    sys.dynamics = [](double, const Vec& x, const Vec& u, const Vec&) { return Vec(x.array().sin().matrix() + u); };
    sys.dynamics_jacobian = [](double, const Vec& x, const Vec&, const Vec&) { return Mat(x.array().cos().matrix().asDiagonal()); };
    sys.terminal_cost = [](const Vec& x, const Vec&) { return 0.5 * x.squaredNorm(); };
    sys.terminal_cost_gradient = [](const Vec& x, const Vec&) -> std::optional<Vec> { return x; };
    sys.regularity.c = 2.0;
    sys.regularity.k_f = 1.0;
    return sys;
}

inline eoc::FiniteSupportMeasure<double> atoms(const std::vector<std::pair<double, double>>& list) {
    std::vector<eoc::Atom<double>> a;
    for (const auto& [p, w] : list) a.push_back({v1(p), w});
    return eoc::FiniteSupportMeasure<double>::from_atoms(a);
}

inline eoc::ControlFunction<double> random_control(const eoc::TimeGrid<double>& grid, double lo, double hi, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> U(lo, hi);
    eoc::ControlFunction<double> u = eoc::ControlFunction<double>::constant(grid, v1(0.0));
    for (Eigen::Index k = 0; k < grid.steps; ++k) u.values(0, k) = U(rng);
    return u;
}

}  // namespace fixtures

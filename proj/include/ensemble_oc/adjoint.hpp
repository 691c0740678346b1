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

#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ensemble_oc/system.hpp"
#include "ensemble_oc/types.hpp"

namespace eoc {

template <typename Scalar>
struct CostateEnsemble {
    std::vector<StateArray<Scalar>> costates;
    Scalar lambda = Scalar(1);

    std::size_t atom_count() const { return costates.size(); }

    Scalar sup_norm() const {
        Scalar m(0);
        for (const auto& p : costates) m = std::max(m, p.colwise().norm().maxCoeff());
        return m;
    }
};

/// State on interval k at its midpoint, from cubic Hermite interpolation of the stored nodes.
template <typename Scalar>
Vector<Scalar> hermite_midpoint(const ControlSystem<Scalar>& sys, const StateArray<Scalar>& x,
                                const ControlFunction<Scalar>& u, const Vector<Scalar>& omega, Eigen::Index k) {
    const Scalar h = u.grid.dt();
    const Vector<Scalar> uk = u.values.col(k);
    const Vector<Scalar> fa = sys.dynamics(u.grid.node(k), x.col(k), uk, omega);
    const Vector<Scalar> fb = sys.dynamics(u.grid.node(k + 1), x.col(k + 1), uk, omega);
    return (x.col(k) + x.col(k + 1)) / Scalar(2) + h / Scalar(8) * (fa - fb);
}

/// Integrates -p' = (d f/d x)^T p backwards from p(T) = terminal_p along a stored trajectory (RK4).
template <typename Scalar>
StateArray<Scalar> backward_adjoint(const ControlSystem<Scalar>& sys, const StateArray<Scalar>& x,
                                    const ControlFunction<Scalar>& u, const Vector<Scalar>& omega,
                                    const Vector<Scalar>& terminal_p) {
    const auto& grid = u.grid;
    if (x.cols() != grid.node_count() || x.rows() != sys.state_dim) throw Error("trajectory shape does not match the grid");
    if (terminal_p.size() != sys.state_dim) throw Error("terminal costate dimension mismatch");
    if (!terminal_p.allFinite()) throw BlowUpError("adjoint blow-up: non-finite terminal costate", grid.steps);

    const Scalar h = grid.dt();
    StateArray<Scalar> p(sys.state_dim, grid.node_count());
    Vector<Scalar> pk = terminal_p;
    p.col(grid.steps) = pk;
    for (Eigen::Index k = grid.steps - 1; k >= 0; --k) {
        const Vector<Scalar> uk = u.values.col(k);
        const Scalar t0 = grid.node(k), t1 = grid.node(k + 1), tm = (t0 + t1) / Scalar(2);
        const Matrix<Scalar> ja = sys.jacobian_x(t1, x.col(k + 1), uk, omega).transpose();
        const Matrix<Scalar> jm = sys.jacobian_x(tm, hermite_midpoint(sys, x, u, omega, k), uk, omega).transpose();
        const Matrix<Scalar> jb = sys.jacobian_x(t0, x.col(k), uk, omega).transpose();
        // In reversed time s = T - t the adjoint reads dp/ds = J^T p.
        const Vector<Scalar> k1 = ja * pk;
        const Vector<Scalar> k2 = jm * (pk + h / Scalar(2) * k1);
        const Vector<Scalar> k3 = jm * (pk + h / Scalar(2) * k2);
        const Vector<Scalar> k4 = jb * (pk + h * k3);
        pk += h / Scalar(6) * (k1 + Scalar(2) * k2 + Scalar(2) * k3 + k4);
        if (!pk.allFinite()) throw BlowUpError("adjoint blow-up at t_" + std::to_string(k), k);
        p.col(k) = pk;
    }
    return p;
}

/// -p(T) = lambda grad_x g(x_T; omega) + nu, with nu a normal-cone element (zero when free).
template <typename Scalar>
Vector<Scalar> terminal_costate(const ControlSystem<Scalar>& sys, const Vector<Scalar>& x_T, const Vector<Scalar>& omega,
                                Scalar lambda, const std::optional<Vector<Scalar>>& nu = std::nullopt) {
    if (!sys.terminal_cost_gradient) {
        throw TerminalGradientError("terminal gradient unavailable; supply subgradient selection");
    }
    const std::optional<Vector<Scalar>> grad = sys.terminal_cost_gradient(x_T, omega);
    if (!grad || !grad->allFinite()) {
        throw TerminalGradientError("terminal gradient unavailable; supply subgradient selection");
    }
    Vector<Scalar> p = -lambda * *grad;
    if (nu) p -= *nu;
    return p;
}

/// The averaged Hamiltonian at time node k as a function of the control value.
template <typename Scalar>
class NodeHamiltonian {
public:
    NodeHamiltonian(const ControlSystem<Scalar>& sys, const TrajectoryEnsemble<Scalar>& ens,
                    const CostateEnsemble<Scalar>& cost, Eigen::Index k)
        : sys_(sys), ens_(ens), cost_(cost), k_(k), t_(ens.control.grid.node(k)) {
        if (cost.atom_count() != ens.atom_count()) throw Error("costate and trajectory ensembles differ in atom count");
    }

    Scalar operator()(const Vector<Scalar>& u) const {
        Scalar sum(0);
        for (std::size_t j = 0; j < ens_.atom_count(); ++j) {
            const Vector<Scalar> f = sys_.dynamics(t_, ens_.states[j].col(k_), u, ens_.measure.atoms[j]);
            sum += ens_.measure.weights[j] * cost_.costates[j].col(k_).dot(f);
        }
        return sum;
    }

private:
    const ControlSystem<Scalar>& sys_;
    const TrajectoryEnsemble<Scalar>& ens_;
    const CostateEnsemble<Scalar>& cost_;
    Eigen::Index k_;
    Scalar t_;
};

/// sum_j alpha_j p(t_k, omega_j) . f(t_k, x(t_k, omega_j), u, omega_j).
template <typename Scalar>
Scalar averaged_hamiltonian(const ControlSystem<Scalar>& sys, const TrajectoryEnsemble<Scalar>& ens,
                            const CostateEnsemble<Scalar>& cost, Eigen::Index k, const Vector<Scalar>& u) {
    return NodeHamiltonian<Scalar>(sys, ens, cost, k)(u);
}

struct MaximizeOptions {
    int grid_points = 33;
    double tolerance = 1e-8;
    /// Above this many tensor-grid points the box search falls back to coordinate sweeps.
    long long tensor_limit = 200000;
};

template <typename Scalar>
struct HamiltonianMax {
    Vector<Scalar> u;
    Scalar value;
};

namespace detail {

template <typename Scalar, typename F>
std::pair<Scalar, Scalar> golden_section_max(F&& fn, Scalar a, Scalar b, Scalar tol) {
    const Scalar inv_phi = (std::sqrt(Scalar(5)) - Scalar(1)) / Scalar(2);
    Scalar c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
    Scalar fc = fn(c), fd = fn(d);
    while (b - a > tol) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = fn(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = fn(d);
        }
    }
    const Scalar x = (a + b) / Scalar(2);
    return {x, fn(x)};
}

}  // namespace detail

/// Maximizer of the averaged Hamiltonian over U at node k.
///
/// Finite sets are enumerated (lowest index wins ties). Boxes are searched on a
/// coordinate grid and then refined per axis by golden section. When `current`
/// is given and does at least as well as the search result it is returned
/// unchanged, which keeps singular intervals deterministic.
template <typename Scalar>
HamiltonianMax<Scalar> maximize_hamiltonian(const ControlSystem<Scalar>& sys, const TrajectoryEnsemble<Scalar>& ens,
                                            const CostateEnsemble<Scalar>& cost, Eigen::Index k,
                                            const MaximizeOptions& opt = {},
                                            const std::optional<Vector<Scalar>>& current = std::nullopt) {
    const NodeHamiltonian<Scalar> H(sys, ens, cost, k);
    const auto& set = sys.control_set;
    HamiltonianMax<Scalar> best;

    if (set.kind() == ControlSet<Scalar>::Kind::finite) {
        best.u = set.values().front();
        best.value = H(best.u);
        for (std::size_t i = 1; i < set.values().size(); ++i) {
            const Scalar v = H(set.values()[i]);
            if (v > best.value) best = {set.values()[i], v};
        }
    } else {
        const Eigen::Index m = set.dim();
        const int g = std::max(2, opt.grid_points);
        const Vector<Scalar>& lo = set.lo();
        const Vector<Scalar>& hi = set.hi();
        auto grid_value = [&](Eigen::Index axis, long long i) {
            return lo[axis] + (hi[axis] - lo[axis]) * Scalar(i) / Scalar(g - 1);
        };
        const double tensor_size = std::pow(double(g), double(m));
        if (tensor_size <= double(opt.tensor_limit)) {
            std::vector<long long> counts(m, g);
            Vector<Scalar> u(m);
            bool first = true;
            detail::for_each_index(counts, [&](const std::vector<long long>& idx) {
                for (Eigen::Index a = 0; a < m; ++a) u[a] = grid_value(a, idx[a]);
                const Scalar v = H(u);
                if (first || v > best.value) {
                    best = {u, v};
                    first = false;
                }
            });
        } else {
            best.u = set.default_value();
            best.value = H(best.u);
            for (int pass = 0; pass < 2; ++pass) {
                for (Eigen::Index a = 0; a < m; ++a) {
                    Vector<Scalar> u = best.u;
                    for (long long i = 0; i < g; ++i) {
                        u[a] = grid_value(a, i);
                        const Scalar v = H(u);
                        if (v > best.value) best = {u, v};
                    }
                }
            }
        }
        for (Eigen::Index a = 0; a < m; ++a) {
            const Scalar step = (hi[a] - lo[a]) / Scalar(g - 1);
            if (!(step > Scalar(0))) continue;
            Vector<Scalar> u = best.u;
            auto along = [&](Scalar s) {
                u[a] = s;
                return H(u);
            };
            const Scalar a0 = std::max(lo[a], best.u[a] - step), b0 = std::min(hi[a], best.u[a] + step);
            const auto [s, v] = detail::golden_section_max(along, a0, b0, Scalar(opt.tolerance));
            if (v > best.value) {
                best.u[a] = s;
                best.value = v;
            }
        }
    }

    if (current) {
        const Scalar v = H(*current);
        if (v >= best.value) return {*current, v};
    }
    return best;
}

/// Positive-homogeneity scale lambda + max_j |p_j|_inf used to normalize maximality residuals.
/// Falls back to 1 for (near-)trivial multipliers.
template <typename Scalar>
Scalar multiplier_scale(const CostateEnsemble<Scalar>& cost, Scalar floor = Scalar(1e-8)) {
    const Scalar s = cost.lambda + cost.sup_norm();
    return s > floor ? s : Scalar(1);
}

/// Raw per-interval residuals max_U H(t_k, .) - H(t_k, u_k), clamped at zero.
template <typename Scalar>
std::vector<Scalar> maximality_residuals(const ControlSystem<Scalar>& sys, const TrajectoryEnsemble<Scalar>& ens,
                                         const CostateEnsemble<Scalar>& cost, const MaximizeOptions& opt = {}) {
    const auto& u = ens.control;
    std::vector<Scalar> out(static_cast<std::size_t>(u.grid.steps));
    for (Eigen::Index k = 0; k < u.grid.steps; ++k) {
        const Vector<Scalar> uk = u.values.col(k);
        const Scalar best = maximize_hamiltonian(sys, ens, cost, k, opt).value;
        out[static_cast<std::size_t>(k)] = std::max(Scalar(0), best - averaged_hamiltonian(sys, ens, cost, k, uk));
    }
    return out;
}

}  // namespace eoc

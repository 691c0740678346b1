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

// Residual checks for candidate extremals (lambda, u, {x_j}, {p_j}).

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "ensemble_oc/adjoint.hpp"
#include "ensemble_oc/solver.hpp"
#include "ensemble_oc/system.hpp"
#include "ensemble_oc/types.hpp"

namespace eoc {

template <typename Scalar>
struct Certificate {
    TrajectoryEnsemble<Scalar> ensemble;
    CostateEnsemble<Scalar> costates;

    static Certificate from_result(const SolveResult<Scalar>& r) { return {r.ensemble, r.costates}; }

    Scalar lambda() const { return costates.lambda; }
    const ControlFunction<Scalar>& control() const { return ensemble.control; }
    const FiniteSupportMeasure<Scalar>& measure() const { return ensemble.measure; }

    void validate(const ControlSystem<Scalar>& sys) const {
        const auto& u = ensemble.control;
        if (!(costates.lambda >= Scalar(0) && costates.lambda <= Scalar(1))) throw Error("certificate lambda must lie in [0,1]");
        if (u.values.rows() != sys.control_dim || u.values.cols() != u.grid.steps) {
            throw Error("certificate control shape does not match the grid");
        }
        if (ensemble.states.size() != ensemble.measure.size() || costates.costates.size() != ensemble.measure.size()) {
            throw Error("certificate arrays do not match the atom count");
        }
        for (std::size_t j = 0; j < ensemble.states.size(); ++j) {
            const auto& x = ensemble.states[j];
            const auto& p = costates.costates[j];
            if (x.rows() != sys.state_dim || x.cols() != u.grid.node_count() || p.rows() != sys.state_dim ||
                p.cols() != u.grid.node_count()) {
                throw Error("certificate state/costate shape mismatch at atom " + std::to_string(j));
            }
        }
    }
};

enum class VerifyMode { smooth, atomic };

inline const char* to_string(VerifyMode m) { return m == VerifyMode::smooth ? "smooth" : "atomic"; }

struct Tolerances {
    double tol = 1e-6;
    double nontriviality_floor = 1e-8;
    /// Constant C in the discretization allowance C dt^2 for adjoint/dynamics residuals.
    double discretization_constant = 1.0;
    /// Fraction of grid intervals allowed to violate maximality.
    double exceptional_fraction = 0.0;
    VerifyMode mode = VerifyMode::smooth;
    /// Report min_j (lambda + |p_j|_inf) instead of lambda + max_j |p_j|_inf.
    bool per_atom_nontriviality = false;
    MaximizeOptions maximize;
};

template <typename Scalar>
struct ResidualReport {
    Scalar nontriviality = Scalar(0);
    bool nontriviality_pass = false;

    std::vector<Scalar> adjoint;
    std::vector<Scalar> dynamics;
    std::vector<Scalar> transversality;
    /// Raw residuals max_U H - H(u_k), clamped at zero.
    std::vector<Scalar> maximality;
    /// Divisor applied to maximality before thresholding.
    Scalar maximality_scale = Scalar(1);
    std::vector<bool> maximality_node_pass;

    Scalar discretization_allowance = Scalar(0);
    bool adjoint_pass = false;
    bool dynamics_pass = false;
    bool transversality_pass = false;
    bool maximality_pass = false;
    /// Atomic mode only: every support atom carries a state and a costate.
    bool coverage_pass = true;
    std::string message;

    bool all_pass() const {
        return nontriviality_pass && adjoint_pass && dynamics_pass && transversality_pass && maximality_pass && coverage_pass;
    }

    std::vector<std::size_t> failed_maximality_nodes() const {
        std::vector<std::size_t> out;
        for (std::size_t k = 0; k < maximality_node_pass.size(); ++k) {
            if (!maximality_node_pass[k]) out.push_back(k);
        }
        return out;
    }
};

template <typename Scalar>
Scalar check_nontriviality(const Certificate<Scalar>& cert, bool per_atom = false) {
    if (!per_atom) return cert.costates.lambda + cert.costates.sup_norm();
    Scalar worst = std::numeric_limits<Scalar>::infinity();
    for (const auto& p : cert.costates.costates) {
        worst = std::min(worst, cert.costates.lambda + p.colwise().norm().maxCoeff());
    }
    return cert.costates.costates.empty() ? cert.costates.lambda : worst;
}

/// max_k |(p_{k+1} - p_k)/dt + J(t_m, x_m)^T (p_k + p_{k+1})/2| with midpoint values, per atom.
template <typename Scalar>
std::vector<Scalar> check_adjoint(const Certificate<Scalar>& cert, const ControlSystem<Scalar>& sys) {
    const auto& u = cert.control();
    const Scalar h = u.grid.dt();
    std::vector<Scalar> out;
    for (std::size_t j = 0; j < cert.ensemble.atom_count(); ++j) {
        const auto& x = cert.ensemble.states[j];
        const auto& p = cert.costates.costates[j];
        const Vector<Scalar>& omega = cert.measure().atoms[j];
        Scalar r(0);
        for (Eigen::Index k = 0; k < u.grid.steps; ++k) {
            const Scalar tm = (u.grid.node(k) + u.grid.node(k + 1)) / Scalar(2);
            const Vector<Scalar> xm = (x.col(k) + x.col(k + 1)) / Scalar(2);
            const Vector<Scalar> pm = (p.col(k) + p.col(k + 1)) / Scalar(2);
            const Vector<Scalar> res =
                (p.col(k + 1) - p.col(k)) / h + sys.jacobian_x(tm, xm, u.values.col(k), omega).transpose() * pm;
            r = std::max(r, res.norm());
        }
        out.push_back(r);
    }
    return out;
}

/// |x_0 - x0| plus max_k |(x_{k+1} - x_k)/dt - f(t_m, x_m, u_k)| per atom.
template <typename Scalar>
std::vector<Scalar> check_dynamics(const Certificate<Scalar>& cert, const ControlSystem<Scalar>& sys) {
    const auto& u = cert.control();
    const Scalar h = u.grid.dt();
    std::vector<Scalar> out;
    for (std::size_t j = 0; j < cert.ensemble.atom_count(); ++j) {
        const auto& x = cert.ensemble.states[j];
        const Vector<Scalar>& omega = cert.measure().atoms[j];
        Scalar r(0);
        for (Eigen::Index k = 0; k < u.grid.steps; ++k) {
            const Scalar tm = (u.grid.node(k) + u.grid.node(k + 1)) / Scalar(2);
            const Vector<Scalar> xm = (x.col(k) + x.col(k + 1)) / Scalar(2);
            const Vector<Scalar> res = (x.col(k + 1) - x.col(k)) / h - sys.dynamics(tm, xm, u.values.col(k), omega);
            r = std::max(r, res.norm());
        }
        out.push_back(r + (x.col(0) - sys.x0).norm());
    }
    return out;
}

/// Distance from -p_j(T) - lambda grad g_j to the capped normal cone (smooth mode: the cone {0}).
template <typename Scalar>
std::vector<Scalar> check_transversality(const Certificate<Scalar>& cert, const ControlSystem<Scalar>& sys,
                                         VerifyMode mode = VerifyMode::smooth) {
    std::vector<Scalar> out;
    for (std::size_t j = 0; j < cert.ensemble.atom_count(); ++j) {
        const Vector<Scalar> xT = cert.ensemble.terminal(j);
        const Vector<Scalar>& omega = cert.measure().atoms[j];
        const auto& p = cert.costates.costates[j];
        // terminal_costate returns -lambda grad g, so the residue is -p(T) - lambda grad g.
        const Vector<Scalar> v = terminal_costate(sys, xT, omega, cert.lambda()) - p.col(p.cols() - 1);
        if (mode == VerifyMode::smooth) {
            out.push_back(v.norm());
        } else {
            out.push_back(sys.constraint_at(omega).distance_to_normal_cone(xT, v));
        }
    }
    return out;
}

template <typename Scalar>
std::vector<Scalar> check_maximality(const Certificate<Scalar>& cert, const ControlSystem<Scalar>& sys,
                                     const MaximizeOptions& opt = {}) {
    return maximality_residuals(sys, cert.ensemble, cert.costates, opt);
}

template <typename Scalar>
ResidualReport<Scalar> verify_all(const Certificate<Scalar>& cert, const ControlSystem<Scalar>& sys,
                                  const Tolerances& tol = {}) {
    cert.validate(sys);
    ResidualReport<Scalar> r;
    const Scalar eps(tol.tol);

    r.nontriviality = check_nontriviality(cert, tol.per_atom_nontriviality);
    r.nontriviality_pass = r.nontriviality >= Scalar(tol.nontriviality_floor);

    const Scalar h = cert.control().grid.dt();
    r.discretization_allowance = Scalar(tol.discretization_constant) * h * h;
    auto within = [&](const std::vector<Scalar>& v, Scalar bound) {
        return std::all_of(v.begin(), v.end(), [&](Scalar x) { return x <= bound; });
    };

    r.adjoint = check_adjoint(cert, sys);
    r.adjoint_pass = within(r.adjoint, r.discretization_allowance + eps);
    r.dynamics = check_dynamics(cert, sys);
    r.dynamics_pass = within(r.dynamics, r.discretization_allowance + eps);

    try {
        r.transversality = check_transversality(cert, sys, tol.mode);
        r.transversality_pass = within(r.transversality, eps);
    } catch (const TerminalGradientError& e) {
        r.transversality.assign(cert.ensemble.atom_count(), std::numeric_limits<Scalar>::infinity());
        r.transversality_pass = false;
        r.message = e.what();
    }

    r.maximality = check_maximality(cert, sys, tol.maximize);
    r.maximality_scale = multiplier_scale(cert.costates, Scalar(tol.nontriviality_floor));
    std::size_t failures = 0;
    for (Scalar v : r.maximality) {
        const bool ok = v / r.maximality_scale <= eps;
        r.maximality_node_pass.push_back(ok);
        if (!ok) ++failures;
    }
    r.maximality_pass = double(failures) <= tol.exceptional_fraction * double(r.maximality.size());

    if (tol.mode == VerifyMode::atomic) {
        const auto& mu = cert.measure();
        r.coverage_pass = mu.size() > 0 && cert.ensemble.atom_count() == mu.size() &&
                          cert.costates.atom_count() == mu.size();
    }
    return r;
}

}  // namespace eoc

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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ensemble_oc/measure.hpp"
#include "ensemble_oc/types.hpp"

namespace eoc {

template <typename Scalar>
class ControlSet {
public:
    enum class Kind { box, finite };

    static ControlSet box(Vector<Scalar> lo, Vector<Scalar> hi) {
        if (lo.size() == 0 || lo.size() != hi.size()) throw Error("control box bounds must share a positive dimension");
        if (!(lo.array() <= hi.array()).all()) throw Error("control box must satisfy lo <= hi");
        ControlSet s;
        s.kind_ = Kind::box;
        s.lo_ = std::move(lo);
        s.hi_ = std::move(hi);
        return s;
    }

    static ControlSet finite(std::vector<Vector<Scalar>> values) {
        if (values.empty()) throw Error("finite control set must be nonempty");
        for (const auto& v : values) {
            if (v.size() == 0 || v.size() != values.front().size()) throw Error("finite control values must share a dimension");
        }
        ControlSet s;
        s.kind_ = Kind::finite;
        s.values_ = std::move(values);
        return s;
    }

    Kind kind() const { return kind_; }
    Eigen::Index dim() const { return kind_ == Kind::box ? lo_.size() : values_.front().size(); }
    const Vector<Scalar>& lo() const { return lo_; }
    const Vector<Scalar>& hi() const { return hi_; }
    const std::vector<Vector<Scalar>>& values() const { return values_; }

    bool contains(const Vector<Scalar>& u) const {
        if (u.size() != dim()) return false;
        if (kind_ == Kind::box) return (u.array() >= lo_.array()).all() && (u.array() <= hi_.array()).all();
        return std::any_of(values_.begin(), values_.end(), [&](const Vector<Scalar>& v) { return v == u; });
    }

    /// Clamp onto the box, or the nearest element of a finite set (lowest index on ties).
    Vector<Scalar> project(const Vector<Scalar>& u) const {
        if (kind_ == Kind::box) return u.cwiseMax(lo_).cwiseMin(hi_);
        std::size_t best = 0;
        Scalar best_d = (values_[0] - u).squaredNorm();
        for (std::size_t i = 1; i < values_.size(); ++i) {
            const Scalar d = (values_[i] - u).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = i;
            }
        }
        return values_[best];
    }

    /// Box midpoint or first finite element.
    Vector<Scalar> default_value() const { return kind_ == Kind::box ? Vector<Scalar>((lo_ + hi_) / Scalar(2)) : values_.front(); }

private:
    Kind kind_ = Kind::box;
    Vector<Scalar> lo_, hi_;
    std::vector<Vector<Scalar>> values_;
};

/// Terminal target set C(omega) with distance, projection and capped normal-cone oracles.
template <typename Scalar>
class ConstraintSet {
public:
    enum class Kind { whole_space, point, box, halfspace };

    static ConstraintSet whole_space() { return ConstraintSet{}; }

    static ConstraintSet point(Vector<Scalar> target) {
        ConstraintSet c;
        c.kind_ = Kind::point;
        c.a_ = std::move(target);
        return c;
    }

    static ConstraintSet box(Vector<Scalar> lo, Vector<Scalar> hi) {
        if (lo.size() != hi.size() || !(lo.array() <= hi.array()).all()) throw Error("constraint box must satisfy lo <= hi");
        ConstraintSet c;
        c.kind_ = Kind::box;
        c.a_ = std::move(lo);
        c.b_ = std::move(hi);
        return c;
    }

    /// { x : normal . x <= offset }.
    static ConstraintSet halfspace(Vector<Scalar> normal, Scalar offset) {
        if (!(normal.norm() > Scalar(0))) throw Error("halfspace normal must be nonzero");
        ConstraintSet c;
        c.kind_ = Kind::halfspace;
        c.a_ = std::move(normal);
        c.offset_ = offset;
        return c;
    }

    Kind kind() const { return kind_; }
    const Vector<Scalar>& target() const { return a_; }
    const Vector<Scalar>& lo() const { return a_; }
    const Vector<Scalar>& hi() const { return b_; }
    const Vector<Scalar>& normal() const { return a_; }
    Scalar offset() const { return offset_; }

    Vector<Scalar> project(const Vector<Scalar>& x) const {
        switch (kind_) {
            case Kind::whole_space: return x;
            case Kind::point: return a_;
            case Kind::box: return x.cwiseMax(a_).cwiseMin(b_);
            case Kind::halfspace: {
                const Scalar excess = a_.dot(x) - offset_;
                if (excess <= Scalar(0)) return x;
                return x - excess / a_.squaredNorm() * a_;
            }
        }
        return x;
    }

    Scalar distance(const Vector<Scalar>& x) const { return (x - project(x)).norm(); }

    /// Euclidean projection of v onto N^1_C(proj_C(x)) = N_C(proj_C(x)) intersected with the unit ball.
    /// Faces within `active_tol` of x count as active.
    Vector<Scalar> project_onto_normal_cone(const Vector<Scalar>& x, const Vector<Scalar>& v,
                                            Scalar active_tol = Scalar(1e-8)) const {
        Vector<Scalar> cone = Vector<Scalar>::Zero(v.size());
        switch (kind_) {
            case Kind::whole_space: break;
            case Kind::point: cone = v; break;
            case Kind::box: {
                const Vector<Scalar> y = project(x);
                for (Eigen::Index i = 0; i < v.size(); ++i) {
                    const bool upper = y[i] >= b_[i] - active_tol;
                    const bool lower = y[i] <= a_[i] + active_tol;
                    if (upper && lower) cone[i] = v[i];
                    else if (upper) cone[i] = std::max(v[i], Scalar(0));
                    else if (lower) cone[i] = std::min(v[i], Scalar(0));
                }
                break;
            }
            case Kind::halfspace: {
                const Vector<Scalar> y = project(x);
                if (a_.dot(y) - offset_ >= -active_tol * a_.norm()) {
                    const Vector<Scalar> n = a_.normalized();
                    cone = std::max(v.dot(n), Scalar(0)) * n;
                }
                break;
            }
        }
        // For a closed convex cone K, proj_{K cap B}(v) = proj_K(v) / max(1, |proj_K(v)|).
        const Scalar norm = cone.norm();
        return norm > Scalar(1) ? Vector<Scalar>(cone / norm) : cone;
    }

    Scalar distance_to_normal_cone(const Vector<Scalar>& x, const Vector<Scalar>& v, Scalar active_tol = Scalar(1e-8)) const {
        return (v - project_onto_normal_cone(x, v, active_tol)).norm();
    }

private:
    Kind kind_ = Kind::whole_space;
    Vector<Scalar> a_, b_;
    Scalar offset_ = Scalar(0);
};

template <typename Scalar>
struct RegularityData {
    /// sup |f| on the state tube.
    std::optional<Scalar> c;
    /// Lipschitz-in-x bound; a constant or an integrable profile t -> k_f(t).
    std::optional<std::variant<Scalar, std::function<Scalar(Scalar)>>> k_f;
    Scalar k_g = Scalar(1);
    Scalar M = Scalar(0);
    Scalar delta = Scalar(0);
    /// Optional Lipschitz constant of the omega-modulus theta_f, used by property checks only.
    std::optional<Scalar> theta_f_lipschitz;

    void validate() const {
        if (c && *c < Scalar(0)) throw Error("regularity constant c must be nonnegative");
        if (k_f && std::holds_alternative<Scalar>(*k_f) && std::get<Scalar>(*k_f) < Scalar(0)) {
            throw Error("regularity constant k_f must be nonnegative");
        }
        if (k_g < Scalar(1)) throw Error("regularity constant k_g must be >= 1");
        if (M < Scalar(0) || delta < Scalar(0)) throw Error("regularity constants M and delta must be nonnegative");
    }
};

/// Data (f, U, g, C, x0, T) of the average-cost problem.
template <typename Scalar>
struct ControlSystem {
    using Vec = Vector<Scalar>;
    using Mat = Matrix<Scalar>;

    Eigen::Index state_dim = 1;
    Eigen::Index control_dim = 1;
    Scalar horizon = Scalar(1);
    Vec x0;

    std::function<Vec(Scalar, const Vec&, const Vec&, const Vec&)> dynamics;
    /// Optional analytic d f / d x; central differences are used when empty.
    std::function<Mat(Scalar, const Vec&, const Vec&, const Vec&)> dynamics_jacobian;
    std::function<Scalar(const Vec&, const Vec&)> terminal_cost;
    /// Returns nullopt where g(., omega) is not differentiable.
    std::function<std::optional<Vec>(const Vec&, const Vec&)> terminal_cost_gradient;
    /// C(omega); an empty function means C(omega) is the whole space.
    std::function<ConstraintSet<Scalar>(const Vec&)> constraint;

    ControlSet<Scalar> control_set = ControlSet<Scalar>::box(Vec::Constant(1, Scalar(-1)), Vec::Constant(1, Scalar(1)));
    RegularityData<Scalar> regularity;

    void validate() const {
        if (state_dim < 1) throw Error("state_dim must be >= 1");
        if (control_dim < 1) throw Error("control_dim must be >= 1");
        if (!(horizon > Scalar(0))) throw Error("horizon must be positive");
        if (x0.size() != state_dim) throw Error("x0 dimension does not match state_dim");
        if (!dynamics) throw Error("dynamics are required");
        if (!terminal_cost) throw Error("terminal cost is required");
        if (control_set.dim() != control_dim) throw Error("control set dimension does not match control_dim");
        regularity.validate();
    }

    bool constrained() const { return static_cast<bool>(constraint); }

    ConstraintSet<Scalar> constraint_at(const Vec& omega) const {
        return constraint ? constraint(omega) : ConstraintSet<Scalar>::whole_space();
    }

    Mat jacobian_x(Scalar t, const Vec& x, const Vec& u, const Vec& omega) const {
        if (dynamics_jacobian) return dynamics_jacobian(t, x, u, omega);
        return finite_difference_jacobian(t, x, u, omega);
    }

    Mat finite_difference_jacobian(Scalar t, const Vec& x, const Vec& u, const Vec& omega) const {
        Mat jac(state_dim, state_dim);
        Vec xp = x, xm = x;
        for (Eigen::Index i = 0; i < state_dim; ++i) {
            const Scalar h = Scalar(1e-6) * (Scalar(1) + std::abs(x[i]));
            xp[i] = x[i] + h;
            xm[i] = x[i] - h;
            jac.col(i) = (dynamics(t, xp, u, omega) - dynamics(t, xm, u, omega)) / (Scalar(2) * h);
            xp[i] = x[i];
            xm[i] = x[i];
        }
        return jac;
    }
};

/// Uniform grid t_k = k T / N_t, k = 0..N_t.
template <typename Scalar>
struct TimeGrid {
    Eigen::Index steps = 200;
    Scalar horizon = Scalar(1);

    TimeGrid() = default;
    TimeGrid(Eigen::Index n, Scalar t_final) : steps(n), horizon(t_final) {
        if (steps < 1) throw Error("time grid needs at least one interval");
        if (!(horizon > Scalar(0))) throw Error("time grid horizon must be positive");
    }

    Scalar dt() const { return horizon / Scalar(steps); }
    Scalar node(Eigen::Index k) const { return k == steps ? horizon : Scalar(k) * horizon / Scalar(steps); }
    Eigen::Index node_count() const { return steps + 1; }

    bool operator==(const TimeGrid& o) const { return steps == o.steps && horizon == o.horizon; }
};

/// Piecewise-constant control; column k is the value on [t_k, t_{k+1}).
template <typename Scalar>
struct ControlFunction {
    TimeGrid<Scalar> grid;
    Matrix<Scalar> values;

    static ControlFunction constant(const TimeGrid<Scalar>& grid, const Vector<Scalar>& value) {
        ControlFunction u;
        u.grid = grid;
        u.values = value.replicate(1, grid.steps);
        return u;
    }

    Eigen::Index dim() const { return values.rows(); }
    auto value(Eigen::Index k) const { return values.col(k); }

    /// Interval index containing t; t = T maps to the last interval.
    Eigen::Index interval_of(Scalar t) const {
        const auto k = static_cast<Eigen::Index>(std::floor(double(t / grid.dt())));
        return std::clamp<Eigen::Index>(k, 0, grid.steps - 1);
    }

    void project_onto(const ControlSet<Scalar>& set) {
        for (Eigen::Index k = 0; k < values.cols(); ++k) values.col(k) = set.project(values.col(k));
    }
};

template <typename Scalar>
struct TrajectoryEnsemble {
    std::vector<StateArray<Scalar>> states;
    ControlFunction<Scalar> control;
    FiniteSupportMeasure<Scalar> measure;

    std::size_t atom_count() const { return states.size(); }
    Vector<Scalar> terminal(std::size_t j) const { return states[j].col(states[j].cols() - 1); }
};

/// Classical RK4 with the control held constant on each interval.
template <typename Scalar>
StateArray<Scalar> propagate(const ControlSystem<Scalar>& sys, const ControlFunction<Scalar>& u,
                             const Vector<Scalar>& omega) {
    const auto& grid = u.grid;
    if (u.values.cols() != grid.steps || u.values.rows() != sys.control_dim) {
        throw Error("control shape does not match the grid and control_dim");
    }
    const Scalar h = grid.dt();
    StateArray<Scalar> x(sys.state_dim, grid.node_count());
    x.col(0) = sys.x0;
    Vector<Scalar> xk = sys.x0;
    for (Eigen::Index k = 0; k < grid.steps; ++k) {
        const Scalar t = grid.node(k);
        const Vector<Scalar> uk = u.values.col(k);
        const Vector<Scalar> k1 = sys.dynamics(t, xk, uk, omega);
        const Vector<Scalar> k2 = sys.dynamics(t + h / Scalar(2), xk + h / Scalar(2) * k1, uk, omega);
        const Vector<Scalar> k3 = sys.dynamics(t + h / Scalar(2), xk + h / Scalar(2) * k2, uk, omega);
        const Vector<Scalar> k4 = sys.dynamics(t + h, xk + h * k3, uk, omega);
        xk += h / Scalar(6) * (k1 + Scalar(2) * k2 + Scalar(2) * k3 + k4);
        if (!xk.allFinite()) {
            throw BlowUpError("dynamics blow-up at t_" + std::to_string(k + 1), k + 1);
        }
        x.col(k + 1) = xk;
    }
    return x;
}

template <typename Scalar>
TrajectoryEnsemble<Scalar> propagate_ensemble(const ControlSystem<Scalar>& sys, const ControlFunction<Scalar>& u,
                                              const FiniteSupportMeasure<Scalar>& mu_l) {
    TrajectoryEnsemble<Scalar> ens;
    ens.control = u;
    ens.measure = mu_l;
    ens.states.reserve(mu_l.size());
    for (std::size_t j = 0; j < mu_l.size(); ++j) {
        try {
            ens.states.push_back(propagate(sys, u, mu_l.atoms[j]));
        } catch (const BlowUpError& e) {
            throw BlowUpError(std::string(e.what()) + " (atom " + std::to_string(j) + ")", e.node(),
                              static_cast<std::ptrdiff_t>(j));
        }
    }
    return ens;
}

/// sum_j alpha_j g(x(T, omega_j); omega_j).
template <typename Scalar>
Scalar average_cost(const ControlSystem<Scalar>& sys, const TrajectoryEnsemble<Scalar>& ens) {
    Scalar sum(0);
    for (std::size_t j = 0; j < ens.atom_count(); ++j) {
        sum += ens.measure.weights[j] * sys.terminal_cost(ens.terminal(j), ens.measure.atoms[j]);
    }
    return sum;
}

/// sum_j alpha_j d_{C(omega_j)}(x(T, omega_j)).
template <typename Scalar>
Scalar average_constraint_residual(const ControlSystem<Scalar>& sys, const TrajectoryEnsemble<Scalar>& ens) {
    if (!sys.constrained()) return Scalar(0);
    Scalar sum(0);
    for (std::size_t j = 0; j < ens.atom_count(); ++j) {
        sum += ens.measure.weights[j] * sys.constraint_at(ens.measure.atoms[j]).distance(ens.terminal(j));
    }
    return sum;
}

/// Discrete W^{1,1} distance |a_0 - b_0| + sum_k |(a_{k+1} - a_k) - (b_{k+1} - b_k)|.
template <typename Scalar>
Scalar w11_distance(const StateArray<Scalar>& a, const StateArray<Scalar>& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw Error("state arrays must share a shape");
    Scalar sum = (a.col(0) - b.col(0)).norm();
    for (Eigen::Index k = 0; k + 1 < a.cols(); ++k) {
        sum += ((a.col(k + 1) - a.col(k)) - (b.col(k + 1) - b.col(k))).norm();
    }
    return sum;
}

template <typename Scalar>
Scalar sup_distance(const StateArray<Scalar>& a, const StateArray<Scalar>& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw Error("state arrays must share a shape");
    return (a - b).colwise().norm().maxCoeff();
}

/// Measure of the set of times where the controls differ (exact comparison per interval).
template <typename Scalar>
Scalar ekeland_distance(const ControlFunction<Scalar>& u1, const ControlFunction<Scalar>& u2) {
    if (!(u1.grid == u2.grid) || u1.values.rows() != u2.values.rows()) throw Error("controls must share a grid");
    Eigen::Index differing = 0;
    for (Eigen::Index k = 0; k < u1.grid.steps; ++k) {
        if (u1.values.col(k) != u2.values.col(k)) ++differing;
    }
    return Scalar(differing) * u1.grid.dt();
}

template <typename Scalar>
Scalar integrated_k_f(const ControlSystem<Scalar>& sys) {
    if (!sys.regularity.k_f) throw Error("regularity constant k_f is missing");
    const auto& kf = *sys.regularity.k_f;
    if (std::holds_alternative<Scalar>(kf)) return std::get<Scalar>(kf) * sys.horizon;
    // Composite Simpson on 1000 panels.
    const auto& profile = std::get<std::function<Scalar(Scalar)>>(kf);
    const int n = 1000;
    const Scalar h = sys.horizon / Scalar(n);
    Scalar sum = profile(Scalar(0)) + profile(sys.horizon);
    for (int i = 1; i < n; ++i) sum += (i % 2 ? Scalar(4) : Scalar(2)) * profile(Scalar(i) * h);
    return sum * h / Scalar(3);
}

/// beta = 2 c exp(int_0^T k_f).
template <typename Scalar>
Scalar gronwall_bound(const ControlSystem<Scalar>& sys) {
    if (!sys.regularity.c) throw Error("regularity constant c is missing");
    return Scalar(2) * *sys.regularity.c * std::exp(integrated_k_f(sys));
}

template <typename Scalar>
struct SensitivityReport {
    Scalar beta;
    Scalar ekeland;
    Scalar slack;
    std::vector<Scalar> lhs;  ///< per-atom W^{1,1} distance
    Scalar rhs;               ///< beta * d_E + slack
    std::size_t violations = 0;

    bool ok() const { return violations == 0; }
};

/// Compares sup_omega |x(.,u1,omega) - x(.,u2,omega)|_{W11} with beta d_E(u1,u2) + 4 c dt.
template <typename Scalar>
SensitivityReport<Scalar> sensitivity_check(const ControlSystem<Scalar>& sys, const FiniteSupportMeasure<Scalar>& mu_l,
                                            const ControlFunction<Scalar>& u1, const ControlFunction<Scalar>& u2) {
    SensitivityReport<Scalar> r;
    r.beta = gronwall_bound(sys);
    r.ekeland = ekeland_distance(u1, u2);
    r.slack = Scalar(4) * *sys.regularity.c * u1.grid.dt();
    r.rhs = r.beta * r.ekeland + r.slack;
    for (const auto& omega : mu_l.atoms) {
        const Scalar d = w11_distance(propagate(sys, u1, omega), propagate(sys, u2, omega));
        r.lhs.push_back(d);
        if (d > r.rhs) ++r.violations;
    }
    return r;
}

}  // namespace eoc

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

// Forward-backward sweep for the finite-support average-cost problem.
//
// Each sweep propagates every atom forward, builds terminal costates from the
// penalized merit sum_j alpha_j [g + rho/2 d_C^2], integrates the adjoints
// backwards and maximizes the averaged Hamiltonian interval by interval. The
// control moves towards the maximizer with a damped step; an outer loop raises
// rho until the averaged terminal constraint is met.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ensemble_oc/adjoint.hpp"
#include "ensemble_oc/measure.hpp"
#include "ensemble_oc/system.hpp"
#include "ensemble_oc/types.hpp"

namespace eoc {

template <typename Scalar>
struct SolveConfig {
    int grid_steps = 200;
    int level = 6;
    int max_sweeps = 500;
    double merit_tolerance = 1e-9;
    double maximality_target = 1e-6;
    /// Smallest damping factor tried before a sweep is declared stuck.
    double min_step = 1.0 / 1073741824.0;
    double penalty_start = 1.0;
    double penalty_factor = 10.0;
    int max_penalty_rounds = 12;
    double constraint_tolerance = 1e-5;
    MaximizeOptions maximize;
    std::optional<Vector<Scalar>> initial_control;

    void validate() const {
        if (grid_steps < 1 || level < 1 || max_sweeps < 1 || max_penalty_rounds < 1) {
            throw Error("solver grid, level, sweep and round counts must be positive");
        }
        if (!(merit_tolerance > 0) || !(maximality_target > 0) || !(constraint_tolerance > 0)) {
            throw Error("solver tolerances must be positive");
        }
        if (!(min_step > 0 && min_step <= 1)) throw Error("damping factors must lie in (0,1]");
        if (!(penalty_start > 0) || !(penalty_factor > 1)) throw Error("penalty schedule must start positive and grow");
    }
};

enum class SolveStatus { converged, max_iters, error };

inline const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::converged: return "converged";
        case SolveStatus::max_iters: return "max-iters";
        case SolveStatus::error: return "error";
    }
    return "error";
}

template <typename Scalar>
struct SweepRecord {
    Scalar penalty;
    Scalar merit;
    Scalar cost;
    /// Normalized max-over-t maximality residual before the update.
    Scalar maximality;
    Scalar step;
};

template <typename Scalar>
struct SolveResult {
    ControlFunction<Scalar> control;
    TrajectoryEnsemble<Scalar> ensemble;
    CostateEnsemble<Scalar> costates;
    std::vector<SweepRecord<Scalar>> history;
    Scalar cost = Scalar(0);
    Scalar merit = Scalar(0);
    Scalar penalty = Scalar(0);
    Scalar constraint_residual = Scalar(0);
    Scalar maximality_residual = Scalar(0);
    SolveStatus status = SolveStatus::error;
    std::string message;
    int sweeps = 0;
};

/// sum_j alpha_j [g(x_j(T); omega_j) + rho/2 d_{C(omega_j)}(x_j(T))^2].
template <typename Scalar>
Scalar penalized_cost(const ControlSystem<Scalar>& sys, const TrajectoryEnsemble<Scalar>& ens, Scalar rho) {
    Scalar sum(0);
    for (std::size_t j = 0; j < ens.atom_count(); ++j) {
        const Vector<Scalar> xT = ens.terminal(j);
        Scalar term = sys.terminal_cost(xT, ens.measure.atoms[j]);
        if (rho > Scalar(0) && sys.constrained()) {
            const Scalar d = sys.constraint_at(ens.measure.atoms[j]).distance(xT);
            term += rho * d * d / Scalar(2);
        }
        sum += ens.measure.weights[j] * term;
    }
    return sum;
}

/// Costates of the penalized problem with the multiplier split
/// -p_j(T) = lambda (grad g_j + eta_j), eta_j = rho (x_j - proj_C x_j), lambda = 1 / (1 + max_j |eta_j|).
template <typename Scalar>
CostateEnsemble<Scalar> penalized_costates(const ControlSystem<Scalar>& sys, const TrajectoryEnsemble<Scalar>& ens,
                                           Scalar rho) {
    std::vector<Vector<Scalar>> eta(ens.atom_count());
    Scalar largest(0);
    for (std::size_t j = 0; j < ens.atom_count(); ++j) {
        const Vector<Scalar> xT = ens.terminal(j);
        if (rho > Scalar(0) && sys.constrained()) {
            eta[j] = rho * (xT - sys.constraint_at(ens.measure.atoms[j]).project(xT));
        } else {
            eta[j] = Vector<Scalar>::Zero(xT.size());
        }
        largest = std::max(largest, eta[j].norm());
    }
    CostateEnsemble<Scalar> out;
    out.lambda = Scalar(1) / (Scalar(1) + largest);
    out.costates.reserve(ens.atom_count());
    for (std::size_t j = 0; j < ens.atom_count(); ++j) {
        const Vector<Scalar> pT =
            terminal_costate<Scalar>(sys, ens.terminal(j), ens.measure.atoms[j], out.lambda,
                             std::optional<Vector<Scalar>>(Vector<Scalar>(out.lambda * eta[j])));
        out.costates.push_back(backward_adjoint(sys, ens.states[j], ens.control, ens.measure.atoms[j], pT));
    }
    return out;
}

namespace detail {

template <typename Scalar>
class Sweeper {
public:
    Sweeper(const ControlSystem<Scalar>& sys, const FiniteSupportMeasure<Scalar>& mu_l, const SolveConfig<Scalar>& cfg)
        : sys_(sys), mu_(mu_l), cfg_(cfg) {}

    Scalar merit(const ControlFunction<Scalar>& u, Scalar rho) const {
        return penalized_cost(sys_, propagate_ensemble(sys_, u, mu_), rho);
    }

    // Runs sweeps at a fixed penalty, updating `res` in place.
    void run(SolveResult<Scalar>& res, Scalar rho) {
        res.penalty = rho;
        int stalled = 0;
        for (int sweep = 0; sweep < cfg_.max_sweeps; ++sweep) {
            evaluate(res, rho);
            // With the current control as hint the gain equals the clamped maximality residual.
            ControlFunction<Scalar> target = res.control;
            std::vector<Scalar> gain(static_cast<std::size_t>(target.grid.steps));
            for (Eigen::Index k = 0; k < target.grid.steps; ++k) {
                const Vector<Scalar> uk = res.control.values.col(k);
                const auto best = maximize_hamiltonian(sys_, res.ensemble, res.costates, k, cfg_.maximize,
                                                       std::optional<Vector<Scalar>>(uk));
                target.values.col(k) = best.u;
                gain[static_cast<std::size_t>(k)] =
                    std::max(Scalar(0), best.value - averaged_hamiltonian(sys_, res.ensemble, res.costates, k, uk));
            }
            res.maximality_residual = *std::max_element(gain.begin(), gain.end()) / multiplier_scale(res.costates);
            SweepRecord<Scalar> rec{rho, res.merit, res.cost, res.maximality_residual, Scalar(0)};
            if (res.maximality_residual <= Scalar(cfg_.maximality_target)) {
                res.history.push_back(rec);
                res.status = SolveStatus::converged;
                return;
            }
            ++res.sweeps;

            const Scalar before = res.merit;
            std::optional<std::pair<ControlFunction<Scalar>, Scalar>> next =
                sys_.control_set.kind() == ControlSet<Scalar>::Kind::finite ? finite_step(res.control, target, gain, before, rho)
                                                                            : box_step(res.control, target, before, rho);
            if (!next) {
                res.history.push_back(rec);
                res.status = SolveStatus::error;
                res.message = "merit did not decrease at minimal damping (maximality residual " +
                              std::to_string(double(res.maximality_residual)) + ")";
                return;
            }
            rec.step = next->second;
            res.history.push_back(rec);
            res.control = std::move(next->first);

            const Scalar after = merit(res.control, rho);
            if (before - after <= Scalar(cfg_.merit_tolerance) * (Scalar(1) + std::abs(before))) {
                if (++stalled >= 50) {
                    evaluate(res, rho);
                    res.status = SolveStatus::max_iters;
                    res.message = "merit stalled below the merit tolerance";
                    return;
                }
            } else {
                stalled = 0;
            }
        }
        evaluate(res, rho);
        res.status = SolveStatus::max_iters;
        res.message = "sweep budget exhausted";
    }

    void evaluate(SolveResult<Scalar>& res, Scalar rho) const {
        res.ensemble = propagate_ensemble(sys_, res.control, mu_);
        res.costates = penalized_costates(sys_, res.ensemble, rho);
        res.cost = average_cost(sys_, res.ensemble);
        res.merit = penalized_cost(sys_, res.ensemble, rho);
        res.constraint_residual = average_constraint_residual(sys_, res.ensemble);
    }

private:
    // Convex combination (1-s) u + s u+ with s halved until the merit drops,
    // then refined by a root search on the directional derivative.
    std::optional<std::pair<ControlFunction<Scalar>, Scalar>> box_step(const ControlFunction<Scalar>& u,
                                                                      const ControlFunction<Scalar>& target, Scalar m0,
                                                                      Scalar rho) const {
        auto at = [&](Scalar s) {
            ControlFunction<Scalar> v = u;
            v.values = u.values + s * (target.values - u.values);
            v.project_onto(sys_.control_set);
            return v;
        };
        auto phi = [&](Scalar s) { return merit(at(s), rho); };

        Scalar s(1);
        Scalar ms = phi(s);
        while (!(ms < m0)) {
            s /= Scalar(2);
            if (s < Scalar(cfg_.min_step)) return std::nullopt;
            ms = phi(s);
        }

        const Scalar s_hi = std::min(Scalar(1), Scalar(2) * s);
        const Scalar h = Scalar(1e-6) * s_hi;
        auto slope = [&](Scalar x) {
            if (x - h < Scalar(0)) return (phi(x + h) - phi(x)) / h;
            if (x + h > s_hi) return (phi(x) - phi(x - h)) / h;
            return (phi(x + h) - phi(x - h)) / (Scalar(2) * h);
        };
        std::vector<Scalar> candidates{s_hi};
        Scalar a(0), b = s_hi;
        Scalar fa = slope(a), fb = slope(b);
        if (fa < Scalar(0) && fb > Scalar(0)) {
            // Illinois false position on phi'.
            int side = 0;
            for (int it = 0; it < 80 && b - a > Scalar(1e-15) * s_hi; ++it) {
                const Scalar c = (a * fb - b * fa) / (fb - fa);
                const Scalar fc = slope(c);
                if (fc == Scalar(0)) {
                    a = b = c;
                    break;
                }
                if ((fc < Scalar(0)) == (fa < Scalar(0))) {
                    a = c;
                    fa = fc;
                    if (side == -1) fb /= Scalar(2);
                    side = -1;
                } else {
                    b = c;
                    fb = fc;
                    if (side == 1) fa /= Scalar(2);
                    side = 1;
                }
            }
            candidates.push_back((a + b) / Scalar(2));
        }
        Scalar best_s = s, best_m = ms;
        for (Scalar c : candidates) {
            if (c == s) continue;
            const Scalar mc = phi(c);
            if (mc < best_m) {
                best_m = mc;
                best_s = c;
            }
        }
        return std::make_pair(at(best_s), best_s);
    }

    // Switches the ceil(s n) intervals with the largest Hamiltonian gain.
    std::optional<std::pair<ControlFunction<Scalar>, Scalar>> finite_step(const ControlFunction<Scalar>& u,
                                                                         const ControlFunction<Scalar>& target,
                                                                         const std::vector<Scalar>& gain, Scalar m0,
                                                                         Scalar rho) const {
        std::vector<Eigen::Index> changed;
        for (Eigen::Index k = 0; k < u.grid.steps; ++k) {
            if (target.values.col(k) != u.values.col(k)) changed.push_back(k);
        }
        if (changed.empty()) return std::nullopt;
        std::stable_sort(changed.begin(), changed.end(), [&](Eigen::Index a, Eigen::Index b) {
            return gain[static_cast<std::size_t>(a)] > gain[static_cast<std::size_t>(b)];
        });
        for (Scalar s(1); s >= Scalar(cfg_.min_step); s /= Scalar(2)) {
            const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(double(s) * double(changed.size()))));
            ControlFunction<Scalar> v = u;
            for (std::size_t i = 0; i < n; ++i) v.values.col(changed[i]) = target.values.col(changed[i]);
            if (merit(v, rho) < m0) return std::make_pair(std::move(v), s);
            if (n == 1) break;
        }
        // Single switches further down the gain ranking.
        for (std::size_t i = 1; i < changed.size(); ++i) {
            ControlFunction<Scalar> v = u;
            v.values.col(changed[i]) = target.values.col(changed[i]);
            if (merit(v, rho) < m0) return std::make_pair(std::move(v), Scalar(1) / Scalar(changed.size()));
        }
        return std::nullopt;
    }

    const ControlSystem<Scalar>& sys_;
    const FiniteSupportMeasure<Scalar>& mu_;
    const SolveConfig<Scalar>& cfg_;
};

// Coincident atoms merged in first-occurrence order; slot[j] is the merged index of atom j.
template <typename Scalar>
FiniteSupportMeasure<Scalar> merge_coincident(const FiniteSupportMeasure<Scalar>& mu, std::vector<std::size_t>& slot) {
    FiniteSupportMeasure<Scalar> out;
    out.space = mu.space;
    out.level = mu.level;
    out.trimmed_mass = mu.trimmed_mass;
    slot.resize(mu.size());
    for (std::size_t j = 0; j < mu.size(); ++j) {
        const std::ptrdiff_t i = out.find(mu.atoms[j]);
        if (i >= 0) {
            out.weights[static_cast<std::size_t>(i)] += mu.weights[j];
            slot[j] = static_cast<std::size_t>(i);
        } else {
            slot[j] = out.atoms.size();
            out.atoms.push_back(mu.atoms[j]);
            out.weights.push_back(mu.weights[j]);
        }
    }
    return out;
}

template <typename Scalar>
void expand_atoms(SolveResult<Scalar>& res, const FiniteSupportMeasure<Scalar>& mu, const std::vector<std::size_t>& slot) {
    auto spread = [&](std::vector<StateArray<Scalar>>& arrays) {
        if (arrays.empty()) return;
        std::vector<StateArray<Scalar>> full;
        full.reserve(slot.size());
        for (std::size_t i : slot) full.push_back(arrays[i]);
        arrays = std::move(full);
    };
    spread(res.ensemble.states);
    spread(res.costates.costates);
    res.ensemble.measure = mu;
}

}  // namespace detail

/// Solves the problem on a fixed finite-support measure.
/// Coincident atoms are solved as one atom carrying their combined weight.
template <typename Scalar>
SolveResult<Scalar> solve_finite(const ControlSystem<Scalar>& sys, const FiniteSupportMeasure<Scalar>& mu_l,
                                 const SolveConfig<Scalar>& cfg,
                                 const std::optional<ControlFunction<Scalar>>& warm_start = std::nullopt) {
    sys.validate();
    cfg.validate();
    mu_l.validate();

    SolveResult<Scalar> res;
    const TimeGrid<Scalar> grid(cfg.grid_steps, sys.horizon);
    if (warm_start && warm_start->grid == grid) {
        res.control = *warm_start;
    } else {
        const Vector<Scalar> u0 = cfg.initial_control ? *cfg.initial_control : sys.control_set.default_value();
        if (u0.size() != sys.control_dim) throw Error("initial control dimension does not match control_dim");
        res.control = ControlFunction<Scalar>::constant(grid, u0);
    }
    res.control.project_onto(sys.control_set);

    std::vector<std::size_t> slot;
    const FiniteSupportMeasure<Scalar> merged = detail::merge_coincident(mu_l, slot);
    detail::Sweeper<Scalar> sweeper(sys, merged, cfg);
    [&] {
        try {
            if (!sys.constrained()) {
                sweeper.run(res, Scalar(0));
                return;
            }
            Scalar rho(cfg.penalty_start);
            for (int round = 0; round < cfg.max_penalty_rounds; ++round, rho *= Scalar(cfg.penalty_factor)) {
                sweeper.run(res, rho);
                if (res.status == SolveStatus::error) return;
                if (res.status == SolveStatus::converged && res.constraint_residual <= Scalar(cfg.constraint_tolerance)) {
                    return;
                }
            }
            res.status = SolveStatus::max_iters;
            res.message = "penalty ladder exhausted with constraint residual " + std::to_string(double(res.constraint_residual));
        } catch (const Error& e) {
            res.status = SolveStatus::error;
            res.message = e.what();
        }
    }();
    if (merged.size() != mu_l.size()) detail::expand_atoms(res, mu_l, slot);
    return res;
}

/// Discretizes `mu` at cfg.level and solves the finite-support problem.
template <typename Scalar>
SolveResult<Scalar> solve(const ControlSystem<Scalar>& sys, const ProbabilityMeasure<Scalar>& mu,
                          const SolveConfig<Scalar>& cfg,
                          const std::optional<ControlFunction<Scalar>>& warm_start = std::nullopt) {
    return solve_finite(sys, discretize(mu, cfg.level), cfg, warm_start);
}

/// Solves at each level in turn, warm-starting from the previous control.
/// Purely atomic measures discretize identically at every level, so one solve suffices.
template <typename Scalar>
std::vector<SolveResult<Scalar>> refine(const ControlSystem<Scalar>& sys, const ProbabilityMeasure<Scalar>& mu,
                                        SolveConfig<Scalar> cfg, const std::vector<int>& levels) {
    std::vector<SolveResult<Scalar>> out;
    std::optional<ControlFunction<Scalar>> warm;
    for (int level : levels) {
        cfg.level = level;
        out.push_back(solve(sys, mu, cfg, warm));
        warm = out.back().control;
        if (mu.kind() == ProbabilityMeasure<Scalar>::Kind::atoms) break;
    }
    return out;
}

template <typename Scalar>
struct OracleResult {
    ControlFunction<Scalar> control;
    Scalar cost;
};

/// Exhaustive search over all piecewise-constant sequences drawn from `controls`.
template <typename Scalar>
OracleResult<Scalar> brute_force_oracle(const ControlSystem<Scalar>& sys, const FiniteSupportMeasure<Scalar>& mu_l,
                                        const TimeGrid<Scalar>& grid, const std::vector<Vector<Scalar>>& controls,
                                        Scalar rho = Scalar(0)) {
    if (grid.steps > 8 || controls.size() > 5 || controls.empty()) {
        throw Error("enumeration budget exceeded: need N_t <= 8 and 1 <= |U| <= 5");
    }
    ControlFunction<Scalar> u = ControlFunction<Scalar>::constant(grid, controls.front());
    std::vector<std::size_t> digits(static_cast<std::size_t>(grid.steps), 0);
    OracleResult<Scalar> best{u, penalized_cost(sys, propagate_ensemble(sys, u, mu_l), rho)};
    while (true) {
        std::size_t pos = digits.size();
        while (pos > 0) {
            --pos;
            if (++digits[pos] < controls.size()) break;
            digits[pos] = 0;
            if (pos == 0) return best;
        }
        for (std::size_t k = 0; k < digits.size(); ++k) u.values.col(static_cast<Eigen::Index>(k)) = controls[digits[k]];
        const Scalar c = penalized_cost(sys, propagate_ensemble(sys, u, mu_l), rho);
        if (c < best.cost) best = {u, c};
    }
}

}  // namespace eoc

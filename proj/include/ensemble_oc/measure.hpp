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

// Probability measures on a parameter space and their nested finite-support
// (Dirac) approximations.
//
// A FiniteSupportMeasure at level l is built from a partition of a compact box
// K_l into cells of diameter <= 1/l. Each non-empty cell contributes one atom
// carrying the cell's mass; the mass outside K_l (only for unbounded support)
// is lumped into a single residual atom placed at the density mean. Atoms of
// the atomic part of a measure are carried over verbatim at every level.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ensemble_oc/types.hpp"

namespace eoc {

enum class Metric { euclidean, discrete };

template <typename Scalar>
struct Box {
    Vector<Scalar> lo;
    Vector<Scalar> hi;

    Box() = default;
    Box(Vector<Scalar> lower, Vector<Scalar> upper) : lo(std::move(lower)), hi(std::move(upper)) {
        if (lo.size() != hi.size() || lo.size() == 0) {
            throw Error("box bounds must be non-empty and of equal dimension");
        }
        for (Eigen::Index i = 0; i < lo.size(); ++i) {
            if (!(lo[i] < hi[i])) throw Error("box bounds must satisfy lo < hi on every axis");
        }
    }

    Eigen::Index dim() const { return lo.size(); }

    bool bounded() const { return lo.allFinite() && hi.allFinite(); }

    bool contains(const Vector<Scalar>& p) const {
        return p.size() == lo.size() && (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
    }

    Vector<Scalar> center() const { return (lo + hi) / Scalar(2); }

    Scalar diameter() const { return (hi - lo).norm(); }
};

template <typename Scalar>
struct ParameterSpace {
    Eigen::Index dimension = 1;
    Metric metric = Metric::euclidean;
    std::optional<Box<Scalar>> bounds;

    Scalar distance(const Vector<Scalar>& a, const Vector<Scalar>& b) const {
        if (metric == Metric::discrete) return (a == b) ? Scalar(0) : Scalar(1);
        return (a - b).norm();
    }
};

template <typename Scalar>
struct Atom {
    Vector<Scalar> point;
    Scalar weight;
};

/// Absolutely continuous part of a measure: a normalized density on a box.
///
/// For unbounded domains `marginal_cdf` supplies the per-axis trimming rule
/// used to construct the compact set K_l; without it discretization fails.
template <typename Scalar>
struct DensityPart {
    Box<Scalar> domain;
    std::function<Scalar(const Vector<Scalar>&)> density;
    int quadrature_nodes = 1024;
    std::vector<std::function<Scalar(Scalar)>> marginal_cdf;
    std::optional<Vector<Scalar>> mean;
};

namespace detail {

inline constexpr long long quadrature_budget = 1LL << 22;

// Calls fn(multi_index) for every index in the tensor grid with `counts` per axis;
// the first axis varies slowest.
template <typename F>
void for_each_index(const std::vector<long long>& counts, F&& fn) {
    std::vector<long long> idx(counts.size(), 0);
    for (long long c : counts) {
        if (c <= 0) return;
    }
    while (true) {
        fn(idx);
        std::ptrdiff_t axis = static_cast<std::ptrdiff_t>(counts.size()) - 1;
        while (axis >= 0) {
            if (++idx[axis] < counts[axis]) break;
            idx[axis] = 0;
            --axis;
        }
        if (axis < 0) return;
    }
}

// Composite midpoint rule: sum of fn(node) * node volume.
template <typename Scalar, typename F>
Scalar midpoint_sum(const Box<Scalar>& box, const std::vector<long long>& nodes, F&& fn) {
    const Eigen::Index d = box.dim();
    Vector<Scalar> step(d);
    Scalar volume(1);
    for (Eigen::Index i = 0; i < d; ++i) {
        step[i] = (box.hi[i] - box.lo[i]) / Scalar(nodes[i]);
        volume *= step[i];
    }
    Scalar sum(0);
    Vector<Scalar> x(d);
    for_each_index(nodes, [&](const std::vector<long long>& idx) {
        for (Eigen::Index i = 0; i < d; ++i) x[i] = box.lo[i] + (Scalar(idx[i]) + Scalar(0.5)) * step[i];
        sum += fn(x);
    });
    return sum * volume;
}

inline long long nodes_per_axis(int requested, Eigen::Index dim) {
    const double cap = std::floor(std::pow(double(quadrature_budget), 1.0 / double(dim)) + 1e-9);
    return std::max<long long>(1, std::min<long long>(requested, static_cast<long long>(cap)));
}

template <typename Scalar>
Scalar quantile_from_cdf(const std::function<Scalar(Scalar)>& cdf, Scalar prob, Scalar lo, Scalar hi) {
    // Expand an initial bracket until it straddles the requested level.
    Scalar a = std::isfinite(double(lo)) ? lo : Scalar(-1);
    Scalar b = std::isfinite(double(hi)) ? hi : Scalar(1);
    while (!std::isfinite(double(lo)) && cdf(a) > prob) a *= Scalar(2);
    while (!std::isfinite(double(hi)) && cdf(b) < prob) b *= Scalar(2);
    for (int it = 0; it < 200 && b - a > std::numeric_limits<Scalar>::epsilon() * (Scalar(1) + std::abs(a) + std::abs(b)); ++it) {
        const Scalar m = (a + b) / Scalar(2);
        if (cdf(m) < prob) a = m; else b = m;
    }
    return (a + b) / Scalar(2);
}

}  // namespace detail

template <typename Scalar>
class ProbabilityMeasure {
public:
    enum class Kind { atoms, density, mixture };

    static ProbabilityMeasure from_atoms(std::vector<Atom<Scalar>> atoms, Metric metric = Metric::euclidean) {
        ProbabilityMeasure mu;
        mu.kind_ = Kind::atoms;
        mu.atomic_mass_ = Scalar(1);
        mu.space_.metric = metric;
        mu.set_atoms(std::move(atoms));
        return mu;
    }

    static ProbabilityMeasure from_density(DensityPart<Scalar> part) {
        ProbabilityMeasure mu;
        mu.kind_ = Kind::density;
        mu.atomic_mass_ = Scalar(0);
        mu.set_density(std::move(part));
        return mu;
    }

    /// atomic_mass * sum_i w_i delta_{a_i} + (1 - atomic_mass) * density, with sum_i w_i = 1.
    static ProbabilityMeasure mixture(std::vector<Atom<Scalar>> atoms, Scalar atomic_mass, DensityPart<Scalar> part) {
        if (!(atomic_mass > Scalar(0) && atomic_mass < Scalar(1))) {
            throw Error("mixture atomic mass must lie in (0,1)");
        }
        ProbabilityMeasure mu;
        mu.kind_ = Kind::mixture;
        mu.atomic_mass_ = atomic_mass;
        mu.set_density(std::move(part));
        mu.set_atoms(std::move(atoms));
        return mu;
    }

    static DensityPart<Scalar> uniform_part(const Box<Scalar>& domain) {
        if (!domain.bounded()) throw Error("uniform density requires a bounded domain");
        Scalar volume = (domain.hi - domain.lo).prod();
        DensityPart<Scalar> part;
        part.domain = domain;
        part.density = [volume](const Vector<Scalar>&) { return Scalar(1) / volume; };
        part.mean = domain.center();
        return part;
    }

    /// Product of one-dimensional normal densities truncated to `domain`.
    static DensityPart<Scalar> truncated_gaussian_part(const Box<Scalar>& domain, const Vector<Scalar>& mean,
                                                       const Vector<Scalar>& sigma) {
        const Eigen::Index d = domain.dim();
        if (mean.size() != d || sigma.size() != d) throw Error("gaussian mean/sigma dimension mismatch");
        if (!(sigma.array() > Scalar(0)).all()) throw Error("gaussian sigma must be positive");
        Vector<Scalar> norm(d);
        for (Eigen::Index i = 0; i < d; ++i) {
            norm[i] = normal_cdf((domain.hi[i] - mean[i]) / sigma[i]) - normal_cdf((domain.lo[i] - mean[i]) / sigma[i]);
            if (!(norm[i] > Scalar(0))) throw Error("truncated gaussian has no mass on its domain");
        }
        DensityPart<Scalar> part;
        part.domain = domain;
        part.density = [domain, mean, sigma, norm](const Vector<Scalar>& x) {
            if (!domain.contains(x)) return Scalar(0);
            Scalar value(1);
            for (Eigen::Index i = 0; i < x.size(); ++i) {
                const Scalar z = (x[i] - mean[i]) / sigma[i];
                value *= std::exp(-z * z / Scalar(2)) / (sigma[i] * std::sqrt(Scalar(2) * Scalar(M_PI)) * norm[i]);
            }
            return value;
        };
        for (Eigen::Index i = 0; i < d; ++i) {
            const Scalar lo = domain.lo[i], hi = domain.hi[i], m = mean[i], s = sigma[i], z = norm[i];
            part.marginal_cdf.push_back([lo, hi, m, s, z](Scalar x) {
                if (x <= lo) return Scalar(0);
                if (x >= hi) return Scalar(1);
                return (normal_cdf((x - m) / s) - normal_cdf((lo - m) / s)) / z;
            });
        }
        if (!domain.bounded()) {
            // Mean of the truncated marginals is only needed for the residual atom.
            Vector<Scalar> mu(d);
            for (Eigen::Index i = 0; i < d; ++i) {
                const Scalar a = (domain.lo[i] - mean[i]) / sigma[i], b = (domain.hi[i] - mean[i]) / sigma[i];
                mu[i] = mean[i] + sigma[i] * (normal_pdf(a) - normal_pdf(b)) / norm[i];
            }
            part.mean = mu;
        }
        return part;
    }

    static ProbabilityMeasure uniform(const Box<Scalar>& domain) { return from_density(uniform_part(domain)); }

    static ProbabilityMeasure truncated_gaussian(const Box<Scalar>& domain, const Vector<Scalar>& mean,
                                                 const Vector<Scalar>& sigma) {
        return from_density(truncated_gaussian_part(domain, mean, sigma));
    }

    static ProbabilityMeasure gaussian(const Vector<Scalar>& mean, const Vector<Scalar>& sigma) {
        const Scalar inf = std::numeric_limits<Scalar>::infinity();
        Vector<Scalar> lo = Vector<Scalar>::Constant(mean.size(), -inf);
        Vector<Scalar> hi = Vector<Scalar>::Constant(mean.size(), inf);
        Box<Scalar> box;
        box.lo = lo;
        box.hi = hi;
        return from_density(truncated_gaussian_part(box, mean, sigma));
    }

    Kind kind() const { return kind_; }
    const ParameterSpace<Scalar>& space() const { return space_; }
    Eigen::Index dimension() const { return space_.dimension; }

    /// Atoms of the atomic part; weights sum to one within the part.
    const std::vector<Atom<Scalar>>& atoms() const { return atoms_; }
    Scalar atomic_mass() const { return atomic_mass_; }
    const DensityPart<Scalar>* density() const { return density_ ? &*density_ : nullptr; }

    static Scalar normal_cdf(Scalar z) { return Scalar(0.5) * std::erfc(-z / std::sqrt(Scalar(2))); }
    static Scalar normal_pdf(Scalar z) {
        if (!std::isfinite(double(z))) return Scalar(0);
        return std::exp(-z * z / Scalar(2)) / std::sqrt(Scalar(2) * Scalar(M_PI));
    }

private:
    void set_atoms(std::vector<Atom<Scalar>> atoms) {
        if (atoms.empty()) throw Error("atomic measure needs at least one atom");
        const Eigen::Index d = atoms.front().point.size();
        if (d == 0) throw Error("atom points must be non-empty");
        if (density_ && density_->domain.dim() != d) throw Error("atom dimension does not match density domain");
        Scalar total(0);
        for (const auto& a : atoms) {
            if (a.point.size() != d) throw Error("atoms must share one dimension");
            if (!(a.weight > Scalar(0))) throw Error("atom weights must be strictly positive");
            total += a.weight;
        }
        if (abs(total - Scalar(1)) > Scalar(1e-12)) throw Error("atom weights must sum to 1 within 1e-12");
        space_.dimension = d;
        atoms_ = std::move(atoms);
    }

    void set_density(DensityPart<Scalar> part) {
        if (!part.density) throw Error("density function is required");
        if (part.domain.dim() == 0) throw Error("density domain is empty");
        if (part.quadrature_nodes < 1) throw Error("quadrature node count must be positive");
        if (!part.marginal_cdf.empty() && Eigen::Index(part.marginal_cdf.size()) != part.domain.dim()) {
            throw Error("one marginal cdf per axis is required");
        }
        space_.dimension = part.domain.dim();
        if (part.domain.bounded()) space_.bounds = part.domain;
        density_ = std::move(part);
    }

    static Scalar abs(Scalar v) { return v < Scalar(0) ? -v : v; }

    Kind kind_ = Kind::atoms;
    ParameterSpace<Scalar> space_;
    std::vector<Atom<Scalar>> atoms_;
    Scalar atomic_mass_ = Scalar(1);
    std::optional<DensityPart<Scalar>> density_;
};

template <typename Scalar>
struct FiniteSupportMeasure {
    ParameterSpace<Scalar> space;
    std::vector<Vector<Scalar>> atoms;
    std::vector<Scalar> weights;
    int level = 0;
    /// Either empty or one entry per atom; nullopt marks atoms not generated by a cell.
    std::vector<std::optional<Box<Scalar>>> parent_cells;
    /// Mass of the parameter space outside K_l carried by the residual atom.
    Scalar trimmed_mass = Scalar(0);

    std::size_t size() const { return atoms.size(); }

    static FiniteSupportMeasure from_atoms(const std::vector<Atom<Scalar>>& list, int level = 0) {
        FiniteSupportMeasure m;
        m.level = level;
        for (const auto& a : list) {
            m.atoms.push_back(a.point);
            m.weights.push_back(a.weight);
        }
        if (!m.atoms.empty()) m.space.dimension = m.atoms.front().size();
        m.validate();
        return m;
    }

    void validate() const {
        if (atoms.empty() || atoms.size() != weights.size()) throw Error("finite-support measure shape mismatch");
        Scalar total(0);
        for (std::size_t j = 0; j < atoms.size(); ++j) {
            if (atoms[j].size() != space.dimension) throw Error("atom dimension mismatch");
            if (!(weights[j] > Scalar(0) && weights[j] <= Scalar(1))) throw Error("atom weights must lie in (0,1]");
            total += weights[j];
        }
        if (std::abs(double(total) - 1.0) > 1e-12) throw Error("atom weights must sum to 1 within 1e-12");
        if (!parent_cells.empty()) {
            if (parent_cells.size() != atoms.size()) throw Error("parent cell list shape mismatch");
            for (std::size_t j = 0; j < atoms.size(); ++j) {
                if (parent_cells[j] && !parent_cells[j]->contains(atoms[j])) {
                    throw Error("atom does not lie in its parent cell");
                }
            }
        }
    }

    /// Index of an atom equal to `p` (tolerance 0), or -1.
    std::ptrdiff_t find(const Vector<Scalar>& p) const {
        for (std::size_t j = 0; j < atoms.size(); ++j) {
            if (atoms[j].size() == p.size() && atoms[j] == p) return static_cast<std::ptrdiff_t>(j);
        }
        return -1;
    }
};

namespace detail {

template <typename Scalar>
struct PendingAtom {
    Vector<Scalar> point;
    Scalar raw_mass;
    std::optional<Box<Scalar>> cell;
};

// Splits `box` until every piece holds exactly one of `points`, appending one
// pending atom per piece. Cuts are placed halfway between neighbouring points
// along the axis of largest spread, so every piece stays inside the cell.
template <typename Scalar>
void split_cell(const Box<Scalar>& box, std::vector<Vector<Scalar>> points, const std::vector<long long>& nodes,
                const std::function<Scalar(const Vector<Scalar>&)>& density, std::vector<PendingAtom<Scalar>>& out) {
    if (points.size() == 1) {
        const Scalar mass = midpoint_sum(box, nodes, density);
        out.push_back({points.front(), mass, box});
        return;
    }
    const Eigen::Index d = box.dim();
    Eigen::Index axis = 0;
    Scalar best_spread(-1);
    for (Eigen::Index i = 0; i < d; ++i) {
        Scalar lo = points.front()[i], hi = points.front()[i];
        for (const auto& p : points) {
            lo = std::min(lo, p[i]);
            hi = std::max(hi, p[i]);
        }
        if (hi - lo > best_spread) {
            best_spread = hi - lo;
            axis = i;
        }
    }
    std::stable_sort(points.begin(), points.end(),
                     [axis](const Vector<Scalar>& a, const Vector<Scalar>& b) { return a[axis] < b[axis]; });
    std::size_t mid = points.size() / 2;
    // Move the cut off ties so both sides stay non-empty.
    while (mid < points.size() && points[mid][axis] == points[mid - 1][axis]) ++mid;
    if (mid == points.size()) {
        mid = points.size() / 2;
        while (mid > 1 && points[mid - 1][axis] == points[mid - 2][axis]) --mid;
    }
    const Scalar cut = (points[mid - 1][axis] + points[mid][axis]) / Scalar(2);
    Box<Scalar> left = box, right = box;
    left.hi[axis] = cut;
    right.lo[axis] = cut;
    split_cell(left, std::vector<Vector<Scalar>>(points.begin(), points.begin() + mid), nodes, density, out);
    split_cell(right, std::vector<Vector<Scalar>>(points.begin() + mid, points.end()), nodes, density, out);
}

template <typename Scalar>
Vector<Scalar> density_mean(const DensityPart<Scalar>& part, const Box<Scalar>& box) {
    const Eigen::Index d = box.dim();
    std::vector<long long> nodes(d, nodes_per_axis(part.quadrature_nodes, d));
    Vector<Scalar> first = Vector<Scalar>::Zero(d);
    Scalar mass(0);
    Vector<Scalar> step(d);
    for (Eigen::Index i = 0; i < d; ++i) step[i] = (box.hi[i] - box.lo[i]) / Scalar(nodes[i]);
    Vector<Scalar> x(d);
    for_each_index(nodes, [&](const std::vector<long long>& idx) {
        for (Eigen::Index i = 0; i < d; ++i) x[i] = box.lo[i] + (Scalar(idx[i]) + Scalar(0.5)) * step[i];
        const Scalar w = part.density(x);
        first += w * x;
        mass += w;
    });
    return first / mass;
}

// Compact box K_l holding all but < 1/l of the density's mass.
template <typename Scalar>
Box<Scalar> trimmed_support(const DensityPart<Scalar>& part, int level) {
    if (part.domain.bounded()) return part.domain;
    const Eigen::Index d = part.domain.dim();
    if (part.marginal_cdf.empty()) {
        throw Error("cannot construct K_l: unbounded density support and no quantile-trimming rule configured");
    }
    // Tail mass per side 1/(4 d l) leaves at most 1/(2l) outside the box.
    const Scalar tail = Scalar(1) / (Scalar(4) * Scalar(d) * Scalar(level));
    Box<Scalar> k;
    k.lo.resize(d);
    k.hi.resize(d);
    for (Eigen::Index i = 0; i < d; ++i) {
        k.lo[i] = quantile_from_cdf(part.marginal_cdf[i], tail, part.domain.lo[i], part.domain.hi[i]);
        k.hi[i] = quantile_from_cdf(part.marginal_cdf[i], Scalar(1) - tail, part.domain.lo[i], part.domain.hi[i]);
        if (!(k.lo[i] < k.hi[i])) k.hi[i] = k.lo[i] + Scalar(1) / Scalar(level);
    }
    return k;
}

}  // namespace detail

/// Finite-support approximation mu_l of `mu`.
///
/// When `previous` is given, its atoms that came from the density part are
/// reused as cell representatives so that the atom sets are nested.
template <typename Scalar>
FiniteSupportMeasure<Scalar> discretize(const ProbabilityMeasure<Scalar>& mu, int level,
                                        const FiniteSupportMeasure<Scalar>* previous = nullptr) {
    if (level < 1) throw Error("discretization level must be >= 1");
    const Eigen::Index d = mu.dimension();

    FiniteSupportMeasure<Scalar> out;
    out.space = mu.space();
    out.level = level;

    std::vector<detail::PendingAtom<Scalar>> pending;
    for (const auto& a : mu.atoms()) pending.push_back({a.point, mu.atomic_mass() * a.weight, std::nullopt});

    const DensityPart<Scalar>* part = mu.density();
    if (part != nullptr) {
        if (mu.space().metric == Metric::discrete) throw Error("densities require the euclidean metric");
        const Scalar density_mass = Scalar(1) - mu.atomic_mass();
        Box<Scalar> k = detail::trimmed_support(*part, level);
        const bool trimmed = !part->domain.bounded();

        std::vector<Vector<Scalar>> reused;
        if (previous != nullptr) {
            for (const auto& p : previous->atoms) {
                const bool atomic = std::any_of(mu.atoms().begin(), mu.atoms().end(),
                                                [&](const Atom<Scalar>& a) { return a.point == p; });
                if (atomic || p.size() != d || !part->domain.contains(p)) continue;
                reused.push_back(p);
                k.lo = k.lo.cwiseMin(p);
                k.hi = k.hi.cwiseMax(p);
            }
        }

        const Scalar side = Scalar(1) / (Scalar(level) * std::sqrt(Scalar(d)));
        std::vector<long long> cells(d);
        std::vector<long long> nodes(d);
        const long long q_total = detail::nodes_per_axis(part->quadrature_nodes, d);
        Vector<Scalar> width(d);
        for (Eigen::Index i = 0; i < d; ++i) {
            cells[i] = std::max<long long>(1, static_cast<long long>(std::ceil(double((k.hi[i] - k.lo[i]) / side) - 1e-9)));
            width[i] = (k.hi[i] - k.lo[i]) / Scalar(cells[i]);
            nodes[i] = std::max<long long>(1, (q_total + cells[i] - 1) / cells[i]);
        }

        auto cell_of = [&](const Vector<Scalar>& p) {
            long long flat = 0;
            for (Eigen::Index i = 0; i < d; ++i) {
                long long c = static_cast<long long>(std::floor(double((p[i] - k.lo[i]) / width[i])));
                c = std::clamp<long long>(c, 0, cells[i] - 1);
                // Agree with the boundaries used to build the cells below.
                while (c > 0 && p[i] < k.lo[i] + Scalar(c) * width[i]) --c;
                while (c + 1 < cells[i] && p[i] >= k.lo[i] + Scalar(c + 1) * width[i]) ++c;
                flat = flat * cells[i] + c;
            }
            return flat;
        };
        std::vector<std::pair<long long, Vector<Scalar>>> owned;
        for (const auto& p : reused) owned.emplace_back(cell_of(p), p);

        std::vector<detail::PendingAtom<Scalar>> cell_atoms;
        detail::for_each_index(cells, [&](const std::vector<long long>& idx) {
            Box<Scalar> cell;
            cell.lo.resize(d);
            cell.hi.resize(d);
            long long flat = 0;
            for (Eigen::Index i = 0; i < d; ++i) {
                cell.lo[i] = k.lo[i] + Scalar(idx[i]) * width[i];
                cell.hi[i] = (idx[i] + 1 == cells[i]) ? k.hi[i] : k.lo[i] + Scalar(idx[i] + 1) * width[i];
                flat = flat * cells[i] + idx[i];
            }
            std::vector<Vector<Scalar>> inside;
            for (const auto& [c, p] : owned) {
                if (c == flat) inside.push_back(p);
            }
            if (inside.empty()) {
                const Scalar mass = detail::midpoint_sum(cell, nodes, part->density);
                cell_atoms.push_back({cell.center(), mass, cell});
            } else {
                detail::split_cell(cell, std::move(inside), nodes, part->density, cell_atoms);
            }
        });

        Scalar raw_total(0);
        for (const auto& c : cell_atoms) raw_total += c.raw_mass;
        if (!(raw_total > Scalar(0))) throw Error("density has no mass on its discretization box");

        Scalar residual(0);
        Scalar scale = density_mass / raw_total;
        if (trimmed && raw_total < Scalar(1)) {
            residual = density_mass * (Scalar(1) - raw_total);
            scale = density_mass;
        }
        for (auto& c : cell_atoms) {
            if (c.raw_mass > Scalar(0)) pending.push_back({c.point, c.raw_mass * scale, c.cell});
        }
        if (residual > Scalar(0)) {
            const Vector<Scalar> centre = part->mean ? *part->mean : detail::density_mean(*part, k);
            pending.push_back({centre, residual, std::nullopt});
            out.trimmed_mass = residual;
        }
    }

    // Merge coincident atoms; first occurrence keeps its slot.
    for (auto& p : pending) {
        const std::ptrdiff_t j = out.find(p.point);
        if (j >= 0) {
            out.weights[j] += p.raw_mass;
            if (!out.parent_cells[j]) out.parent_cells[j] = p.cell;
        } else {
            out.atoms.push_back(std::move(p.point));
            out.weights.push_back(p.raw_mass);
            out.parent_cells.push_back(p.cell);
        }
    }
    Scalar total = std::accumulate(out.weights.begin(), out.weights.end(), Scalar(0));
    for (auto& w : out.weights) w /= total;
    out.validate();
    return out;
}

/// Nested levels mu_1, mu_2, ... with the union of their supports.
template <typename Scalar>
class DiracApproximationSequence {
public:
    explicit DiracApproximationSequence(ProbabilityMeasure<Scalar> mu) : mu_(std::move(mu)) {}

    const FiniteSupportMeasure<Scalar>& extend() {
        const int next = levels_.empty() ? 1 : levels_.back().level + 1;
        levels_.push_back(discretize(mu_, next, levels_.empty() ? nullptr : &levels_.back()));
        for (const auto& a : levels_.back().atoms) {
            const bool known = std::any_of(union_support_.begin(), union_support_.end(),
                                           [&](const Vector<Scalar>& u) { return u == a; });
            if (!known) union_support_.push_back(a);
        }
        return levels_.back();
    }

    const FiniteSupportMeasure<Scalar>& level(int l) {
        if (l < 1) throw Error("discretization level must be >= 1");
        while (static_cast<int>(levels_.size()) < l) extend();
        return levels_[l - 1];
    }

    const std::vector<FiniteSupportMeasure<Scalar>>& levels() const { return levels_; }
    const std::vector<Vector<Scalar>>& union_support() const { return union_support_; }
    const ProbabilityMeasure<Scalar>& measure() const { return mu_; }

private:
    ProbabilityMeasure<Scalar> mu_;
    std::vector<FiniteSupportMeasure<Scalar>> levels_;
    std::vector<Vector<Scalar>> union_support_;
};

template <typename Scalar, typename F>
Scalar integrate(const FiniteSupportMeasure<Scalar>& mu, F&& h) {
    Scalar sum(0);
    for (std::size_t j = 0; j < mu.atoms.size(); ++j) sum += mu.weights[j] * Scalar(h(mu.atoms[j]));
    return sum;
}

template <typename Scalar, typename F>
Scalar integrate(const ProbabilityMeasure<Scalar>& mu, F&& h) {
    Scalar atomic(0);
    for (const auto& a : mu.atoms()) atomic += a.weight * Scalar(h(a.point));
    const DensityPart<Scalar>* part = mu.density();
    if (part == nullptr) return atomic;

    Box<Scalar> box = part->domain;
    if (!box.bounded()) {
        if (part->marginal_cdf.empty()) throw Error("cannot integrate over unbounded support without a trimming rule");
        const Scalar tail(1e-14);
        for (Eigen::Index i = 0; i < box.dim(); ++i) {
            box.lo[i] = detail::quantile_from_cdf(part->marginal_cdf[i], tail, part->domain.lo[i], part->domain.hi[i]);
            box.hi[i] = detail::quantile_from_cdf(part->marginal_cdf[i], Scalar(1) - tail, part->domain.lo[i], part->domain.hi[i]);
        }
    }
    const Eigen::Index d = box.dim();
    std::vector<long long> nodes(d, detail::nodes_per_axis(part->quadrature_nodes, d));
    Scalar mass(0);
    const Scalar weighted = detail::midpoint_sum(box, nodes, [&](const Vector<Scalar>& x) {
        const Scalar w = part->density(x);
        mass += w;
        return w * Scalar(h(x));
    });
    // Normalize by the quadrature mass so that constants integrate exactly.
    Scalar volume(1);
    for (Eigen::Index i = 0; i < d; ++i) volume *= (box.hi[i] - box.lo[i]) / Scalar(nodes[i]);
    const Scalar density_value = weighted / (mass * volume);
    return mu.atomic_mass() * atomic + (Scalar(1) - mu.atomic_mass()) * density_value;
}

template <typename Scalar>
struct TestFunction {
    std::function<Scalar(const Vector<Scalar>&)> h;
    Scalar lipschitz;
    Scalar sup_bound;
};

template <typename Scalar>
struct WeakStarGap {
    Scalar gap;
    /// L/l + 2 sup|h| * trimmed mass.
    Scalar bound;
};

template <typename Scalar>
std::vector<WeakStarGap<Scalar>> weak_star_gap(const ProbabilityMeasure<Scalar>& mu,
                                               const FiniteSupportMeasure<Scalar>& mu_l,
                                               const std::vector<TestFunction<Scalar>>& tests) {
    std::vector<WeakStarGap<Scalar>> out;
    out.reserve(tests.size());
    for (const auto& t : tests) {
        const Scalar exact = integrate(mu, t.h);
        const Scalar approx = integrate(mu_l, t.h);
        const Scalar gap = exact > approx ? exact - approx : approx - exact;
        const Scalar bound = t.lipschitz / Scalar(std::max(mu_l.level, 1)) + Scalar(2) * t.sup_bound * mu_l.trimmed_mass;
        out.push_back({gap, bound});
    }
    return out;
}

}  // namespace eoc

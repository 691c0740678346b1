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

#include "ensemble_oc/app/problem.hpp"

#include <fstream>
#include <sstream>

#include "builtins.hpp"
#include "schema.hpp"

namespace eoc::app {

namespace {

Box<double> parse_domain(const json& v, const std::string& path, json& canonical) {
    if (!v.is_array() || v.empty()) schema::fail(path, "expected a non-empty array of [lo, hi] pairs");
    const auto d = Eigen::Index(v.size());
    Box<double> box;
    box.lo.resize(d);
    box.hi.resize(d);
    canonical = json::array();
    for (Eigen::Index i = 0; i < d; ++i) {
        const std::string p = path + "[" + std::to_string(i) + "]";
        const json& pair = v[std::size_t(i)];
        if (!pair.is_array() || pair.size() != 2) schema::fail(p, "expected [lo, hi]");
        box.lo[i] = schema::number(pair[0], p + "[0]", true);
        box.hi[i] = schema::number(pair[1], p + "[1]", true);
        if (!(box.lo[i] < box.hi[i])) schema::fail(p, "requires lo < hi");
        canonical.push_back(json::array({schema::encode(box.lo[i]), schema::encode(box.hi[i])}));
    }
    return box;
}

std::vector<Atom<double>> parse_atoms(const json& v, const std::string& path, json& canonical) {
    if (!v.is_array() || v.empty()) schema::fail(path, "expected a non-empty array of atoms");
    std::vector<Atom<double>> atoms;
    canonical = json::array();
    for (std::size_t i = 0; i < v.size(); ++i) {
        const std::string p = path + "[" + std::to_string(i) + "]";
        schema::allow_keys(v[i], p, {"point", "weight"});
        Atom<double> a{schema::vector(schema::require(v[i], p, "point"), schema::sub(p, "point")),
                       schema::number(schema::require(v[i], p, "weight"), schema::sub(p, "weight"))};
        canonical.push_back(json{{"point", schema::to_json(a.point)}, {"weight", a.weight}});
        atoms.push_back(std::move(a));
    }
    return atoms;
}

int parse_nodes(const json& doc, const std::string& path) {
    if (!doc.contains("quadrature_nodes")) return 1024;
    const long long q = schema::integer(doc["quadrature_nodes"], schema::sub(path, "quadrature_nodes"));
    if (q < 1 || q > (1LL << 24)) schema::fail(schema::sub(path, "quadrature_nodes"), "must lie in [1, 2^24]");
    return int(q);
}

DensityPart<double> density_part(const std::string& kind, const json& doc, const std::string& path, json& canonical) {
    json dom;
    const Box<double> box = parse_domain(schema::require(doc, path, "domain"), schema::sub(path, "domain"), dom);
    canonical["domain"] = dom;
    DensityPart<double> part;
    if (kind == "uniform") {
        if (!box.bounded()) schema::fail(schema::sub(path, "domain"), "uniform density requires a bounded domain");
        part = ProbabilityMeasure<double>::uniform_part(box);
    } else {
        const Vec mean = schema::vector(schema::require(doc, path, "mean"), schema::sub(path, "mean"), box.dim());
        const Vec sigma = schema::vector(schema::require(doc, path, "sigma"), schema::sub(path, "sigma"), box.dim());
        part = ProbabilityMeasure<double>::truncated_gaussian_part(box, mean, sigma);
        canonical["mean"] = schema::to_json(mean);
        canonical["sigma"] = schema::to_json(sigma);
    }
    part.quadrature_nodes = parse_nodes(doc, path);
    canonical["quadrature_nodes"] = part.quadrature_nodes;
    return part;
}

ProbabilityMeasure<double> build_measure(const json& doc, const std::string& path, json& canonical) {
    schema::object(doc, path);
    const std::string kind = schema::string(schema::require(doc, path, "kind"), schema::sub(path, "kind"));
    canonical = json{{"kind", kind}};
    if (kind == "atoms") {
        schema::allow_keys(doc, path, {"kind", "atoms", "metric"});
        json atoms;
        auto list = parse_atoms(schema::require(doc, path, "atoms"), schema::sub(path, "atoms"), atoms);
        const std::string metric = doc.contains("metric") ? schema::string(doc["metric"], schema::sub(path, "metric")) : "euclidean";
        if (metric != "euclidean" && metric != "discrete") schema::fail(schema::sub(path, "metric"), "expected \"euclidean\" or \"discrete\"");
        canonical["atoms"] = atoms;
        canonical["metric"] = metric;
        return ProbabilityMeasure<double>::from_atoms(std::move(list), metric == "discrete" ? Metric::discrete : Metric::euclidean);
    }
    if (kind == "uniform") {
        schema::allow_keys(doc, path, {"kind", "domain", "quadrature_nodes"});
        return ProbabilityMeasure<double>::from_density(density_part(kind, doc, path, canonical));
    }
    if (kind == "truncated_gaussian") {
        schema::allow_keys(doc, path, {"kind", "domain", "mean", "sigma", "quadrature_nodes"});
        return ProbabilityMeasure<double>::from_density(density_part(kind, doc, path, canonical));
    }
    if (kind == "mixture") {
        schema::allow_keys(doc, path, {"kind", "atoms", "atomic_mass", "density", "domain", "mean", "sigma", "quadrature_nodes"});
        json atoms;
        auto list = parse_atoms(schema::require(doc, path, "atoms"), schema::sub(path, "atoms"), atoms);
        const double mass = schema::number(schema::require(doc, path, "atomic_mass"), schema::sub(path, "atomic_mass"));
        const std::string density = doc.contains("density") ? schema::string(doc["density"], schema::sub(path, "density")) : "uniform";
        if (density != "uniform" && density != "truncated_gaussian") {
            schema::fail(schema::sub(path, "density"), "expected \"uniform\" or \"truncated_gaussian\"");
        }
        if (density == "uniform" && (doc.contains("mean") || doc.contains("sigma"))) {
            schema::fail(path, "mean/sigma only apply to a truncated_gaussian density");
        }
        DensityPart<double> part = density_part(density, doc, path, canonical);
        canonical["atoms"] = atoms;
        canonical["atomic_mass"] = mass;
        canonical["density"] = density;
        return ProbabilityMeasure<double>::mixture(std::move(list), mass, std::move(part));
    }
    schema::fail(schema::sub(path, "kind"), "unknown measure kind '" + kind + "'; available: atoms, mixture, truncated_gaussian, uniform");
}

json parse_text(const std::string& text, const std::string& source) {
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) throw SchemaError(source + ": empty document");
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw SchemaError(source + ": " + e.what());
    }
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError(path.string() + ": cannot open file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ControlSet<double> parse_control(const json& doc, const std::string& path, json& canonical) {
    schema::object(doc, path);
    const std::string kind = schema::string(schema::require(doc, path, "kind"), schema::sub(path, "kind"));
    if (kind == "box") {
        schema::allow_keys(doc, path, {"kind", "lo", "hi"});
        const Vec lo = schema::vector(schema::require(doc, path, "lo"), schema::sub(path, "lo"));
        const Vec hi = schema::vector(schema::require(doc, path, "hi"), schema::sub(path, "hi"), lo.size());
        if (lo.size() == 0) schema::fail(schema::sub(path, "lo"), "must be non-empty");
        if (!(lo.array() <= hi.array()).all()) schema::fail(path, "requires lo <= hi");
        canonical = json{{"kind", "box"}, {"lo", schema::to_json(lo)}, {"hi", schema::to_json(hi)}};
        return ControlSet<double>::box(lo, hi);
    }
    if (kind == "finite") {
        schema::allow_keys(doc, path, {"kind", "values"});
        const json& values = schema::require(doc, path, "values");
        if (!values.is_array() || values.empty()) schema::fail(schema::sub(path, "values"), "expected a non-empty array of vectors");
        std::vector<Vec> list;
        canonical = json{{"kind", "finite"}, {"values", json::array()}};
        for (std::size_t i = 0; i < values.size(); ++i) {
            const std::string p = schema::sub(path, "values") + "[" + std::to_string(i) + "]";
            list.push_back(schema::vector(values[i], p, i == 0 ? std::nullopt : std::optional<Eigen::Index>(list.front().size())));
            if (list.back().size() == 0) schema::fail(p, "must be non-empty");
            canonical["values"].push_back(schema::to_json(list.back()));
        }
        return ControlSet<double>::finite(std::move(list));
    }
    schema::fail(schema::sub(path, "kind"), "unknown control kind '" + kind + "'; available: box, finite");
}

RegularityData<double> parse_regularity(const json& doc, const std::string& path, json& canonical) {
    schema::allow_keys(doc, path, {"c", "k_f", "k_g", "M", "delta", "theta_f_lipschitz"});
    RegularityData<double> r;
    canonical = json::object();
    auto nonneg = [&](const char* key) {
        const double v = schema::number(doc[key], schema::sub(path, key));
        if (v < 0) schema::fail(schema::sub(path, key), "must be nonnegative");
        canonical[key] = v;
        return v;
    };
    if (doc.contains("c")) r.c = nonneg("c");
    if (doc.contains("k_f")) r.k_f = nonneg("k_f");
    if (doc.contains("theta_f_lipschitz")) r.theta_f_lipschitz = nonneg("theta_f_lipschitz");
    r.k_g = doc.contains("k_g") ? nonneg("k_g") : 1.0;
    r.M = doc.contains("M") ? nonneg("M") : 0.0;
    r.delta = doc.contains("delta") ? nonneg("delta") : 0.0;
    canonical["k_g"] = r.k_g;
    canonical["M"] = r.M;
    canonical["delta"] = r.delta;
    if (r.k_g < 1) schema::fail(schema::sub(path, "k_g"), "must be >= 1");
    return r;
}

SolveConfig<double> parse_solver(const json& doc, const std::string& path, Eigen::Index m, json& canonical) {
    schema::allow_keys(doc, path,
                       {"grid", "level", "max_sweeps", "tol", "merit_tolerance", "constraint_tolerance", "penalty_start",
                        "penalty_factor", "max_penalty_rounds", "min_step", "initial_control", "grid_points"});
    SolveConfig<double> c;
    auto integer = [&](const char* key, int& out) {
        if (doc.contains(key)) out = int(schema::integer(doc[key], schema::sub(path, key)));
        canonical[key] = out;
    };
    auto real = [&](const char* key, double& out) {
        if (doc.contains(key)) out = schema::number(doc[key], schema::sub(path, key));
        canonical[key] = out;
    };
    canonical = json::object();
    integer("grid", c.grid_steps);
    integer("level", c.level);
    integer("max_sweeps", c.max_sweeps);
    integer("max_penalty_rounds", c.max_penalty_rounds);
    integer("grid_points", c.maximize.grid_points);
    real("tol", c.maximality_target);
    real("merit_tolerance", c.merit_tolerance);
    real("constraint_tolerance", c.constraint_tolerance);
    real("penalty_start", c.penalty_start);
    real("penalty_factor", c.penalty_factor);
    real("min_step", c.min_step);
    if (doc.contains("initial_control")) {
        c.initial_control = schema::vector(doc["initial_control"], schema::sub(path, "initial_control"), m);
        canonical["initial_control"] = schema::to_json(*c.initial_control);
    }
    if (c.maximize.grid_points < 2) schema::fail(schema::sub(path, "grid_points"), "must be >= 2");
    try {
        c.validate();
    } catch (const Error& e) {
        schema::fail(path, e.what());
    }
    return c;
}

}  // namespace

ProbabilityMeasure<double> parse_measure(const json& doc, const std::string& path, json* canonical) {
    json scratch;
    try {
        auto mu = build_measure(doc, path, canonical ? *canonical : scratch);
        return mu;
    } catch (const SchemaError&) {
        throw;
    } catch (const Error& e) {
        throw SchemaError(path + ": " + e.what());
    }
}

ProbabilityMeasure<double> load_measure(const std::filesystem::path& path) {
    return parse_measure(parse_text(slurp(path), path.string()), path.string());
}

ProblemFile parse_problem(const json& doc, const std::string& source) {
    const std::string root = source;
    schema::allow_keys(doc, root,
                       {"schema_version", "name", "state_dim", "control_dim", "horizon", "x0", "dynamics", "control", "cost",
                        "constraint", "regularity", "measure", "solver"});
    ProblemFile pf;
    pf.source = source;
    json& c = pf.canonical;
    c = json::object();

    if (doc.contains("schema_version")) {
        pf.version = int(schema::integer(doc["schema_version"], schema::sub(root, "schema_version")));
        if (pf.version != schema_version) schema::fail(schema::sub(root, "schema_version"), "unsupported version " + std::to_string(pf.version));
    }
    c["schema_version"] = pf.version;
    if (doc.contains("name")) c["name"] = schema::string(doc["name"], schema::sub(root, "name"));

    const long long n = schema::integer(schema::require(doc, root, "state_dim"), schema::sub(root, "state_dim"));
    if (n < 1) schema::fail(schema::sub(root, "state_dim"), "must be >= 1");
    c["state_dim"] = n;

    auto& sys = pf.system;
    sys.state_dim = Eigen::Index(n);
    json control;
    sys.control_set = parse_control(schema::require(doc, root, "control"), schema::sub(root, "control"), control);
    c["control"] = control;
    sys.control_dim = sys.control_set.dim();
    if (doc.contains("control_dim")) {
        const long long m = schema::integer(doc["control_dim"], schema::sub(root, "control_dim"));
        if (m != sys.control_dim) schema::fail(schema::sub(root, "control_dim"), "does not match the control set dimension");
    }
    c["control_dim"] = sys.control_dim;

    sys.horizon = schema::number(schema::require(doc, root, "horizon"), schema::sub(root, "horizon"));
    if (!(sys.horizon > 0) || !std::isfinite(sys.horizon)) schema::fail(schema::sub(root, "horizon"), "must be positive and finite");
    c["horizon"] = sys.horizon;
    sys.x0 = schema::vector(schema::require(doc, root, "x0"), schema::sub(root, "x0"), sys.state_dim);
    c["x0"] = schema::to_json(sys.x0);

    json measure;
    pf.measure = parse_measure(schema::require(doc, root, "measure"), schema::sub(root, "measure"), &measure);
    c["measure"] = measure;
    const Eigen::Index d = pf.measure.dimension();

    c["dynamics"] = install_dynamics(schema::require(doc, root, "dynamics"), schema::sub(root, "dynamics"), sys.state_dim,
                                     sys.control_dim, d, sys);
    c["cost"] = install_cost(schema::require(doc, root, "cost"), schema::sub(root, "cost"), sys.state_dim, d, sys);
    c["constraint"] = install_constraint(doc.contains("constraint") ? doc["constraint"] : json{{"kind", "none"}},
                                         schema::sub(root, "constraint"), sys.state_dim, d, sys);

    json regularity;
    sys.regularity = parse_regularity(doc.contains("regularity") ? doc["regularity"] : json::object(),
                                      schema::sub(root, "regularity"), regularity);
    c["regularity"] = regularity;

    json solver;
    pf.config = parse_solver(doc.contains("solver") ? doc["solver"] : json::object(), schema::sub(root, "solver"),
                             sys.control_dim, solver);
    c["solver"] = solver;
    if (pf.config.initial_control && !sys.control_set.contains(*pf.config.initial_control)) {
        schema::fail(schema::sub(root, "solver.initial_control"), "must lie in the control set");
    }

    try {
        sys.validate();
    } catch (const Error& e) {
        schema::fail(root, e.what());
    }
    return pf;
}

ProblemFile parse_problem_text(const std::string& text, const std::string& source) {
    return parse_problem(parse_text(text, source), source);
}

ProblemFile load_problem(const std::filesystem::path& path) {
    return parse_problem_text(slurp(path), path.string());
}

void save_problem(const ProblemFile& problem, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(path.string() + ": cannot write file");
    out << problem.canonical.dump(2) << "\n";
}

}  // namespace eoc::app
